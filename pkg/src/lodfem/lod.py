"""Corrector problems, the multiscale space, and corrector decay.

Each coarse interior node gets a fine-scale corrector: the energy projection
of its hat function onto the kernel of the quasi-interpolation, computed as
an equality-constrained quadratic solve.  Localized correctors restrict the
solve to an l-th order element patch per coarse element and sum the per
element contributions; at patch saturation they reproduce the global
corrector exactly.  Subtracting correctors from the prolonged hats yields
the multiscale basis whose Galerkin (or Petrov-Galerkin) solve is the
method's output.

Corrector problems for distinct patches are independent; the batch solver
may run them on a thread pool and always merges results in sorted element
order, so outputs are bit-identical at any thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import fem
from .linalg import SaddleFactorization, SolverFailure, spd_solve
from .mesh import element_patch


@dataclass(eq=False)
class CorrectorSet:
    """One fine-space corrector per coarse interior node (rows of `matrix`)."""

    mode: str                    # "global" or "localized"
    order: int | None            # patch order for localized mode
    nodes: np.ndarray            # coarse vertex id per row
    matrix: sparse.csr_matrix    # (n_coarse_interior, n_fine_interior)


@dataclass(eq=False)
class MultiscaleSpace:
    """Modified coarse basis and the assembled coarse systems."""

    basis: sparse.csr_matrix     # (n_fine_interior, n_coarse_interior)
    gram: sparse.csr_matrix      # a(b_a, b_b)
    gram_pg: sparse.csr_matrix   # a(b_a, hat_b): coarse hats as test functions
    load: np.ndarray             # (f, b_a)
    load_pg: np.ndarray          # (f, hat_a)


def _interior_node_ids(coarse):
    return coarse.interior_vertices


def solve_global_corrector(node, hierarchy, ops, interp, tol=1e-10,
                           _factorization=None):
    """Corrector of one coarse interior node on the whole domain.

    Solves  a(phi, w) = a(hat_node, w)  for all w in the interpolation
    kernel, as a saddle system on the fine interior dofs.
    """
    coarse = hierarchy.coarse
    dof = coarse.interior_index[node]
    if dof < 0:
        raise IndexError(f"coarse vertex {node} is not an interior node")
    fac = _factorization or SaddleFactorization(ops.stiffness_coeff, interp.matrix)
    p = hierarchy.prolongation_interior[:, dof].toarray().ravel()
    b = ops.stiffness_coeff @ p
    try:
        phi, _ = fac.solve(b, tol)
    except SolverFailure as exc:
        raise SolverFailure(f"global corrector at node {node}: {exc}",
                            residual=exc.residual) from exc
    return phi


class _PatchProblem:
    """Shared patch matrices for all nodes of one seed element."""

    def __init__(self, hierarchy, ops, interp, element, order):
        self.patch = element_patch(hierarchy, element, order)
        dofs = self.patch.fine_interior_dofs
        A = ops.stiffness_coeff[dofs][:, dofs].tocsr()
        rows = hierarchy.coarse.interior_index[self.patch.active_coarse_nodes]
        C = interp.matrix[rows][:, dofs].tocsr()
        keep = np.flatnonzero(np.diff(C.indptr))  # all-zero rows constrain nothing
        self.factorization = SaddleFactorization(A, C[keep])
        self.dofs = dofs

    def solve(self, b_full_interior, tol):
        x, _ = self.factorization.solve(b_full_interior[self.dofs], tol)
        return x


def solve_local_corrector(node, element, order, hierarchy, ops, interp,
                          tol=1e-10, _problem=None):
    """Single-element corrector contribution on the patch of `element`.

    The right-hand side pairs the hat of `node` with test functions through
    the stiffness of `element`'s fine children only; the returned fine
    interior vector is zero outside the patch.
    """
    coarse = hierarchy.coarse
    dof = coarse.interior_index[node]
    if dof < 0:
        raise IndexError(f"coarse vertex {node} is not an interior node")
    if node not in coarse.triangles[element]:
        raise ValueError(f"coarse vertex {node} is not a vertex of element {element}")
    prob = _problem or _PatchProblem(hierarchy, ops, interp, element, order)

    p_full = np.zeros(hierarchy.fine.n_vertices)
    p_full[hierarchy.fine.interior_vertices] = \
        hierarchy.prolongation_interior[:, dof].toarray().ravel()
    b_full = fem.apply_subset_stiffness(
        hierarchy.fine, ops.coeff, hierarchy.children[element], p_full)
    b_int = b_full[hierarchy.fine.interior_vertices]
    try:
        x = prob.solve(b_int, tol)
    except SolverFailure as exc:
        raise SolverFailure(
            f"local corrector at node {node}, element {element}: {exc}",
            residual=exc.residual) from exc
    out = np.zeros(hierarchy.fine.n_interior)
    out[prob.dofs] = x
    return out


def _solve_patch_batch(hierarchy, ops, interp, element, order, tol):
    """All corrector contributions seeded at one coarse element."""
    prob = _PatchProblem(hierarchy, ops, interp, element, order)
    coarse = hierarchy.coarse
    nodes = np.sort(coarse.triangles[element])
    results = {}
    for node in nodes:
        if coarse.interior_index[node] < 0:
            continue
        results[int(node)] = solve_local_corrector(
            node, element, order, hierarchy, ops, interp, tol, _problem=prob)
    return element, results


def assemble_corrector_set(hierarchy, ops, interp, mode="localized", order=2,
                           tol=1e-10, threads=1):
    """Correctors for every coarse interior node.

    Localized mode sums per-element patch solves (at most the node's star
    size per node, in ascending element order); global mode reuses one KKT
    factorization for all nodes.
    """
    coarse = hierarchy.coarse
    nodes = _interior_node_ids(coarse)
    n_fi = hierarchy.fine.n_interior

    if mode == "global":
        fac = SaddleFactorization(ops.stiffness_coeff, interp.matrix)
        rows = [solve_global_corrector(node, hierarchy, ops, interp, tol,
                                       _factorization=fac)
                for node in nodes]
        matrix = sparse.csr_matrix(np.vstack(rows)) if rows else \
            sparse.csr_matrix((0, n_fi))
        return CorrectorSet(mode="global", order=None, nodes=nodes, matrix=matrix)

    if mode != "localized":
        raise ValueError(f"unknown corrector mode: {mode!r}")

    elements = range(coarse.n_triangles)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(
                lambda k: _solve_patch_batch(hierarchy, ops, interp, k, order, tol),
                elements))
    else:
        batches = [_solve_patch_batch(hierarchy, ops, interp, k, order, tol)
                   for k in elements]

    contributions = {int(node): [] for node in nodes}
    for element, results in sorted(batches, key=lambda item: item[0]):
        for node, vec in results.items():
            contributions[node].append(vec)
    rows = []
    for node in nodes:
        total = np.zeros(n_fi)
        for vec in contributions[int(node)]:
            total += vec
        rows.append(total)
    matrix = sparse.csr_matrix(np.vstack(rows)) if rows else \
        sparse.csr_matrix((0, n_fi))
    matrix.eliminate_zeros()
    return CorrectorSet(mode="localized", order=int(order), nodes=nodes,
                        matrix=matrix)


def build_multiscale_space(hierarchy, ops, correctors):
    """Modified basis b_a = hat_a - phi_a and its coarse systems."""
    P = hierarchy.prolongation_interior
    B = (P - correctors.matrix.T).tocsr()
    S = ops.stiffness_coeff
    SB = S @ B
    gram = (B.T @ SB).tocsr()
    gram_pg = (P.T @ SB).tocsr()
    return MultiscaleSpace(
        basis=B,
        gram=gram,
        gram_pg=gram_pg,
        load=B.T @ ops.load,
        load_pg=P.T @ ops.load,
    )


def solve_multiscale(space, mode="galerkin", tol=1e-10):
    """Coarse coefficients and the fine representation of the solution."""
    if mode == "galerkin":
        gram = space.gram
        skew = abs(gram - gram.T)
        if (skew.nnz and skew.data.max() > 1e-10 * abs(gram).data.max()) or \
                np.any(gram.diagonal() <= 0):
            raise ValueError("assembly integrity lost: coarse system is not SPD")
        coeffs = spd_solve(gram, space.load, tol)
    elif mode == "petrov_galerkin":
        if np.linalg.norm(space.load_pg) == 0.0:
            coeffs = np.zeros(space.gram_pg.shape[0])
        else:
            lu = spla.splu(sparse.csc_matrix(space.gram_pg))
            coeffs = lu.solve(space.load_pg)
            resid = np.linalg.norm(space.gram_pg @ coeffs - space.load_pg)
            if not np.isfinite(resid) or \
                    resid > tol * np.linalg.norm(space.load_pg):
                raise SolverFailure("coarse Petrov-Galerkin solve failed",
                                    residual=float(resid))
    else:
        raise ValueError(f"unknown solve mode: {mode!r}")
    return coeffs, space.basis @ coeffs


def measure_corrector_decay(hierarchy, node, phi, radii):
    """H1 norm of a corrector outside balls around its node.

    An element counts as exterior to radius R when all three vertices lie
    strictly outside the closed ball; radii past the domain diameter simply
    give zero tails.
    """
    radii = list(radii)
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    fine = hierarchy.fine
    center = hierarchy.coarse.vertices[node]
    dist = np.linalg.norm(fine.vertices - center, axis=1)
    phi_full = fem.pad_full(fine, phi)
    tails = []
    for R in radii:
        outside = np.flatnonzero(np.all(dist[fine.triangles] > R, axis=1))
        if outside.size == 0:
            tails.append((float(R), 0.0))
        else:
            tails.append((float(R), float(np.sqrt(
                fem.subset_h1_sq(fine, outside, phi_full)))))
    return tails


def fit_decay(radii, tails, spacing):
    """Least-squares slope and R^2 of log(tail) against radius/spacing.

    Zero tails (radii beyond the domain) carry no decay information and are
    dropped; at least three positive tails are required.
    """
    radii = np.asarray(radii, dtype=float)
    tails = np.asarray(tails, dtype=float)
    keep = tails > 0
    if keep.sum() < 3:
        raise ValueError("need at least three positive tails to fit a decay rate")
    x = radii[keep] / spacing
    y = np.log(tails[keep])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(r2)
