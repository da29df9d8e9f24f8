"""Independent brute-force oracles for the test suite.

Everything here recomputes quantities from first principles (plane fits for
gradients, pointwise quadrature, dense linear algebra) without touching the
package's assembly routines, so matches against these values are meaningful.
"""

import numpy as np

# Degree-5 Gauss rule on the reference triangle (barycentric points, weights
# summing to 1).
_G7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [0.059715871789770, 0.470142064105115, 0.470142064105115],
    [0.470142064105115, 0.059715871789770, 0.470142064105115],
    [0.470142064105115, 0.470142064105115, 0.059715871789770],
    [0.797426985353087, 0.101286507323456, 0.101286507323456],
    [0.101286507323456, 0.797426985353087, 0.101286507323456],
    [0.101286507323456, 0.101286507323456, 0.797426985353087],
])
_G7_W = np.array([0.225,
                  0.132394152788506, 0.132394152788506, 0.132394152788506,
                  0.125939180544827, 0.125939180544827, 0.125939180544827])


def triangle_area(coords):
    (x0, y0), (x1, y1), (x2, y2) = coords
    return 0.5 * ((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))


def hat_gradients(coords):
    """Gradients of the three P1 basis functions via a plane fit."""
    A = np.column_stack([np.ones(3), coords])
    grads = np.zeros((3, 2))
    for i in range(3):
        c = np.linalg.solve(A, np.eye(3)[i])
        grads[i] = c[1:]
    return grads


def dense_stiffness(mesh, coeff_values=None):
    """Element-loop dense assembly with plane-fit gradients (full dof set)."""
    n = mesh.n_vertices
    K = np.zeros((n, n))
    for e, tri in enumerate(mesh.triangles):
        coords = mesh.vertices[tri]
        area = triangle_area(coords)
        grads = hat_gradients(coords)
        a_e = 1.0 if coeff_values is None else coeff_values[e]
        for i in range(3):
            for j in range(3):
                K[tri[i], tri[j]] += a_e * area * grads[i] @ grads[j]
    return K


def dense_mass(mesh):
    """Dense mass matrix via the degree-5 quadrature rule."""
    n = mesh.n_vertices
    M = np.zeros((n, n))
    for tri in mesh.triangles:
        coords = mesh.vertices[tri]
        area = triangle_area(coords)
        for lam, w in zip(_G7_BARY, _G7_W):
            for i in range(3):
                for j in range(3):
                    M[tri[i], tri[j]] += w * area * lam[i] * lam[j]
    return M


def load_7pt(mesh, f):
    """Load vector by the degree-5 rule (full dof set)."""
    out = np.zeros(mesh.n_vertices)
    for tri in mesh.triangles:
        coords = mesh.vertices[tri]
        area = triangle_area(coords)
        for lam, w in zip(_G7_BARY, _G7_W):
            x, y = lam @ coords
            fval = f(x, y)
            for i in range(3):
                out[tri[i]] += w * area * fval * lam[i]
    return out


class PointLocator:
    """Barycentric point location with precomputed per-element inverses."""

    def __init__(self, mesh):
        self.mesh = mesh
        systems = np.empty((mesh.n_triangles, 3, 3))
        for e, tri in enumerate(mesh.triangles):
            systems[e] = np.column_stack([np.ones(3), mesh.vertices[tri]]).T
        self.inverses = np.linalg.inv(systems)

    def locate(self, point, tol=1e-12):
        rhs = np.array([1.0, point[0], point[1]])
        lam = self.inverses @ rhs
        hits = np.flatnonzero(np.all(lam >= -tol, axis=1))
        if hits.size == 0:
            raise ValueError(f"point {point} outside mesh")
        return int(hits[0]), lam[hits[0]]

    def hat_value(self, vertex, point):
        e, lam = self.locate(point)
        tri = self.mesh.triangles[e]
        return float(lam[tri == vertex].sum())


def locate_element(mesh, point, tol=1e-12):
    """Element containing a point (first hit; ties on edges are fine)."""
    return PointLocator(mesh).locate(point, tol)


def hat_value(mesh, vertex, point):
    """Evaluate the P1 hat of `vertex` at a point by direct location."""
    return PointLocator(mesh).hat_value(vertex, point)


def hat_gradient_on(mesh, vertex, element):
    """Gradient of the hat of `vertex` restricted to one element."""
    tri = mesh.triangles[element]
    grads = hat_gradients(mesh.vertices[tri])
    g = np.zeros(2)
    for i in range(3):
        if tri[i] == vertex:
            g += grads[i]
    return g


def interpolation_row(hierarchy, coarse_vertex):
    """Quadrature oracle for one quasi-interpolation row (full fine dofs).

    Numerator: edge-midpoint rule for the mass pairing (exact for the
    quadratic integrand) plus exact constant-gradient products; denominator
    likewise.  Coarse hat values come from direct point location on the
    coarse mesh, independent of the prolongation.
    """
    fine = hierarchy.fine
    coarse = hierarchy.coarse
    locator = PointLocator(coarse)
    H = coarse.mesh_size
    row = np.zeros(fine.n_vertices)
    denom = 0.0
    # fine hat values at the edge midpoints m01, m12, m20: 1/2 on own edges
    fine_hat_mid = 0.5 * np.array([
        [1, 0, 1],
        [1, 1, 0],
        [0, 1, 1],
    ])
    for tri in fine.triangles:
        coords = fine.vertices[tri]
        area = triangle_area(coords)
        mids = 0.5 * (coords + np.roll(coords, -1, axis=0))
        lam_coarse = np.array([locator.hat_value(coarse_vertex, m) for m in mids])
        if np.all(lam_coarse == 0.0):
            continue  # linear and zero at all midpoints: zero on the element
        owner, _ = locator.locate(coords.mean(axis=0))
        g_coarse = hat_gradient_on(coarse, coarse_vertex, owner)
        g_fine = hat_gradients(coords)
        for i in range(3):
            mass = area / 3.0 * np.dot(fine_hat_mid[i], lam_coarse)
            grad = area * (g_fine[i] @ g_coarse)
            row[tri[i]] += mass + H * H * grad
        denom += area / 3.0 * lam_coarse.sum()
        denom += H * H * area * np.linalg.norm(g_coarse)
    return row / denom, denom


def dense_kkt_solve(A, C, b):
    """Dense KKT elimination for min 1/2 x'Ax - b'x s.t. Cx = 0."""
    n, m = A.shape[0], C.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[:n, n:] = C.T
    K[n:, :n] = C
    rhs = np.concatenate([b, np.zeros(m)])
    z = np.linalg.solve(K, rhs)
    return z[:n], z[n:]


def error_vs_function(mesh, u_full, u_exact, grad_exact):
    """L2 and H1 errors of a P1 function against a smooth exact solution.

    Midpoint quadrature for the L2 part, edge midpoints for the gradient
    part (the P1 gradient is constant per element).
    """
    l2_sq = 0.0
    semi_sq = 0.0
    for tri in mesh.triangles:
        coords = mesh.vertices[tri]
        area = triangle_area(coords)
        grads = hat_gradients(coords)
        uh = u_full[tri]
        grad_uh = uh @ grads
        mids = 0.5 * (coords + np.roll(coords, -1, axis=0))
        vals_uh = np.array([0.5 * (uh[0] + uh[1]), 0.5 * (uh[1] + uh[2]),
                            0.5 * (uh[2] + uh[0])])
        for m, v in zip(mids, vals_uh):
            l2_sq += area / 3.0 * (v - u_exact(m[0], m[1])) ** 2
            gx, gy = grad_exact(m[0], m[1])
            semi_sq += area / 3.0 * ((grad_uh[0] - gx) ** 2 + (grad_uh[1] - gy) ** 2)
    return np.sqrt(l2_sq), np.sqrt(l2_sq + semi_sq)
