"""Rough scalar diffusion fields, piecewise constant per fine element.

Two generator families cover the regimes the multiscale method targets:
a smooth separable oscillation with period parameter epsilon, and a seeded
log-uniform checkerboard with contrast up to 1e3.  Fields are immutable and
bit-reproducible from their descriptor (the checkerboard draws its block
values from a counter-based Philox generator keyed by the seed, so values
do not depend on evaluation order or thread count).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CoeffDescriptor:
    """Generator kind plus the parameters that reproduce the field."""

    kind: str                 # constant | periodic | checkerboard
    constant: float = 1.0
    epsilon: float = 0.125
    amplitude: float = 2.0
    cell: int = 8
    contrast: float = 100.0
    seed: int = 0


@dataclass(eq=False)
class CoefficientField:
    values: np.ndarray  # one positive diffusivity per fine element
    alpha: float        # exact min of values
    beta: float         # exact max of values
    descriptor: CoeffDescriptor

    def validate(self):
        """Recompute the bounds and confirm the stored alpha/beta."""
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo <= 0.0:
            raise ValueError(f"coefficient not uniformly positive: min {lo}")
        if lo != self.alpha or hi != self.beta:
            raise ValueError("stored coefficient bounds are stale")


def _from_values(values, descriptor):
    values = np.asarray(values, dtype=float)
    return CoefficientField(
        values=values,
        alpha=float(values.min()),
        beta=float(values.max()),
        descriptor=descriptor,
    )


def make_constant(c, fine):
    """Constant diffusivity c > 0 on every fine element."""
    if c <= 0:
        raise ValueError(f"invalid coefficient: need c > 0, got {c}")
    desc = CoeffDescriptor(kind="constant", constant=float(c))
    return _from_values(np.full(fine.n_triangles, float(c)), desc)


def make_periodic(epsilon, amplitude, fine):
    """Separable oscillation (a0 + cos(2*pi*x/eps)) * (a0 + sin(2*pi*y/eps)).

    Evaluated at element centroids; amplitude a0 > 1 keeps the field
    uniformly positive (the product is bounded below by (a0-1)^2).
    """
    if not (0 < epsilon <= 1):
        raise ValueError(f"invalid period: need 0 < epsilon <= 1, got {epsilon}")
    if amplitude <= 1:
        raise ValueError(f"coercivity lost: need amplitude > 1, got {amplitude}")
    cx, cy = fine.element_centroids[:, 0], fine.element_centroids[:, 1]
    values = (amplitude + np.cos(2 * np.pi * cx / epsilon)) * \
             (amplitude + np.sin(2 * np.pi * cy / epsilon))
    desc = CoeffDescriptor(kind="periodic", epsilon=float(epsilon),
                           amplitude=float(amplitude))
    return _from_values(values, desc)


def make_checkerboard(cell, contrast, seed, fine):
    """cell x cell blocks with independent values log-uniform in [1, contrast].

    Block b (row-major) gets contrast**u[b] where u is the b-th draw of a
    Philox stream keyed by the seed; every fine element inherits the value
    of the block containing its centroid.
    """
    if cell < 1:
        raise ValueError(f"invalid subdivision: need cell >= 1, got {cell}")
    if contrast < 1:
        raise ValueError(f"invalid contrast: need contrast >= 1, got {contrast}")
    if fine.cells_per_side % cell != 0:
        raise ValueError(
            f"alignment error: fine resolution {fine.cells_per_side} "
            f"is not a multiple of cell count {cell}")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = rng.random(cell * cell)
    block_values = float(contrast) ** u

    c = fine.element_centroids
    bx = np.floor(c[:, 0] * cell).astype(np.int64)
    by = np.floor(c[:, 1] * cell).astype(np.int64)
    values = block_values[by * cell + bx]
    desc = CoeffDescriptor(kind="checkerboard", cell=int(cell),
                           contrast=float(contrast), seed=int(seed))
    return _from_values(values, desc)


def export_raster(coeff, fine, path):
    """Write one `centroid_x centroid_y value` line per fine element."""
    if coeff.values.shape[0] != fine.n_triangles:
        raise ValueError("coefficient/mesh element count mismatch")
    c = fine.element_centroids
    lines = [
        f"{format(c[e, 0], '.12g')} {format(c[e, 1], '.12g')} "
        f"{format(coeff.values[e], '.12g')}"
        for e in range(fine.n_triangles)
    ]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
