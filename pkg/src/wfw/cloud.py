"""Particle clouds, exact desk-scale optimal transport, and geodesics.

A cloud is a uniform empirical measure: n points in R^d, each carrying mass
1/n.  Everything downstream (functionals, prox solves, the outer loop) only
ever touches measures through this representation.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import DimensionMismatch, SizeCapExceeded, TOutOfRange

#: Hard cap on n*m for the exact transport solvers.
EXACT_OT_CAP = 10**6

#: Hard cap on the particle count geodesic_point may materialize.
GEODESIC_OUTPUT_CAP = 10**5

_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class ParticleCloud:
    """Equal-weight particle measure on R^d.

    Args:
        points: array-like of shape (n, d); copied to float64 and frozen.
        seed_tag: optional provenance label for the RNG that produced the
            points (carried through serialization, never interpreted).
    """

    points: np.ndarray
    seed_tag: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("cloud needs an (n, d) array with n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud coordinates must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def second_moment(self):
        """(1/n) sum ||x_i||^2 — finite by construction, kept for assertions."""
        return float(np.mean(np.sum(self.points**2, axis=1)))

    def with_points(self, points):
        return ParticleCloud(points, seed_tag=self.seed_tag)


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two clouds: nonnegative n-by-m weights with uniform marginals."""

    weights: np.ndarray
    source: ParticleCloud
    target: ParticleCloud

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        n, m = self.source.n, self.target.n
        if w.shape != (n, m):
            raise ValueError(f"plan shape {w.shape} != ({n}, {m})")
        if np.any(w < -_MARGINAL_TOL):
            raise ValueError("plan has negative entries")
        row_err = np.max(np.abs(w.sum(axis=1) - 1.0 / n))
        col_err = np.max(np.abs(w.sum(axis=0) - 1.0 / m))
        if row_err > _MARGINAL_TOL or col_err > _MARGINAL_TOL:
            raise ValueError(
                f"marginals off by (rows {row_err:.2e}, cols {col_err:.2e})"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def cost(self):
        """Sum_ij w_ij ||x_i - y_j||^2 (squared-displacement transport cost)."""
        d2 = _sqdist_matrix(self.source.points, self.target.points)
        return float(np.sum(self.weights * d2))


def _sqdist_matrix(x, y):
    """Pairwise squared Euclidean distances, clipped to be exactly nonnegative."""
    d2 = (
        np.sum(x**2, axis=1)[:, None]
        + np.sum(y**2, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.maximum(d2, 0.0)


def wasserstein2_exact(a, b, cap=EXACT_OT_CAP):
    """Exact 2-Wasserstein distance between two clouds.

    Uses an exact assignment solve when the clouds have equal size (the
    optimal plan is then a permutation) and a dense LP otherwise.  This is a
    test oracle, not a hot path: n*m is capped.

    Args:
        a, b: ParticleCloud with matching dimension.
        cap: maximum allowed n*m for the dense solve.

    Returns:
        (distance, plan): the distance is sqrt of the minimal coupling cost.

    Raises:
        DimensionMismatch: ambient dimensions differ.
        SizeCapExceeded: n*m above the cap; caller must subsample.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    n, m = a.n, b.n
    if n * m > cap:
        raise SizeCapExceeded(
            f"exact OT needs {n * m} entries (cap {cap})", required=n * m, cap=cap
        )
    d2 = _sqdist_matrix(a.points, b.points)
    if n == m:
        rows, cols = linear_sum_assignment(d2)
        w = np.zeros((n, m))
        w[rows, cols] = 1.0 / n
        cost = float(d2[rows, cols].sum() / n)
    else:
        w, cost = _lp_transport(d2, n, m)
    plan = TransportPlan(w, a, b)
    return math.sqrt(max(cost, 0.0)), plan


def _lp_transport(d2, n, m):
    # Equality-constrained LP over vec(w); marginal constraints are
    # rank-deficient by one, so drop the last column constraint.
    c = d2.ravel()
    a_rows = np.zeros((n, n * m))
    for i in range(n):
        a_rows[i, i * m : (i + 1) * m] = 1.0
    a_cols = np.zeros((m - 1, n * m))
    for j in range(m - 1):
        a_cols[j, j::m] = 1.0
    a_eq = np.vstack([a_rows, a_cols])
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m - 1, 1.0 / m)])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    w = np.maximum(res.x.reshape(n, m), 0.0)
    # Rescale marginals exactly to kill solver roundoff before validation.
    w *= (1.0 / n) / np.maximum(w.sum(axis=1, keepdims=True), 1e-300)
    return w, float(np.sum(w * d2))


def geodesic_point(plan, t, cap=GEODESIC_OUTPUT_CAP):
    """Point at parameter t on the displacement interpolation of a plan.

    The interpolant ((1-t)x + t y)#w is materialized as an equal-weight
    cloud by replicating each nonzero plan entry in proportion to its weight
    (entries of an exact plan are integer multiples of 1/lcm(n, m)).

    Raises:
        TOutOfRange: t outside [0, 1].
        SizeCapExceeded: replication would exceed the output cap.
    """
    if not 0.0 <= t <= 1.0:
        raise TOutOfRange(f"t = {t} outside [0, 1]")
    n, m = plan.source.n, plan.target.n
    lcm = math.lcm(n, m)
    if lcm > cap:
        raise SizeCapExceeded(
            f"geodesic replication needs {lcm} particles (cap {cap})",
            required=lcm,
            cap=cap,
        )
    rows, cols = np.nonzero(plan.weights > _MARGINAL_TOL)
    counts = np.rint(plan.weights[rows, cols] * lcm).astype(int)
    if np.max(np.abs(counts - plan.weights[rows, cols] * lcm)) > 1e-6:
        raise ValueError("plan weights are not multiples of 1/lcm(n, m)")
    pts = (1.0 - t) * plan.source.points[rows] + t * plan.target.points[cols]
    out = np.repeat(pts, counts, axis=0)
    tag = plan.source.seed_tag or plan.target.seed_tag
    return ParticleCloud(out, seed_tag=tag)


def mean_squared_gradient_norm(cloud, g):
    """L2(mu) norm of a gradient field: sqrt((1/n) sum ||grad(x_i)||^2)."""
    grads = np.stack([np.asarray(g.grad(x), dtype=np.float64) for x in cloud.points])
    return float(np.sqrt(np.mean(np.sum(grads**2, axis=1))))


def save_csv(cloud, path, header=False):
    """Write one row per particle, d numeric columns."""
    hdr = ",".join(f"x{i}" for i in range(cloud.dim)) if header else ""
    np.savetxt(path, cloud.points, delimiter=",", header=hdr, comments="")


def load_csv(path, header=False):
    """Read a cloud written by save_csv (or any d-column numeric CSV)."""
    pts = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return ParticleCloud(pts)
