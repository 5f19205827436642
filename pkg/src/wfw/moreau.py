"""Proximal machinery for the quadratic-cost inner problem.

For a semiconvex objective f and a weight lam above its semiconvexity, the
map

    prox(x) = argmin_y  f(y) + (lam/2) ||y - x||^2

is the solution of a strongly convex, smooth problem, solved here by an
accelerated gradient loop.  The dual function

    g(lam) = E_mu[ min_y f(y) + (lam/2) ||y - x||^2 ]

has derivative g'(lam) = E_mu[ (1/2) ||prox(x) - x||^2 ], the mean squared
displacement; `supergradient_hp` estimates it by averaging independent
draws, `g_value_and_grad_fullbatch` evaluates it exactly over the atoms.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import KCapExceeded, LambdaTooSmall, NonFiniteIterate

#: Default cap on the sample count a single supergradient query may draw.
K_CAP = 10**6


@dataclass(frozen=True)
class SmoothObjective:
    """A pointwise objective with declared smoothness metadata.

    Args:
        eval: x -> float.
        grad: x -> ndarray of shape (d,); must be `smoothness`-Lipschitz.
        smoothness: gradient Lipschitz bound L.
        semiconvexity: minimal rho >= 0 such that f + (rho/2)||. - x0||^2
            is convex for every center x0.
        eval_many, grad_many: optional vectorized forms taking an (n, d)
            array; used by batch code paths when present.
        holder_alpha, holder_T: optional curvature metadata consumed by the
            outer-loop schedule; never read by the prox solver itself.
    """

    eval: Callable
    grad: Callable
    smoothness: float
    semiconvexity: float
    eval_many: Optional[Callable] = None
    grad_many: Optional[Callable] = None
    holder_alpha: float = 1.0
    holder_T: Optional[float] = None

    def __post_init__(self):
        if self.semiconvexity < 0:
            raise ValueError("semiconvexity must be >= 0")
        if self.smoothness < self.semiconvexity:
            raise ValueError("smoothness bound below semiconvexity")


@dataclass(frozen=True)
class ProxResult:
    """One prox solve: approximate minimizer, its half squared displacement, work done."""

    y: np.ndarray
    theta: float
    iters: int
    grad_evals: int = 0


def grad_rows(f, x):
    """Gradient of f at every row of x, shape (n, d)."""
    if f.grad_many is not None:
        return np.asarray(f.grad_many(x), dtype=np.float64)
    return np.stack([np.asarray(f.grad(row), dtype=np.float64) for row in x])


def eval_rows(f, x):
    """f at every row of x, shape (n,)."""
    if f.eval_many is not None:
        return np.asarray(f.eval_many(x), dtype=np.float64)
    return np.array([float(f.eval(row)) for row in x], dtype=np.float64)


def agd_prox(f, x, lam, eps):
    """Approximately evaluate prox_{f/lam}(x) by accelerated gradient descent.

    The iteration budget is max(ceil(4*kappa*log(12*kappa*||grad f(x)||/eps)), 0)
    with kappa = sqrt((lam + L)/(lam - rho)); a strong-convexity certificate
    stops the loop earlier as soon as theta is provably within eps (and the
    iterate within sqrt(eps)/2) of the true prox.

    Args:
        f: SmoothObjective.
        x: center point, shape (d,).
        lam: prox weight, must exceed f.semiconvexity.
        eps: accuracy target for theta = (1/2)||y - x||^2.

    Returns:
        ProxResult with theta recomputed from the returned iterate.

    Raises:
        LambdaTooSmall: lam <= f.semiconvexity.
        NonFiniteIterate: the loop left the representable range.
    """
    x = np.asarray(x, dtype=np.float64)
    y, theta, iters, gevals = agd_prox_batch(f, x[None, :], lam, eps)
    return ProxResult(
        y=y[0], theta=float(theta[0]), iters=int(iters[0]), grad_evals=int(gevals[0])
    )


def agd_prox_batch(f, x, lam, eps):
    """Vectorized agd_prox over the rows of x (independent trajectories).

    Each row follows exactly the iteration `agd_prox` would run on it alone:
    rows are frozen individually once certified or once their own budget is
    spent.

    Returns:
        (y, theta, iters, grad_evals) with shapes ((n,d), (n,), (n,), (n,)).
    """
    if lam <= f.semiconvexity:
        raise LambdaTooSmall(
            f"lam = {lam} must exceed semiconvexity {f.semiconvexity}"
        )
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    mu_sc = lam - f.semiconvexity
    l_smooth = lam + f.smoothness
    kappa = math.sqrt(l_smooth / mu_sc)
    step = 1.0 / l_smooth
    momentum = (kappa - 1.0) / (kappa + 1.0)

    g0 = grad_rows(f, x)
    gnorm0 = np.sqrt(np.sum(g0**2, axis=1))
    grad_evals = np.ones(n, dtype=np.int64)

    budget = np.zeros(n, dtype=np.int64)
    pos = gnorm0 > 0
    if np.any(pos):
        raw = 4.0 * kappa * np.log(12.0 * kappa * gnorm0[pos] / eps)
        budget[pos] = np.maximum(np.ceil(raw), 0.0).astype(np.int64)

    y = x.copy()
    z = x.copy()  # latest gradient-step iterate per row; rows with budget 0 stay at x
    iters = np.zeros(n, dtype=np.int64)
    active = budget > 0
    d_tol = 0.5 * math.sqrt(eps)

    while np.any(active):
        idx = np.nonzero(active)[0]
        gy = grad_rows(f, y[idx])
        z_new = y[idx] - step * (gy + lam * (y[idx] - x[idx]))
        if not np.all(np.isfinite(z_new)):
            raise NonFiniteIterate("prox iterate left the finite range")
        iters[idx] += 1
        # Certificate: the prox objective a(.) = f + (lam/2)||.-x||^2 is
        # mu_sc-strongly convex, so ||z - prox(x)|| <= ||grad a(z)||/mu_sc.
        gz = grad_rows(f, z_new)
        grad_evals[idx] += 2
        resid = gz + lam * (z_new - x[idx])
        d = np.sqrt(np.sum(resid**2, axis=1)) / mu_sc
        dist = np.sqrt(np.sum((z_new - x[idx]) ** 2, axis=1))
        certified = (d * (dist + 0.5 * d) <= 0.5 * eps) & (d <= d_tol)

        y[idx] = z_new + momentum * (z_new - z[idx])
        z[idx] = z_new
        done = certified | (iters[idx] >= budget[idx])
        active[idx[done]] = False

    theta = 0.5 * np.sum((z - x) ** 2, axis=1)
    return z, theta, iters, grad_evals


def hp_sample_count(f, mu, lam, eps, delta):
    """Sample count for one high-probability supergradient query.

    Driven by the plug-in fourth moment of the gradient over the cloud's
    atoms and a Chebyshev bound at confidence delta, accuracy eps.
    """
    gap = lam - f.semiconvexity
    g = grad_rows(f, mu.points)
    m4 = float(np.mean(np.sum(g**2, axis=1) ** 2))
    if m4 == 0.0:
        return 1
    k = 64.0 * m4 / (gap**2 * min(gap**2, 1.0) * delta * eps**2)
    return max(int(math.ceil(k)), 1)


def supergradient_hp(f, mu, lam, eps, delta, rng, k_cap=K_CAP):
    """Estimate g'(lam) = E_mu[(1/2)||prox(x) - x||^2] to accuracy eps whp.

    Averages K independent prox displacements of atoms drawn i.i.d. (with
    replacement) from mu, where K comes from `hp_sample_count`.  With
    probability >= 1 - delta the estimate lies within eps / max(lam - rho, 1)
    of the true derivative.

    The K draws are realized as one multinomial over the atoms followed by a
    single deterministic prox per atom that was hit, reduced in atom-index
    order — identical to a sequential loop with the same counts, and safe to
    fan out.

    Raises:
        LambdaTooSmall; KCapExceeded (reports the required K).
    """
    if lam <= f.semiconvexity:
        raise LambdaTooSmall(
            f"lam = {lam} must exceed semiconvexity {f.semiconvexity}"
        )
    k = hp_sample_count(f, mu, lam, eps, delta)
    if k > k_cap:
        raise KCapExceeded(
            f"supergradient query needs K = {k} samples (cap {k_cap})",
            required=k,
            cap=k_cap,
        )
    counts = rng.multinomial(k, np.full(mu.n, 1.0 / mu.n))
    eps_inner = eps / (2.0 * max(lam - f.semiconvexity, 1.0))
    hit = np.nonzero(counts)[0]
    _, theta, _, _ = agd_prox_batch(f, mu.points[hit], lam, eps_inner)
    return float(np.dot(counts[hit].astype(np.float64), theta) / k)


def g_value_and_grad_fullbatch(f, mu, lam, eps):
    """Deterministic g(lam) and g'(lam) over all atoms of mu.

    One prox solve per atom at accuracy eps; returns
    (mean f(y) + lam*theta, mean theta).
    """
    y, theta, _, _ = agd_prox_batch(f, mu.points, lam, eps)
    fvals = eval_rows(f, y)
    return float(np.mean(fvals + lam * theta)), float(np.mean(theta))
