"""Outer loop: conditional-gradient descent over particle clouds.

Each iteration asks the functional for a witness model, estimates the
witness-gradient norm s over the current cloud, stops once s falls to the
threshold r, and otherwise moves the cloud by a trust-region step of radius

    delta = min(beta1, beta2 * s, beta3 * s^(1/alpha))

with inner tolerance zeta = delta * eps_tilde.  The schedule constants come
from the target accuracy via `FWConfig.from_schedule`.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cloud import ParticleCloud, mean_squared_gradient_norm
from .dual_solvers import trust_region_step
from .errors import DeltaTooLarge
from .moreau import SmoothObjective, grad_rows


@dataclass(frozen=True)
class FWConfig:
    """Step-size multipliers, stopping threshold, and error budgets."""

    beta1: float
    beta2: float
    beta3: float
    r: float
    eps_hat: float
    eps_bar: float
    eps_tilde: float
    k_max: int = 500
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if min(self.beta1, self.beta2, self.beta3) <= 0:
            raise ValueError("step multipliers must be positive")
        if min(self.eps_hat, self.eps_bar, self.eps_tilde) <= 0:
            raise ValueError("error budgets must be positive")
        if self.r < 0:
            raise ValueError("stopping threshold must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    @classmethod
    def from_schedule(
        cls,
        tau,
        theta,
        big_t,
        alpha,
        delta1,
        delta2,
        smoothness,
        eps,
        k_max=500,
        seed=0,
    ):
        """Derive the multipliers and budgets from problem constants.

        Args:
            tau, theta: gradient-domination constants of the functional
                (tau * (J - J*)^theta <= gradient norm).
            big_t, alpha: Holder constants of the functional's curvature.
            delta1, delta2: locality radii capping the first multiplier.
            smoothness: witness gradient Lipschitz bound L.
            eps: target objective accuracy.
        """
        alpha_star = (1.0 + alpha) / alpha
        r = 0.5 * tau * eps**theta
        return cls(
            beta1=min(delta1, delta2),
            beta2=alpha / (4.0 * smoothness),
            beta3=(1.0 - alpha / 2.0) ** (1.0 / alpha) * big_t ** (-1.0 / alpha),
            r=r,
            eps_hat=r / (2.0 * alpha_star),
            eps_bar=alpha * r / 2.0,
            eps_tilde=r / (4.0 * alpha_star),
            k_max=k_max,
            alpha=alpha,
            seed=seed,
        )


_COLUMNS = ("iter", "J", "s", "delta", "zeta", "samples", "wall_ms")


@dataclass
class FWTrace:
    """Per-iteration records of the outer loop."""

    iters: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    s: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    events: list = field(default_factory=list)
    status: str = "budget-exhausted"

    def append(self, i, objective, s, delta, zeta, samples, wall_ms):
        self.iters.append(i)
        self.objective.append(objective)
        self.s.append(s)
        self.delta.append(delta)
        self.zeta.append(zeta)
        self.samples.append(samples)
        self.wall_ms.append(wall_ms)

    def __len__(self):
        return len(self.iters)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(_COLUMNS) + "\n")
            for row in zip(
                self.iters,
                self.objective,
                self.s,
                self.delta,
                self.zeta,
                self.samples,
                self.wall_ms,
            ):
                i, j, s, d, z, m, w = row
                fh.write(
                    f"{i},{j:.17g},{s:.17g},{d:.17g},{z:.17g},{m},{w:.3f}\n"
                )


def counted_model(model, counter):
    """Wrap a witness model so gradient-row evaluations accumulate in counter["rows"]."""

    def grad(x):
        counter["rows"] += 1
        return model.grad(x)

    grad_many = None
    if model.grad_many is not None:

        def grad_many(x):
            counter["rows"] += np.atleast_2d(np.asarray(x)).shape[0]
            return model.grad_many(x)

    return SmoothObjective(
        eval=model.eval,
        grad=grad,
        smoothness=model.smoothness,
        semiconvexity=model.semiconvexity,
        eval_many=model.eval_many,
        grad_many=grad_many,
        holder_alpha=model.holder_alpha,
        holder_T=model.holder_T,
    )


def estimate_gradient_norm(phi, mu, eps_bar, rng, full_batch_max=4096, z_score=2.33):
    """One-sided estimate s of the witness-gradient norm over mu.

    Guarantees (norm - eps_bar) <= s <= norm: exactly for clouds up to
    `full_batch_max` atoms (full-batch evaluation), and with calibrated
    confidence on the subsampled path, which grows its sample until the
    z-scored standard error fits inside the band and then backs the
    mean-of-squares off by that margin.
    """
    if eps_bar <= 0:
        raise ValueError("eps_bar must be positive")
    n = mu.n
    if n <= full_batch_max:
        return mean_squared_gradient_norm(mu, phi)

    batch = 512
    count = 0
    total = 0.0
    total_sq = 0.0
    while True:
        idx = rng.integers(0, n, size=batch)
        g = grad_rows(phi, mu.points[idx])
        sq = np.sum(g**2, axis=1)
        count += batch
        total += float(np.sum(sq))
        total_sq += float(np.sum(sq**2))
        m_hat = total / count
        var = max(total_sq / count - m_hat**2, 0.0)
        se = math.sqrt(var / count)
        if z_score * se <= 0.5 * eps_bar * max(math.sqrt(m_hat), eps_bar):
            break
        if count >= 4 * n:
            break
        batch = min(batch * 2, 4 * n - count)
    return math.sqrt(max(m_hat - z_score * se, 0.0))


def run_frank_wolfe(
    J, mu0, cfg, chained=False, wall_budget_s=None, gamma=0.1, on_iterate=None
):
    """Run the outer loop; returns (final cloud, trace).

    Per iteration: witness model at budget eps_hat, gradient-norm estimate
    s within eps_bar, stop when s <= cfg.r, otherwise a trust-region step of
    the scheduled radius with inner tolerance zeta = delta * eps_tilde.  A
    rejected radius is halved up to 8 times (each retry logged in
    trace.events) before aborting.

    Args:
        chained: resample the iterate through its prox lineage instead of
            keeping the one-image-per-atom materialization.
        wall_budget_s: optional wall-clock budget; the loop stops cleanly
            (status "budget-exhausted") once exceeded.
        on_iterate: optional callback invoked as on_iterate(i, cloud) after
            each recorded iteration with the post-step cloud.
    """
    mu = mu0
    rng = np.random.default_rng(cfg.seed)
    trace = FWTrace()
    t_start = time.perf_counter()

    for i in range(1, cfg.k_max + 1):
        t0 = time.perf_counter()
        counter = {"rows": 0}
        model = counted_model(J.derivative_oracle(mu, cfg.eps_hat), counter)
        s = estimate_gradient_norm(model, mu, cfg.eps_bar, rng)
        obj = J.value(mu)
        delta = min(cfg.beta1, cfg.beta2 * s, cfg.beta3 * s ** (1.0 / cfg.alpha))
        zeta = delta * cfg.eps_tilde

        if s <= cfg.r:
            wall = (time.perf_counter() - t0) * 1000.0
            trace.append(i, obj, s, delta, zeta, counter["rows"], wall)
            trace.status = "converged"
            if on_iterate is not None:
                on_iterate(i, mu)
            break

        cur_delta, cur_zeta = delta, zeta
        for attempt in range(9):
            try:
                sampler, _ = trust_region_step(
                    model, mu, cur_delta, cur_zeta, gamma, rng
                )
                break
            except DeltaTooLarge as exc:
                if attempt == 8:
                    raise
                trace.events.append(
                    f"iter {i}: delta {cur_delta:.6g} rejected ({exc}); halving"
                )
                cur_delta *= 0.5
                cur_zeta = cur_delta * cfg.eps_tilde

        if chained:
            idx = rng.integers(0, sampler.images.shape[0], size=mu0.n)
            mu = ParticleCloud(sampler.images[idx], seed_tag=mu0.seed_tag)
        else:
            mu = sampler.target_cloud()

        wall = (time.perf_counter() - t0) * 1000.0
        trace.append(i, obj, s, delta, zeta, counter["rows"], wall)
        if on_iterate is not None:
            on_iterate(i, mu)
        if wall_budget_s is not None and time.perf_counter() - t_start > wall_budget_s:
            break

    return mu, trace


@dataclass(frozen=True)
class ProbeReport:
    """Advisory curvature fit; never gates execution."""

    alpha_hat: float
    t_hat: float
    degenerate: bool


def smoothness_probe(J, mu, trials, rng):
    """Fit the first-order remainder of J against transport distance.

    Perturbs the cloud along random displacement fields at random small
    scales, regresses log |J(nu) - J(mu) - <witness grads, displacement>|
    on log W, and reports (alpha_hat, T_hat) from the fitted power
    remainder T * W^(1 + alpha).
    """
    if trials < 10:
        raise ValueError("need at least 10 trials for a stable fit")
    base = J.value(mu)
    model = J.derivative_oracle(mu, 1e-9)
    grads = grad_rows(model, mu.points)

    ws, rems = [], []
    for _ in range(trials):
        direction = rng.standard_normal(mu.points.shape)
        direction /= math.sqrt(float(np.mean(np.sum(direction**2, axis=1))))
        scale = 10.0 ** rng.uniform(-2.5, -0.5)
        nu = ParticleCloud(mu.points + scale * direction, seed_tag=mu.seed_tag)
        linear = float(np.mean(np.sum(grads * (scale * direction), axis=1)))
        rem = abs(J.value(nu) - base - linear)
        ws.append(scale)
        rems.append(rem)

    ws = np.array(ws)
    rems = np.array(rems)
    keep = rems > 1e-13 * (1.0 + abs(base))
    if int(np.sum(keep)) < 3:
        return ProbeReport(alpha_hat=math.nan, t_hat=0.0, degenerate=True)
    slope, intercept = np.polyfit(np.log(ws[keep]), np.log(rems[keep]), 1)
    return ProbeReport(
        alpha_hat=float(slope - 1.0), t_hat=float(math.exp(intercept)), degenerate=False
    )
