"""Objective functionals on particle clouds and their derivative oracles.

Each functional J maps a cloud to a real value and, through
`derivative_oracle`, to a smooth witness function phi whose pointwise
gradient is the first-order expansion of J along displacement of the
particles; the outer loop only ever consumes (value, witness).
"""

import math

import numpy as np
from scipy.special import logsumexp

from .errors import NonFiniteDual, SinkhornNotConverged
from .moreau import SmoothObjective

#: The witness model type handed to prox solvers; same contract as any
#: pointwise smooth objective.
GradientModel = SmoothObjective

# Peak of |tanh''|, slightly rounded up: 4 / (3 * sqrt(3)).
_TANH_CURV = 0.7699


def _sqdist(x, y):
    d2 = (
        np.sum(x**2, axis=1)[:, None]
        + np.sum(y**2, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.maximum(d2, 0.0)


class GaussianKernel:
    """k(x, y) = exp(-||x-y||^2 / (2 sigma^2)); gradient Lipschitz bound 1/sigma^2."""

    name = "gaussian"

    def __init__(self, sigma):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.grad_lipschitz = 1.0 / self.sigma**2

    def eval(self, x, y):
        return float(self.gram(np.atleast_2d(x), np.atleast_2d(y))[0, 0])

    def grad_x(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return -(x - y) / self.sigma**2 * self.eval(x, y)

    def gram(self, a, b):
        return np.exp(-_sqdist(a, b) / (2.0 * self.sigma**2))

    def mean_grad(self, a, z):
        """Rows: (1/|a|) sum_i grad_z k(a_i, z_row)."""
        k = self.gram(z, a)
        return -(z * k.mean(axis=1, keepdims=True) - (k @ a) / a.shape[0]) / self.sigma**2


class InverseMultiquadricKernel:
    """k(x, y) = (c^2 + ||x-y||^2)^(-beta); gradient Lipschitz bound 6 beta / c^(2 beta + 2)."""

    name = "imq"

    def __init__(self, c, beta):
        if c <= 0 or beta <= 0:
            raise ValueError("c and beta must be positive")
        self.c = float(c)
        self.beta = float(beta)
        self.grad_lipschitz = 6.0 * self.beta / self.c ** (2.0 * self.beta + 2.0)

    def eval(self, x, y):
        return float(self.gram(np.atleast_2d(x), np.atleast_2d(y))[0, 0])

    def grad_x(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        r2 = float(np.sum((x - y) ** 2))
        return -2.0 * self.beta * (x - y) * (self.c**2 + r2) ** (-self.beta - 1.0)

    def gram(self, a, b):
        return (self.c**2 + _sqdist(a, b)) ** (-self.beta)

    def mean_grad(self, a, z):
        g1 = (self.c**2 + _sqdist(z, a)) ** (-self.beta - 1.0)
        return -2.0 * self.beta * (
            z * g1.mean(axis=1, keepdims=True) - (g1 @ a) / a.shape[0]
        )


class RandomFeatureKernel:
    """Feature-map kernel k(x, y) = (1/B) sum_b tanh(t_b . x) tanh(t_b . y).

    `table` holds the B frozen feature directions t_b as rows; the Gram
    matrix is a Gram of feature vectors, hence positive semidefinite by
    construction.  The gradient Lipschitz bound uses the peak curvature of
    tanh and the mean squared row norm of the table.
    """

    name = "random-feature"

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] < 1:
            raise ValueError("feature table must be (B, d) with B >= 1")
        self.table = table.copy()
        self.table.setflags(write=False)
        self.grad_lipschitz = _TANH_CURV * float(np.mean(np.sum(table**2, axis=1)))

    def features(self, x):
        return np.tanh(x @ self.table.T)

    def eval(self, x, y):
        return float(self.gram(np.atleast_2d(x), np.atleast_2d(y))[0, 0])

    def grad_x(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        tx = np.tanh(self.table @ x)
        ty = np.tanh(self.table @ y)
        return self.table.T @ ((1.0 - tx**2) * ty) / self.table.shape[0]

    def gram(self, a, b):
        return self.features(a) @ self.features(b).T / self.table.shape[0]

    def mean_grad(self, a, z):
        mean_feat = self.features(a).mean(axis=0)
        u = z @ self.table.T
        s = (1.0 - np.tanh(u) ** 2) * mean_feat[None, :]
        return s @ self.table / self.table.shape[0]


class Functional:
    """Interface: value(mu) and derivative_oracle(mu, eps) -> GradientModel."""

    def value(self, mu):
        raise NotImplementedError

    def derivative_oracle(self, mu, eps):
        raise NotImplementedError


class MMDSquared(Functional):
    """Squared maximum mean discrepancy to a fixed target cloud.

    value(mu) is the V-statistic E_mm k + E_tt k - 2 E_mt k; the witness of
    `derivative_oracle` is twice the difference of mean kernel embeddings,
    the factor matching the first-order expansion of the V-statistic under
    particle displacement.
    """

    def __init__(self, kernel, target):
        self.kernel = kernel
        self.target = target
        self._target_mean = float(np.mean(kernel.gram(target.points, target.points)))

    def value(self, mu):
        x, y = mu.points, self.target.points
        return float(
            np.mean(self.kernel.gram(x, x))
            + self._target_mean
            - 2.0 * np.mean(self.kernel.gram(x, y))
        )

    def derivative_oracle(self, mu, eps):
        kernel = self.kernel
        x = mu.points
        y = self.target.points

        def eval_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            return 2.0 * (
                kernel.gram(z, x).mean(axis=1) - kernel.gram(z, y).mean(axis=1)
            )

        def grad_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            return 2.0 * (kernel.mean_grad(x, z) - kernel.mean_grad(y, z))

        lips = 4.0 * kernel.grad_lipschitz
        return GradientModel(
            eval=lambda p: float(eval_many(p)[0]),
            grad=lambda p: grad_many(p)[0],
            smoothness=lips,
            semiconvexity=lips,
            eval_many=eval_many,
            grad_many=grad_many,
        )


def _sinkhorn_potentials(x, y, sigma2, tol, max_iter):
    """Log-domain alternating dual updates for uniform marginals.

    Returns (u, v, marginal_error, iterations, coupling_mass) with the
    potentials gauged to mean(u) == mean(v).
    """
    n, m = x.shape[0], y.shape[0]
    cost = 0.5 * _sqdist(x, y)
    u = np.zeros(n)
    v = np.zeros(m)
    err = math.inf
    for it in range(1, max_iter + 1):
        v = -sigma2 * (logsumexp((u[:, None] - cost) / sigma2, axis=0) - math.log(n))
        u = -sigma2 * (logsumexp((v[None, :] - cost) / sigma2, axis=1) - math.log(m))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteDual("dual potentials left the finite range")
        log_pi = (u[:, None] + v[None, :] - cost) / sigma2 - math.log(n) - math.log(m)
        row = np.exp(logsumexp(log_pi, axis=1))
        col = np.exp(logsumexp(log_pi, axis=0))
        err = max(
            float(np.sum(np.abs(row - 1.0 / n))), float(np.sum(np.abs(col - 1.0 / m)))
        )
        if err <= tol:
            mass = float(np.exp(logsumexp(log_pi)))
            shift = 0.5 * (float(np.mean(v)) - float(np.mean(u)))
            return u + shift, v - shift, err, it, mass
    raise SinkhornNotConverged(
        f"marginal error {err} after {max_iter} iterations (tol {tol})",
        marginal_error=err,
        iterations=max_iter,
    )


def sinkhorn_dual(mu, data, sigma2, tol=1e-9, max_iter=20000):
    """Dual potential on the data side of the entropic transport between mu and data.

    Deterministic given inputs; the returned vector is gauged so the two
    potentials share their mean.

    Raises:
        SinkhornNotConverged: marginal error still above tol at max_iter.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    _, v, _, _, _ = _sinkhorn_potentials(mu.points, data.points, sigma2, tol, max_iter)
    return v


class EntropicDeconv(Functional):
    """Entropy-regularized transport cost from the iterate to a fixed data cloud.

    value(mu) is the converged dual objective mean(u) + mean(v) (with the
    coupling-mass correction, which vanishes at convergence).  The witness
    is the canonical smooth extension of the u-potential,

        phi(z) = -sigma2 * log( (1/m) sum_j exp((v_j - ||z - y_j||^2 / 2) / sigma2) ),

    whose gradient is z minus the softmax-weighted data mean.  Every solve
    appends its final marginal error to `marginal_error_log` for auditing.
    """

    def __init__(self, sigma2, data, tol=1e-9, max_iter=20000):
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        self.sigma2 = float(sigma2)
        self.data = data
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.marginal_error_log = []
        # Softmax weights always sit on the data atoms, so the weighted
        # covariance never exceeds (diam/2)^2 in any direction: a global
        # semiconvexity bound for the witness.
        d2 = _sqdist(data.points, data.points)
        diam2 = float(np.max(d2))
        self._rho = max(0.0, diam2 / (4.0 * self.sigma2) - 1.0)

    def value(self, mu):
        u, v, err, _, mass = _sinkhorn_potentials(
            mu.points, self.data.points, self.sigma2, self.tol, self.max_iter
        )
        self.marginal_error_log.append(err)
        return float(np.mean(u) + np.mean(v) - self.sigma2 * (mass - 1.0))

    def derivative_oracle(self, mu, eps):
        _, v, err, _, _ = _sinkhorn_potentials(
            mu.points, self.data.points, self.sigma2, self.tol, self.max_iter
        )
        self.marginal_error_log.append(err)
        y = self.data.points
        m = y.shape[0]
        sigma2 = self.sigma2

        def _logits(z):
            return (v[None, :] - 0.5 * _sqdist(z, y)) / sigma2

        def eval_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            return -sigma2 * (logsumexp(_logits(z), axis=1) - math.log(m))

        def grad_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            lg = _logits(z)
            w = np.exp(lg - logsumexp(lg, axis=1, keepdims=True))
            return z - w @ y

        rho = self._rho
        return GradientModel(
            eval=lambda p: float(eval_many(p)[0]),
            grad=lambda p: grad_many(p)[0],
            smoothness=max(1.0, rho),
            semiconvexity=rho,
            eval_many=eval_many,
            grad_many=grad_many,
        )


class PairPotential:
    """Symmetric interaction term w(x, y) with its gradient in the first slot."""

    def __init__(self, eval, grad_x, smoothness, semiconvexity, name=""):
        self.eval = eval
        self.grad_x = grad_x
        self.smoothness = float(smoothness)
        self.semiconvexity = float(semiconvexity)
        self.name = name


class PotentialInteraction(Functional):
    """Potential-plus-interaction energy.

    value(mu) = (1/n) sum_i v(x_i) + (1/n^2) sum_ij w(x_i, x_j); the witness
    phi(z) = v(z) + (2/n) sum_j w(z, x_j) is exact (eps is ignored and
    repeated oracle calls are identical).
    """

    def __init__(self, v, w=None):
        self.v = v
        self.w = w

    def value(self, mu):
        x = mu.points
        if self.v.eval_many is not None:
            total = float(np.mean(self.v.eval_many(x)))
        else:
            total = float(np.mean([self.v.eval(p) for p in x]))
        if self.w is not None:
            pair = np.array(
                [[self.w.eval(a, b) for b in x] for a in x], dtype=np.float64
            )
            total += float(np.mean(pair))
        return total

    def derivative_oracle(self, mu, eps):
        v, w = self.v, self.w
        atoms = mu.points

        if w is None:
            return GradientModel(
                eval=v.eval,
                grad=v.grad,
                smoothness=v.smoothness,
                semiconvexity=v.semiconvexity,
                eval_many=v.eval_many,
                grad_many=v.grad_many,
            )

        def eval_one(z):
            inter = np.mean([w.eval(z, a) for a in atoms])
            return float(v.eval(z) + 2.0 * inter)

        def grad_one(z):
            inter = np.mean([w.grad_x(z, a) for a in atoms], axis=0)
            return np.asarray(v.grad(z), dtype=np.float64) + 2.0 * inter

        def eval_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            return np.array([eval_one(row) for row in z])

        def grad_many(z):
            z = np.atleast_2d(np.asarray(z, dtype=np.float64))
            return np.stack([grad_one(row) for row in z])

        return GradientModel(
            eval=eval_one,
            grad=grad_one,
            smoothness=v.smoothness + 2.0 * w.smoothness,
            semiconvexity=v.semiconvexity + 2.0 * w.semiconvexity,
            eval_many=eval_many,
            grad_many=grad_many,
        )
