"""Kernel, MMD, entropic-smoothing, and potential-energy tests."""

import math

import numpy as np
import pytest

from wfw.cloud import ParticleCloud
from wfw.functionals import (
    EntropicDeconv,
    GaussianKernel,
    InverseMultiquadricKernel,
    MMDSquared,
    PotentialInteraction,
    RandomFeatureKernel,
    sinkhorn_dual,
)
from wfw.moreau import eval_rows, grad_rows
from wfw.registry import (
    make_kernel,
    make_objective,
    make_pair,
    pair_quadratic,
    quadratic,
)


def _kernels():
    table = 0.5 * np.random.default_rng(0).standard_normal((16, 2))
    return [
        GaussianKernel(0.8),
        InverseMultiquadricKernel(1.2, 0.5),
        RandomFeatureKernel(table),
    ]


class TestKernels:
    @pytest.mark.parametrize("kernel", _kernels(), ids=lambda k: k.name)
    def test_symmetry(self, kernel):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x, y = rng.normal(size=(2, 2))
            assert kernel.eval(x, y) == pytest.approx(kernel.eval(y, x), rel=1e-12)

    @pytest.mark.parametrize("kernel", _kernels(), ids=lambda k: k.name)
    def test_gram_psd(self, kernel):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(12, 2))
        gram = kernel.gram(pts, pts)
        np.testing.assert_allclose(gram, gram.T, atol=1e-12)
        eigs = np.linalg.eigvalsh(gram)
        assert eigs.min() >= -1e-9

    @pytest.mark.parametrize("kernel", _kernels(), ids=lambda k: k.name)
    def test_grad_matches_finite_differences(self, kernel):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=(2, 2))
        g = kernel.grad_x(x, y)
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (kernel.eval(x + e, y) - kernel.eval(x - e, y)) / (2 * h)
            assert g[i] == pytest.approx(fd, abs=1e-5)

    @pytest.mark.parametrize("kernel", _kernels(), ids=lambda k: k.name)
    def test_grad_lipschitz_bound_on_samples(self, kernel):
        """|grad_x k(x,y) - grad_x k(x',y)| <= L |x-x'| on random pairs."""
        rng = np.random.default_rng(4)
        for _ in range(40):
            y = rng.normal(size=2)
            x1 = rng.normal(size=2)
            x2 = x1 + 0.05 * rng.normal(size=2)
            lhs = np.linalg.norm(kernel.grad_x(x1, y) - kernel.grad_x(x2, y))
            assert lhs <= kernel.grad_lipschitz * np.linalg.norm(x1 - x2) * (1 + 1e-6)

    def test_gaussian_peak_and_scale(self):
        k = GaussianKernel(2.0)
        x = np.array([1.0, 1.0])
        assert k.eval(x, x) == pytest.approx(1.0)
        assert k.grad_lipschitz == pytest.approx(1.0 / 4.0)

    def test_random_feature_matches_feature_dot(self):
        table = 0.4 * np.random.default_rng(5).standard_normal((8, 3))
        k = RandomFeatureKernel(table)
        x, y = np.random.default_rng(6).normal(size=(2, 3))
        expected = float(np.mean(np.tanh(table @ x) * np.tanh(table @ y)))
        assert k.eval(x, y) == pytest.approx(expected, rel=1e-12)


class TestMMDSquared:
    def test_value_is_v_statistic(self):
        rng = np.random.default_rng(7)
        X = ParticleCloud(rng.normal(size=(6, 2)))
        Y = ParticleCloud(rng.normal(size=(5, 2)))
        k = GaussianKernel(1.0)
        J = MMDSquared(k, Y)
        kxx = k.gram(X.points, X.points).mean()
        kyy = k.gram(Y.points, Y.points).mean()
        kxy = k.gram(X.points, Y.points).mean()
        assert J.value(X) == pytest.approx(kxx + kyy - 2 * kxy, rel=1e-12)

    def test_zero_at_target(self):
        rng = np.random.default_rng(8)
        Y = ParticleCloud(rng.normal(size=(7, 2)))
        J = MMDSquared(GaussianKernel(1.0), Y)
        assert J.value(Y) == pytest.approx(0.0, abs=1e-12)
        assert J.value(ParticleCloud(Y.points + 1.0)) > 0.0

    @pytest.mark.parametrize("kernel", _kernels(), ids=lambda k: k.name)
    def test_first_order_expansion(self, kernel):
        """J(mu_t) - J(mu) - t <witness grads, V> vanishes like t^2."""
        rng = np.random.default_rng(9)
        X = ParticleCloud(rng.normal(size=(8, 2)))
        Y = ParticleCloud(rng.normal(size=(6, 2)) + 0.4)
        J = MMDSquared(kernel, Y)
        model = J.derivative_oracle(X, 1e-9)
        V = rng.normal(size=X.points.shape)
        base = J.value(X)
        lin = float(np.mean(np.sum(grad_rows(model, X.points) * V, axis=1)))
        rems = []
        for t in (1e-3, 5e-4, 2.5e-4):
            rem = abs(J.value(ParticleCloud(X.points + t * V)) - base - t * lin)
            rems.append(rem / t)
        # remainder/t itself must shrink linearly with t
        assert rems[2] < rems[0] / 2.0
        assert rems[0] < 1e-2

    def test_oracle_constants(self):
        k = GaussianKernel(1.5)
        J = MMDSquared(k, ParticleCloud(np.zeros((3, 2))))
        model = J.derivative_oracle(ParticleCloud(np.ones((4, 2))), 1e-6)
        assert model.smoothness == pytest.approx(4.0 * k.grad_lipschitz)
        assert model.semiconvexity == pytest.approx(4.0 * k.grad_lipschitz)


class TestSinkhorn:
    def test_self_transport_gauge(self):
        """Transporting a point mass to itself yields zero potentials."""
        cloud = ParticleCloud(np.array([[0.7, -0.2]]))
        v = sinkhorn_dual(cloud, cloud, 0.5)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)

    def test_translation_invariance_of_marginal_convergence(self):
        """Shifting both clouds together shifts costs but not convergence."""
        rng = np.random.default_rng(10)
        a = ParticleCloud(rng.normal(size=(6, 2)))
        b = ParticleCloud(rng.normal(size=(8, 2)))
        v1 = sinkhorn_dual(a, b, 0.3)
        shift = np.array([2.0, -1.0])
        v2 = sinkhorn_dual(
            ParticleCloud(a.points + shift), ParticleCloud(b.points + shift), 0.3
        )
        np.testing.assert_allclose(v1, v2, atol=1e-6)

    def test_potential_dimensions(self):
        rng = np.random.default_rng(11)
        a = ParticleCloud(rng.normal(size=(4, 2)))
        b = ParticleCloud(rng.normal(size=(9, 2)))
        v = sinkhorn_dual(a, b, 0.25)
        assert v.shape == (9,)


class TestEntropicDeconv:
    def test_marginal_errors_are_logged_and_small(self):
        rng = np.random.default_rng(12)
        data = ParticleCloud(rng.normal(size=(10, 2)))
        J = EntropicDeconv(0.25, data, tol=1e-9)
        J.value(ParticleCloud(rng.normal(size=(10, 2))))
        assert len(J.marginal_error_log) == 1
        assert J.marginal_error_log[0] <= 1e-9

    def test_witness_evaluates_to_dual_potential_at_atoms(self):
        """At the cloud's own atoms the witness recovers the u-potentials,
        whose mean is half the gauge-balanced objective."""
        rng = np.random.default_rng(13)
        data = ParticleCloud(rng.normal(size=(9, 2)))
        mu = ParticleCloud(rng.normal(size=(7, 2)))
        J = EntropicDeconv(0.3, data)
        val = J.value(mu)
        model = J.derivative_oracle(mu, 1e-9)
        u_mean = float(np.mean(eval_rows(model, mu.points)))
        mass_term = val - 2.0 * u_mean  # -sigma^2 (mass - 1), small at tol
        assert abs(mass_term) < 1e-6

    def test_first_order_expansion(self):
        rng = np.random.default_rng(14)
        data = ParticleCloud(rng.normal(size=(8, 2)))
        mu = ParticleCloud(rng.normal(size=(8, 2)) * 0.7)
        J = EntropicDeconv(0.25, data)
        model = J.derivative_oracle(mu, 1e-9)
        V = rng.normal(size=mu.points.shape)
        base = J.value(mu)
        lin = float(np.mean(np.sum(grad_rows(model, mu.points) * V, axis=1)))
        r1 = abs(J.value(ParticleCloud(mu.points + 1e-3 * V)) - base - 1e-3 * lin) / 1e-3
        r2 = abs(J.value(ParticleCloud(mu.points + 2.5e-4 * V)) - base - 2.5e-4 * lin) / 2.5e-4
        assert r2 < r1 / 2.0

    def test_witness_curvature_within_declared_bounds(self):
        """Numerical Hessians of the witness stay in [-rho, L]."""
        rng = np.random.default_rng(15)
        data = ParticleCloud(rng.normal(size=(8, 2)) * 1.5)
        mu = ParticleCloud(rng.normal(size=(6, 2)))
        J = EntropicDeconv(0.25, data)
        model = J.derivative_oracle(mu, 1e-9)
        h = 1e-4
        for _ in range(25):
            z = rng.normal(size=2) * 1.5
            d = rng.normal(size=2)
            d /= np.linalg.norm(d)
            second = (
                model.eval(z + h * d) - 2 * model.eval(z) + model.eval(z - h * d)
            ) / h**2
            assert -model.semiconvexity - 1e-3 <= second <= model.smoothness + 1e-3

    def test_large_sigma_flattens_derivative(self):
        rng = np.random.default_rng(16)
        data = ParticleCloud(rng.normal(size=(8, 2)))
        mu = ParticleCloud(rng.normal(size=(8, 2)))
        J = EntropicDeconv(1e4, data)
        model = J.derivative_oracle(mu, 1e-9)
        g = grad_rows(model, mu.points)
        # softmax weights flatten to uniform: gradient ~ z - mean(data)
        expected = mu.points - data.points.mean(axis=0)
        np.testing.assert_allclose(g, expected, atol=1e-3)


class TestPotentialInteraction:
    def test_value_formula(self):
        rng = np.random.default_rng(17)
        pts = rng.normal(size=(5, 2))
        mu = ParticleCloud(pts)
        J = PotentialInteraction(quadratic(), pair_quadratic())
        v_term = float(np.mean(0.5 * np.sum(pts**2, axis=1)))
        w_term = 0.0
        for i in range(5):
            for j in range(5):
                w_term += 0.5 * float(np.sum((pts[i] - pts[j]) ** 2))
        w_term /= 25.0
        assert J.value(mu) == pytest.approx(v_term + w_term, rel=1e-12)

    def test_oracle_is_exact_first_variation(self):
        """phi(z) = v(z) + (2/n) sum_j w(z, x_j), checked by differencing."""
        rng = np.random.default_rng(18)
        pts = rng.normal(size=(6, 2))
        mu = ParticleCloud(pts)
        J = PotentialInteraction(quadratic(), pair_quadratic())
        model = J.derivative_oracle(mu, 1e-9)
        V = rng.normal(size=pts.shape)
        base = J.value(mu)
        lin = float(np.mean(np.sum(grad_rows(model, pts) * V, axis=1)))
        t = 1e-6
        fd = (J.value(ParticleCloud(pts + t * V)) - base) / t
        assert lin == pytest.approx(fd, abs=1e-4)

    def test_without_interaction_returns_potential_model(self):
        J = PotentialInteraction(quadratic())
        mu = ParticleCloud(np.ones((3, 2)))
        model = J.derivative_oracle(mu, 1e-9)
        assert model.smoothness == pytest.approx(1.0)
        assert J.value(mu) == pytest.approx(1.0)

    def test_constants_combine(self):
        J = PotentialInteraction(quadratic(), pair_quadratic())
        model = J.derivative_oracle(ParticleCloud(np.zeros((2, 2))), 1e-9)
        assert model.smoothness == pytest.approx(
            quadratic().smoothness + 2 * pair_quadratic().smoothness
        )


class TestRegistry:
    @pytest.mark.parametrize("name", ["kl", "f-divergence", "chi2", "tv"])
    def test_density_based_objectives_rejected(self, name):
        with pytest.raises(ValueError):
            make_objective(name)
        with pytest.raises(ValueError):
            make_pair(name)

    def test_unknown_kernel(self):
        with pytest.raises(ValueError):
            make_kernel("sobolev")

    def test_kernel_builders(self):
        assert make_kernel("gaussian", sigma=2.0).grad_lipschitz == pytest.approx(0.25)
        k = make_kernel("random-feature", dim=3, features=8, seed=4)
        assert k.gram(np.zeros((2, 3)), np.zeros((2, 3))).shape == (2, 2)

    def test_double_well_constants_cover_unit_ball(self):
        """Hessian of 0.25(|x|^2-1)^2 lies in [-rho, L] for |x| <= 2."""
        f = make_objective("double-well")
        rng = np.random.default_rng(19)
        h = 1e-4
        for _ in range(50):
            x = rng.uniform(-1.0, 1.0, size=2)
            x *= 2.0 * rng.uniform() / max(np.linalg.norm(x), 1e-9)
            d = rng.normal(size=2)
            d /= np.linalg.norm(d)
            second = (f.eval(x + h * d) - 2 * f.eval(x) + f.eval(x - h * d)) / h**2
            assert -f.semiconvexity - 1e-3 <= second <= f.smoothness + 1e-3
