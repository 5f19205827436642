"""Desk-scale experiment runners: deconvolution, MMD flows, chart emission.

Every runner is driven by an `ExperimentConfig`, seeds all randomness from
the config, and writes CSV traces whose bytes depend only on the config
(wall-clock columns excepted, where present).
"""

import csv
import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from .cloud import ParticleCloud, save_csv
from .errors import MissingColumn
from .frank_wolfe import FWConfig, run_frank_wolfe
from .functionals import EntropicDeconv, MMDSquared
from .moreau import grad_rows
from .registry import make_kernel
from .svg import line_chart

_EXPERIMENTS = ("deconv", "mmd-flow", "fw", "trust-region")


@dataclass(frozen=True)
class ExperimentConfig:
    """Bag of experiment knobs; seeds are mandatory."""

    experiment: str
    seed: int = None
    dim: int = 2
    particles: int = 50
    sigma2: float = 0.25
    eps: float = 1e-3
    k_max: int = 20
    delta_cap: float = 0.5
    features: int = 64
    feature_scale: float = 0.4
    shift: float = 2.0
    baseline_step: float = None
    sinkhorn_tol: float = 1e-9
    snap_every: int = 0
    out: str = "trace.csv"
    baseline_out: str = "baseline.csv"
    snapshot_prefix: str = "cloud"

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.seed is None:
            raise ValueError("a seed is mandatory; wall-clock seeding is not allowed")
        if self.particles < 1 or self.dim < 1:
            raise ValueError("particles and dim must be positive")

    @classmethod
    def from_mapping(cls, mapping):
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - fields
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)


def make_mixture_observations(n, sigma2, rng, dim=2, modes=4, radius=1.2, mode_std=0.1):
    """Draw latent points from a circular Gaussian mixture, then add noise.

    Modes sit equally spaced on a radius-`radius` circle in the first two
    coordinates.  Returns (observations, latents) as arrays of shape (n, dim).
    """
    angles = 2.0 * math.pi * np.arange(modes) / modes
    centers = np.zeros((modes, dim))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, min(1, dim - 1)] = radius * np.sin(angles)
    which = rng.integers(0, modes, size=n)
    latent = centers[which] + mode_std * rng.standard_normal((n, dim))
    obs = latent + math.sqrt(sigma2) * rng.standard_normal((n, dim))
    return obs, latent


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    format(float(v), ".17g") if isinstance(v, float) else str(v)
                    for v in row
                )
                + "\n"
            )


def run_deconv(cfg):
    """Deconvolve a noisy mixture sample; returns (cloud, trace, functional).

    The iterate starts at the observations themselves.  Writes the outer-loop
    trace to cfg.out and, when cfg.snap_every > 0, cloud snapshots to
    `{snapshot_prefix}_iterNNNN.csv`.
    """
    rng = np.random.default_rng(cfg.seed)
    obs, _ = make_mixture_observations(cfg.particles, cfg.sigma2, rng, dim=cfg.dim)
    data = ParticleCloud(obs, seed_tag=cfg.seed)
    J = EntropicDeconv(cfg.sigma2, data, tol=cfg.sinkhorn_tol)
    smoothness = J.derivative_oracle(data, 1.0).smoothness
    fw_cfg = FWConfig.from_schedule(
        tau=1.0,
        theta=1.0,
        big_t=1.0,
        alpha=1.0,
        delta1=cfg.delta_cap,
        delta2=cfg.delta_cap,
        smoothness=smoothness,
        eps=cfg.eps,
        k_max=cfg.k_max,
        seed=cfg.seed,
    )

    def snapshot(i, cloud):
        if cfg.snap_every > 0 and i % cfg.snap_every == 0:
            save_csv(cloud, f"{cfg.snapshot_prefix}_iter{i:04d}.csv")

    mu, trace = run_frank_wolfe(J, data, fw_cfg, on_iterate=snapshot)
    trace.to_csv(cfg.out)
    return mu, trace, J


def mmd_gradient_flow(J, mu0, step, grad_budget, val_fn=None):
    """Explicit-Euler particle descent on the witness gradient.

    Moves every atom by -step * witness gradient each iteration until the
    cumulative gradient-evaluation count reaches grad_budget.  Returns
    (final cloud, rows) with rows of (grad_evals, objective, validation).
    """
    mu = mu0
    rows = []
    grad_evals = 0
    while grad_evals < grad_budget:
        model = J.derivative_oracle(mu, 1e-9)
        g = grad_rows(model, mu.points)
        grad_evals += mu.n
        mu = ParticleCloud(mu.points - step * g, seed_tag=mu.seed_tag)
        val = val_fn(mu) if val_fn is not None else math.nan
        rows.append((grad_evals, J.value(mu), val))
    return mu, rows


def run_mmd_flow(cfg):
    """Student-teacher matching under a random-feature kernel.

    Teacher atoms are standard-normal draws; the student starts from an
    offset normal cloud of equal size.  The outer loop and the explicit-Euler
    baseline are both traced by cumulative gradient evaluations, with a
    validation column measured against a held-out teacher batch.  Writes
    cfg.out (outer loop) and cfg.baseline_out (baseline); returns a dict of
    both row lists and final clouds.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.particles, cfg.dim
    kernel = make_kernel(
        "random-feature",
        table=cfg.feature_scale * rng.standard_normal((cfg.features, d)),
    )

    teacher = ParticleCloud(rng.standard_normal((n, d)), seed_tag=cfg.seed)
    held_out = ParticleCloud(rng.standard_normal((n, d)), seed_tag=cfg.seed)
    student0 = ParticleCloud(
        rng.standard_normal((n, d)) + cfg.shift / math.sqrt(d), seed_tag=cfg.seed
    )
    # The uniform offset puts the student a W2 distance of about cfg.shift
    # from the teacher, which the outer loop then has to transport back.

    J = MMDSquared(kernel, teacher)
    J_val = MMDSquared(kernel, held_out)
    smoothness = J.derivative_oracle(student0, 1.0).smoothness

    fw_cfg = FWConfig.from_schedule(
        tau=1.0,
        theta=1.0,
        big_t=1.0,
        alpha=1.0,
        delta1=cfg.delta_cap,
        delta2=cfg.delta_cap,
        smoothness=smoothness,
        eps=cfg.eps,
        k_max=cfg.k_max,
        seed=cfg.seed,
    )

    fw_rows = []

    def record(i, cloud):
        fw_rows.append((0, J.value(cloud), J_val.value(cloud)))

    mu, trace = run_frank_wolfe(J, student0, fw_cfg, on_iterate=record)
    cumulative = np.cumsum(trace.samples)
    fw_rows = [
        (int(c), obj, val)
        for c, (_, obj, val) in zip(cumulative, fw_rows)
    ]
    header = ("grad_evals", "J", "val")
    _write_rows(cfg.out, header, fw_rows)

    step = cfg.baseline_step
    if step is None:
        step = 0.05 / smoothness
    budget = int(cumulative[-1]) if len(cumulative) else n * cfg.k_max
    base_mu, base_rows = mmd_gradient_flow(
        J, student0, step, budget, val_fn=J_val.value
    )
    _write_rows(cfg.baseline_out, header, base_rows)

    return {
        "fw_rows": fw_rows,
        "baseline_rows": base_rows,
        "fw_cloud": mu,
        "baseline_cloud": base_mu,
        "trace": trace,
        "student0": student0,
        "teacher": teacher,
        "held_out": held_out,
        "objective": J,
        "validation": J_val,
    }


def read_trace(path):
    """Read a trace CSV into {column: list of floats}."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingColumn("trace file has no header")
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                cols[name].append(float(row[name]))
    return cols


def emit_plot(trace_paths, out_path, x_column, y_column, log_y=False, title=""):
    """Render one curve per trace CSV into a deterministic SVG file.

    Raises MissingColumn when a trace lacks the requested columns.  Legend
    labels are the trace file basenames, in input order.
    """
    series = []
    for path in trace_paths:
        cols = read_trace(path)
        for name in (x_column, y_column):
            if name not in cols:
                raise MissingColumn(f"{path} has no column {name!r}")
        label = os.path.splitext(os.path.basename(path))[0]
        series.append((label, cols[x_column], cols[y_column]))
    chart = line_chart(
        series, title=title, xlabel=x_column, ylabel=y_column, log_y=log_y
    )
    with open(out_path, "w") as fh:
        fh.write(chart)
    return out_path
