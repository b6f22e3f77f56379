"""Noisy gradient descent with weight decay, and trajectory recording.

One update applies, per particle,

    u     <- u     - eta * du     + sqrt(2 lam eta) * xi_u
    theta <- theta - eta * dtheta + sqrt(2 lam eta) * xi_theta

with (du, dtheta) the mean-field-scaled gradients and xi standard normal.
The noise scale sqrt(2 lam eta) makes the chain an Euler-Maruyama
discretization of the diffusion the objective's energy functional descends;
the alternative reading of the noise parameter (variance sqrt(2 eta) instead
of 2 eta) stays available behind ``noise_variance_literal`` for sensitivity
checks.  All noise comes from per-step counter-derived streams, so a
trajectory is a pure function of (hyperparameters, dataset, seed).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernel, metrics, ntk_flow
from .model import (Ensemble, HyperParams, forward_all, grads, init_ensemble,
                    loss as model_loss, objective, regularizer)
from .rng import STREAM_NOISE, STREAM_REFERENCE, stream

DIVERGENCE_LIMIT = 1e8

TRAJECTORY_COLUMNS = ("step", "t", "loss", "objective", "kl_surrogate",
                      "w2_estimate", "kernel_drift_inf", "residual_gap",
                      "energy", "reg_drift_norm")


class DivergedError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"run diverged at step {step}: {reason}")
        self.step = step


@dataclass
class TrajectoryLog:
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and row["step"] <= self.rows[-1]["step"]:
            raise ValueError("step indices must be strictly increasing")
        self.rows.append({c: row[c] for c in TRAJECTORY_COLUMNS})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path, header_comments=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_comments:
                fh.write(f"# {line}\n")
            fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(_fmt(r[c]) for c in TRAJECTORY_COLUMNS)
                         + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def noise_scale(hp: HyperParams, literal: bool = False) -> float:
    if hp.lam == 0:
        return 0.0
    if literal:
        return math.sqrt(hp.lam) * (2.0 * hp.eta) ** 0.25
    return math.sqrt(2.0 * hp.lam * hp.eta)


def step(e: Ensemble, hp: HyperParams, ds, step_index: Optional[int] = None,
         scaling: str = "meanfield",
         noise_variance_literal: bool = False) -> Ensemble:
    """One noisy-GD update; the noise stream is addressed by step index."""
    if step_index is None:
        step_index = e.generation
    du, dth = grads(e, hp, ds, scaling=scaling)
    du_max = float(np.max(np.abs(du)))
    dth_max = float(np.max(np.abs(dth)))
    if not (math.isfinite(du_max) and math.isfinite(dth_max)):
        raise DivergedError(step_index, "non-finite gradient")
    us = e.us - hp.eta * du
    thetas = e.thetas - hp.eta * dth
    scale = noise_scale(hp, noise_variance_literal)
    if scale > 0.0:
        rng = stream(hp.seed, STREAM_NOISE, step_index)
        xi = rng.standard_normal((e.m, e.d + 1))
        thetas += scale * xi[:, : e.d]
        us += scale * xi[:, e.d]
    us_max = float(np.max(np.abs(us)))
    th_max = float(np.max(np.abs(thetas)))
    if not (us_max < DIVERGENCE_LIMIT and th_max < DIVERGENCE_LIMIT):
        raise DivergedError(step_index, "parameter magnitude exceeded 1e8")
    return Ensemble(thetas=thetas, us=us, generation=step_index + 1)


class LiteRecorder:
    """Loss and objective only; the distribution-level columns stay NaN."""

    def __init__(self, hp: HyperParams, ds, e0: Ensemble):
        self.hp = hp
        self.ds = ds

    def row(self, step_index: int, e: Ensemble) -> dict:
        return {
            "step": step_index,
            "t": step_index * self.hp.eta,
            "loss": model_loss(e, self.hp, self.ds),
            "objective": objective(e, self.hp, self.ds),
            "kl_surrogate": math.nan,
            "w2_estimate": math.nan,
            "kernel_drift_inf": math.nan,
            "residual_gap": math.nan,
            "energy": math.nan,
            "reg_drift_norm": math.nan,
        }


class FullRecorder:
    """All trajectory columns.

    Holds the init-time Gram matrix, the linearized flow built from it, and a
    fixed fresh init sample (one per run) that every W2 reading is paired
    against, so the time series are comparable across steps.
    """

    def __init__(self, hp: HyperParams, ds, e0: Ensemble,
                 n_projections: int = 64):
        self.hp = hp
        self.ds = ds
        self.n_projections = n_projections
        self.h0 = kernel.gram_h(e0, hp, ds, source="init")
        self.flow = ntk_flow.NtkFlow(h0=self.h0, y=ds.y, alpha=hp.alpha)
        rng = stream(hp.seed, STREAM_REFERENCE)
        scales = np.concatenate([np.full(hp.d, hp.sigma_theta), [hp.sigma_u]])
        self.reference = rng.standard_normal((e0.m, hp.d + 1)) * scales

    def row(self, step_index: int, e: Ensemble) -> dict:
        t = step_index * self.hp.eta
        cur_loss = model_loss(e, self.hp, self.ds)
        kl = metrics.kl_gaussian_surrogate(e, self.hp)
        h_t = kernel.gram_h(e, self.hp, self.ds, source=f"step {step_index}")
        f_particle = forward_all(e, self.hp, self.ds.x)
        f_lin = ntk_flow.closed_form(self.flow, t)
        return {
            "step": step_index,
            "t": t,
            "loss": cur_loss,
            "objective": cur_loss + regularizer(e, self.hp),
            "kl_surrogate": kl,
            "w2_estimate": metrics.w2_sliced(e.points(), self.reference,
                                             self.n_projections,
                                             seed=self.hp.seed),
            "kernel_drift_inf": kernel.kernel_drift(h_t, self.h0)["inf_inf"],
            "residual_gap": ntk_flow.residual_gap(f_particle, f_lin),
            "energy": cur_loss + self.hp.lam * kl,
            "reg_drift_norm": float(np.max(np.abs(
                kernel.reg_drift(e, self.hp, self.ds)))),
        }


@dataclass
class TrainResult:
    log: TrajectoryLog
    final: Ensemble
    recorder: object


def train(hp: HyperParams, ds, steps: int, record_every: int = 1,
          recorder_factory: Callable = FullRecorder,
          scaling: str = "meanfield",
          noise_variance_literal: bool = False) -> TrainResult:
    """Run `steps` updates from a fresh init, recording at the given cadence
    (always including step 0 and the final step)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    e = init_ensemble(hp)
    recorder = recorder_factory(hp, ds, e)
    log = TrajectoryLog()
    log.append(recorder.row(0, e))
    for k in range(steps):
        e = step(e, hp, ds, step_index=k, scaling=scaling,
                 noise_variance_literal=noise_variance_literal)
        if (k + 1) % record_every == 0 or k + 1 == steps:
            log.append(recorder.row(k + 1, e))
    return TrainResult(log=log, final=e, recorder=recorder)


@dataclass(frozen=True)
class StationarityReport:
    plateau: float
    entry_step: Optional[int]
    tail_records: int


def stationarity_diagnostic(log: TrajectoryLog) -> StationarityReport:
    """Plateau level (median of the last 10% of loss records) and the first
    recorded step whose loss enters twice the plateau."""
    if len(log) < 20:
        raise ValueError("diagnostic needs at least 20 records")
    losses = log.column("loss")
    steps_col = log.column("step")
    tail = max(1, int(math.ceil(0.1 * len(losses))))
    plateau = float(np.median(losses[-tail:]))
    entry = None
    inside = np.where(losses <= 2.0 * plateau)[0]
    if inside.size:
        entry = int(steps_col[inside[0]])
    return StationarityReport(plateau=plateau, entry_step=entry,
                              tail_records=tail)
