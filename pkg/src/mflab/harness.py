"""Experiment orchestration: convergence runs with bound overlays, scale
sweeps with slope fits, teacher generalization experiments, and inequality
audits.  Every artifact carries the config hash and master seed, and rerunning
a config reproduces artifacts byte for byte.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import data as data_mod
from . import dynamics, kernel, metrics, ntk_flow, svgplot, theory
from .activations import audit_constants, get as get_activation
from .config import ExperimentConfig
from .model import forward_all, init_ensemble, loss as model_loss, \
    save_ensemble
from .rng import STREAM_MC, stream

MAX_STEPS = 5_000_000


class DegenerateLabelsError(ValueError):
    pass


def _header(cfg: ExperimentConfig):
    return (f"config_hash={cfg.hash()}", f"seed={cfg.hyper.seed}")


def build_dataset(cfg: ExperimentConfig, n: Optional[int] = None,
                  seed: Optional[int] = None) -> data_mod.Dataset:
    teacher = None
    act = None
    if cfg.data.mode == "teacher_labels":
        teacher = make_teacher(cfg)
        act = get_activation(cfg.activation)
    return data_mod.make_synthetic(
        n=cfg.hyper.n if n is None else n,
        d=cfg.hyper.d,
        seed=cfg.data.seed if seed is None else seed,
        mode=cfg.data.mode,
        distinct=cfg.data.distinct,
        teacher=teacher,
        act=act)


def make_teacher(cfg: ExperimentConfig) -> data_mod.GaussianTeacher:
    return data_mod.GaussianTeacher(
        mean_theta=np.array(cfg.teacher.mean_theta, dtype=np.float64),
        mean_u=cfg.teacher.mean_u,
        sigma_theta=cfg.hyper.sigma_theta,
        sigma_u=cfg.hyper.sigma_u)


def resolve_steps(cfg: ExperimentConfig, lambda0_ref: float,
                  alpha: Optional[float] = None) -> int:
    """Explicit step count, or the count reaching the fixed effective horizon
    time_constants / (alpha^2 lambda0^2)."""
    if cfg.schedule.steps is not None:
        return cfg.schedule.steps
    if alpha is None:
        alpha = cfg.hyper.alpha
    tau = cfg.schedule.time_constants / (alpha ** 2 * lambda0_ref ** 2)
    steps = int(math.ceil(tau / cfg.eta_for(alpha)))
    if steps > MAX_STEPS:
        raise RuntimeError(
            f"horizon needs {steps} steps (> {MAX_STEPS}); raise hyper.eta0 "
            "or lower schedule.time_constants")
    return max(steps, 1)


def reference_lambda0(cfg: ExperimentConfig, ds) -> float:
    """lambda0 measured on the master-seed init ensemble; shared by every
    cell of a sweep so only the scale factor varies."""
    hp = cfg.hyper_for()
    h0 = kernel.gram_h(init_ensemble(hp), hp, ds, source="init")
    return kernel.lambda0(h0)


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

@dataclass
class TrainReport:
    cfg: ExperimentConfig
    log: dynamics.TrajectoryLog
    lam_min: float
    lambda0: float
    l0: float
    constants: theory.TheoryConstants
    condition_holds: bool
    loss_bound_curve: np.ndarray
    kl_bound_value: float
    bound_respected: Optional[bool]
    bound_margin: Optional[float]
    energy_max_increase: float
    final: object = field(repr=False, default=None)

    def summary(self) -> dict:
        return {
            "lambda_min": self.lam_min,
            "lambda0": self.lambda0,
            "l0": self.l0,
            "alpha": self.cfg.hyper.alpha,
            "alpha_threshold": self.constants.alpha_min,
            "condition_holds": self.condition_holds,
            "kl_bound": self.kl_bound_value,
            "loss_floor": theory.loss_floor(self.cfg.hyper.alpha,
                                            self.cfg.hyper.lam,
                                            self.lambda0, self.constants.a1),
            "bound_respected": self.bound_respected,
            "bound_margin": self.bound_margin,
            "energy_max_increase": self.energy_max_increase,
            "records": len(self.log),
        }


def run_train(cfg: ExperimentConfig, out: Optional[str] = None) -> TrainReport:
    ds = build_dataset(cfg)
    hp = cfg.hyper_for()
    h0 = kernel.gram_h(init_ensemble(hp), hp, ds, source="init")
    lam_min = kernel.min_eigenvalue(h0)
    lambda0 = kernel.lambda0(h0)
    steps = resolve_steps(cfg, lambda0)
    record_every = cfg.schedule.record_every or max(1, steps // 120)
    result = dynamics.train(
        hp, ds, steps=steps, record_every=record_every,
        scaling=cfg.grad_scaling,
        noise_variance_literal=cfg.noise_variance_literal)
    log = result.log
    l0 = log.rows[0]["loss"]
    g = hp.act.constants()
    m_kl = theory.kl_bound(hp.alpha, hp.lam, lambda0,
                           theory.const_a1(g, hp.sigma_u, hp.sigma_theta, hp.d),
                           theory.const_a2(g, hp.sigma_u, hp.sigma_theta, hp.d),
                           l0)
    consts = theory.constants_for(g, hp.sigma_u, hp.sigma_theta, hp.d,
                                  ds.n, lam_min, l0, hp.lam, m_kl)
    condition_holds = hp.alpha >= consts.alpha_min
    times = log.column("t")
    bound_curve = np.array([
        theory.loss_bound(t, hp.alpha, hp.lam, lambda0, consts.a1, l0)
        for t in times])
    measured = log.column("loss")
    # margin is always reported; it is only ASSERTED (non-None pass flag)
    # when the scale condition makes the bound applicable
    bound_margin = float(np.max(measured / bound_curve))
    bound_respected = bool(np.all(measured <= bound_curve)) \
        if condition_holds else None
    energies = log.column("energy")
    energy_max_increase = float(np.max(np.diff(energies))) \
        if len(energies) > 1 and np.all(np.isfinite(energies)) else 0.0
    report = TrainReport(
        cfg=cfg, log=log, lam_min=lam_min, lambda0=lambda0, l0=l0,
        constants=consts, condition_holds=condition_holds,
        loss_bound_curve=bound_curve,
        kl_bound_value=theory.kl_bound(hp.alpha, hp.lam, lambda0, consts.a1,
                                       consts.a2, l0),
        bound_respected=bound_respected, bound_margin=bound_margin,
        energy_max_increase=energy_max_increase, final=result.final)
    if out is not None:
        _write_train_artifacts(report, out)
    return report


def _write_train_artifacts(report: TrainReport, out: str) -> None:
    cfg = report.cfg
    os.makedirs(out, exist_ok=True)
    comments = _header(cfg)
    with open(os.path.join(out, "config.json"), "w") as fh:
        fh.write(cfg.to_json())
    report.log.to_csv(os.path.join(out, "trajectory.csv"), comments)
    save_ensemble(report.final, os.path.join(out, "ensemble.bin"))
    summary = {"config_hash": cfg.hash(), "seed": cfg.hyper.seed,
               **report.summary(),
               "constants": _constants_dict(report.constants)}
    _write_json(summary, os.path.join(out, "report.json"))
    times = report.log.column("t")
    series = [("measured", times, report.log.column("loss")),
              ("bound", times, report.loss_bound_curve)]
    svgplot.save(svgplot.line_plot(series, title="training loss",
                                   xlabel="t", ylabel="loss", logy=True),
                 os.path.join(out, "loss.svg"))


def _constants_dict(c: theory.TheoryConstants) -> dict:
    return {"a1": c.a1, "a2": c.a2, "b1": c.b1, "b2": c.b2, "r": c.r,
            "lambda0": c.lambda0, "alpha_min": c.alpha_min,
            "r_clamped": c.r_clamped, "b2_clamped": c.b2_clamped}


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON-serializable: {type(v)}")


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

SWEEP_METRICS = ("kernel_drift_inf", "residual_gap", "kl_surrogate")


@dataclass
class SweepReport:
    cfg: ExperimentConfig
    steps: int
    lambda0_ref: float
    cells: list                       # per (alpha, seed) terminal metrics
    medians: dict                     # metric -> list over alpha grid
    slopes: dict                      # metric -> {slope, stderr}
    failures: list

    def __post_init__(self):
        grid = sorted(self.cfg.sweep.alpha_grid)
        if len(grid) < 4 or grid[-1] / grid[0] < 16.0:
            raise ValueError("slope regression needs >= 4 scale factors "
                             "spanning a >= 16x range")


def _terminal_metrics(cfg: ExperimentConfig, alpha: float, seed: int,
                      steps: int, record_every: int) -> dict:
    ds = build_dataset(cfg)
    hp = cfg.hyper_for(alpha=alpha, seed=seed)
    try:
        result = dynamics.train(
            hp, ds, steps=steps, record_every=record_every,
            scaling=cfg.grad_scaling,
            noise_variance_literal=cfg.noise_variance_literal)
    except dynamics.DivergedError as exc:
        return {"alpha": alpha, "seed": seed, "failed": True,
                "error": str(exc)}
    first, last = result.log.rows[0], result.log.rows[-1]
    cell = {"alpha": alpha, "seed": seed, "failed": False, "error": "",
            "loss": last["loss"], "w2_estimate": last["w2_estimate"]}
    for name in SWEEP_METRICS:
        cell[name] = last[name]
    # moment-surrogate KL net of its value on the raw init draw; isolates the
    # training-induced part from the finite-m fitting noise
    cell["kl_surrogate_delta"] = last["kl_surrogate"] - first["kl_surrogate"]
    return cell


def _sweep_cell(args):
    cfg_dict, alpha, seed, steps, record_every = args
    from .config import from_dict
    return _terminal_metrics(from_dict(cfg_dict), alpha, seed, steps,
                             record_every)


def loglog_fit(xs, ys):
    """Least-squares slope of log(y) on log(x) with its standard error."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if keep.sum() < 3:
        return {"slope": math.nan, "stderr": math.nan, "points": int(keep.sum())}
    lx, ly = np.log(xs[keep]), np.log(ys[keep])
    vx = lx - lx.mean()
    slope = float(np.sum(vx * ly) / np.sum(vx * vx))
    resid = ly - ly.mean() - slope * vx
    dof = keep.sum() - 2
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof / np.sum(vx * vx))) \
        if dof > 0 else math.nan
    return {"slope": slope, "stderr": stderr, "points": int(keep.sum())}


def run_sweep(cfg: ExperimentConfig, out: Optional[str] = None) -> SweepReport:
    ds = build_dataset(cfg)
    lambda0_ref = reference_lambda0(cfg, ds)
    jobs = []
    steps_by_alpha = {}
    for alpha in cfg.sweep.alpha_grid:
        steps = resolve_steps(cfg, lambda0_ref, alpha=alpha)
        steps_by_alpha[alpha] = steps
        record_every = cfg.schedule.record_every or steps
        for seed in cfg.sweep.seeds:
            jobs.append((cfg.to_dict(), float(alpha), int(seed), steps,
                         record_every))
    base_steps = steps_by_alpha[cfg.sweep.alpha_grid[0]]
    if cfg.sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            cells = list(pool.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(job) for job in jobs]
    cells.sort(key=lambda c: (c["alpha"], c["seed"]))
    failures = [c for c in cells if c["failed"]]
    alphas = sorted(set(c["alpha"] for c in cells))
    medians = {}
    for name in SWEEP_METRICS + ("kl_surrogate_delta", "loss"):
        per_alpha = []
        for a in alphas:
            vals = [c[name] for c in cells
                    if c["alpha"] == a and not c["failed"]]
            per_alpha.append(float(np.median(vals)) if vals else math.nan)
        medians[name] = per_alpha
    slopes = {name: loglog_fit(alphas, medians[name])
              for name in SWEEP_METRICS}
    # the KL slope is fitted on the init-paired delta (see _terminal_metrics)
    slopes["kl_surrogate"] = loglog_fit(alphas, medians["kl_surrogate_delta"])
    report = SweepReport(cfg=cfg, steps=base_steps, lambda0_ref=lambda0_ref,
                         cells=cells, medians=medians, slopes=slopes,
                         failures=failures)
    if out is not None:
        _write_sweep_artifacts(report, out, alphas)
    return report


def _write_sweep_artifacts(report: SweepReport, out: str, alphas) -> None:
    cfg = report.cfg
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        fh.write(cfg.to_json())
    cols = ("alpha", "seed", "failed", "loss", "kernel_drift_inf",
            "residual_gap", "kl_surrogate", "kl_surrogate_delta",
            "w2_estimate")
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        for line in _header(cfg):
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for c in report.cells:
            vals = []
            for k in cols:
                v = c.get(k, math.nan)
                if isinstance(v, bool):
                    vals.append(str(int(v)))
                elif isinstance(v, (int, np.integer)):
                    vals.append(str(int(v)))
                else:
                    vals.append(repr(float(v)))
            fh.write(",".join(vals) + "\n")
    summary = {
        "config_hash": cfg.hash(), "seed": cfg.hyper.seed,
        "steps": report.steps, "lambda0_ref": report.lambda0_ref,
        "alpha_grid": list(alphas), "medians": report.medians,
        "slopes": report.slopes,
        "failures": [c["alpha"] for c in report.failures],
    }
    _write_json(summary, os.path.join(out, "sweep_summary.json"))
    series = []
    for name in SWEEP_METRICS:
        key = "kl_surrogate_delta" if name == "kl_surrogate" else name
        series.append((name, alphas, report.medians[key]))
    svgplot.save(svgplot.line_plot(series, title="terminal metrics vs scale",
                                   xlabel="alpha", ylabel="metric",
                                   logx=True, logy=True),
                 os.path.join(out, "sweep.svg"))


# --------------------------------------------------------------------------
# generalize
# --------------------------------------------------------------------------

@dataclass
class GeneralizeReport:
    cfg: ExperimentConfig
    cells: list
    medians: dict            # n -> median test 0-1 error
    bounds: dict             # n -> chi2/KL bound evaluations + premises
    chi2_teacher: float
    kl_teacher: float
    trend_strictly_decreasing: bool
    clip_rate: float


def _teacher_margins(cfg: ExperimentConfig, teacher, act, x):
    g = np.array([data_mod.teacher_label(teacher, act, xi) for xi in x])
    if np.any(g == 0.0):
        raise DegenerateLabelsError(
            "teacher mean function vanishes on a sampled input; labels "
            "would be sign ties")
    return g


def run_generalize(cfg: ExperimentConfig,
                   out: Optional[str] = None) -> GeneralizeReport:
    act = get_activation(cfg.activation)
    teacher = make_teacher(cfg)
    if cfg.teacher.mean_u == 0.0 or not np.any(
            np.asarray(cfg.teacher.mean_theta)):
        raise DegenerateLabelsError("zero-mean teacher produces sign ties")
    chi2 = data_mod.chi2_to_init(teacher, cfg.hyper.sigma_u,
                                 cfg.hyper.sigma_theta)
    kl_d = data_mod.kl_to_init(teacher, cfg.hyper.sigma_u,
                               cfg.hyper.sigma_theta)
    gen = cfg.generalize
    test_x = data_mod.make_synthetic(
        gen.test_n, cfg.hyper.d, seed=cfg.data.seed + 90001,
        mode="rademacher_labels").x
    g_test = _teacher_margins(cfg, teacher, act, test_x)
    y_test = np.sign(g_test)
    clip_candidates = [np.mean(np.abs(g_test) > 1.0)]
    cells = []
    for n in gen.n_grid:
        for seed in gen.seeds:
            data_seed = cfg.data.seed + 1009 * n + seed
            x = data_mod.make_synthetic(n, cfg.hyper.d, seed=data_seed,
                                        mode="rademacher_labels").x
            g_train = _teacher_margins(cfg, teacher, act, x)
            clip_candidates.append(np.mean(np.abs(g_train) > 1.0))
            ds = data_mod.Dataset(x=x, y=np.sign(g_train), seed=data_seed,
                                  mode="teacher_labels")
            hp = cfg.hyper_for(seed=cfg.hyper.seed + seed, n=n)
            result = dynamics.train(
                hp, ds, steps=gen.steps,
                record_every=gen.steps,
                recorder_factory=dynamics.LiteRecorder,
                scaling=cfg.grad_scaling,
                noise_variance_literal=cfg.noise_variance_literal)
            f_train = forward_all(result.final, hp, ds.x)
            f_test = forward_all(result.final, hp, test_x)
            cells.append({
                "n": n, "seed": seed,
                "train_ramp": float(np.mean(theory.ramp_loss(f_train, ds.y))),
                "train_01": float(np.mean(theory.zero_one_loss(f_train, ds.y))),
                "test_ramp": float(np.mean(theory.ramp_loss(f_test, y_test))),
                "test_01": float(np.mean(theory.zero_one_loss(f_test, y_test))),
                "final_loss": result.log.rows[-1]["loss"],
            })
    medians = {n: float(np.median([c["test_01"] for c in cells
                                   if c["n"] == n]))
               for n in gen.n_grid}
    g = act.constants()
    bounds = {}
    for n in gen.n_grid:
        alpha = cfg.hyper.alpha
        m_kl = chi2 / alpha ** 2
        b1 = theory.const_b1(g, cfg.hyper.sigma_u, cfg.hyper.sigma_theta,
                             cfg.hyper.d, n)
        b2 = theory.const_b2(g, cfg.hyper.sigma_u, cfg.hyper.sigma_theta,
                             m_kl)
        chi2_bound = theory.gen_bound_chi2(chi2, n, gen.delta, b1, b2.value,
                                           alpha=alpha, lam=cfg.hyper.lam)
        entry = {
            "b1": b1, "b2": b2.value, "b2_clamped": b2.clamped,
            "chi2_bound": chi2_bound.value,
            "chi2_bound_vacuous": chi2_bound.vacuous,
            "chi2_premises": chi2_bound.premises,
        }
        if act.bounded:
            klb = theory.gen_bound_kl_teacher(kl_d, alpha, n, gen.delta,
                                              g.g7, cfg.hyper.sigma_u,
                                              cfg.hyper.lam)
            entry.update({"kl_bound": klb.value,
                          "kl_bound_vacuous": klb.vacuous,
                          "kl_premises": klb.premises})
        bounds[n] = entry
    ns = sorted(gen.n_grid)
    trend = all(medians[a] > medians[b] for a, b in zip(ns, ns[1:]))
    report = GeneralizeReport(
        cfg=cfg, cells=cells, medians=medians, bounds=bounds,
        chi2_teacher=chi2, kl_teacher=kl_d,
        trend_strictly_decreasing=trend,
        clip_rate=float(np.mean(clip_candidates)))
    if out is not None:
        _write_generalize_artifacts(report, out)
    return report


def _write_generalize_artifacts(report: GeneralizeReport, out: str) -> None:
    cfg = report.cfg
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        fh.write(cfg.to_json())
    cols = ("n", "seed", "train_ramp", "train_01", "test_ramp", "test_01",
            "final_loss")
    with open(os.path.join(out, "generalize.csv"), "w", newline="") as fh:
        for line in _header(cfg):
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for c in report.cells:
            fh.write(",".join(
                str(int(c[k])) if k in ("n", "seed") else repr(float(c[k]))
                for k in cols) + "\n")
    summary = {
        "config_hash": cfg.hash(), "seed": cfg.hyper.seed,
        "chi2_teacher": report.chi2_teacher,
        "kl_teacher": report.kl_teacher,
        "median_test_01": {str(k): v for k, v in report.medians.items()},
        "bounds": {str(k): v for k, v in report.bounds.items()},
        "trend_strictly_decreasing": report.trend_strictly_decreasing,
        "clip_rate": report.clip_rate,
    }
    _write_json(summary, os.path.join(out, "generalize.json"))
    ns = sorted(report.medians)
    svgplot.save(
        svgplot.line_plot([("median test 0-1", ns,
                            [report.medians[n] for n in ns])],
                          title="test error vs sample size",
                          xlabel="n", ylabel="0-1 error", logx=True),
        os.path.join(out, "generalize.svg"))


# --------------------------------------------------------------------------
# audit
# --------------------------------------------------------------------------

def run_audit(cfg: ExperimentConfig, out: Optional[str] = None) -> dict:
    hp = cfg.hyper_for()
    rng = stream(cfg.hyper.seed, STREAM_MC)
    cases = cfg.audit.talagrand_cases
    dim = cfg.hyper.d + 1
    scales = np.concatenate([np.full(cfg.hyper.d, hp.sigma_theta),
                             [hp.sigma_u]])
    mus = rng.standard_normal((cases, dim)) * 2.0 * scales
    vars_ = scales ** 2 * np.exp(rng.uniform(-3.0, 3.0, size=(cases, dim)))
    worst = -math.inf
    talagrand_pass = True
    for mu, v in zip(mus, vars_):
        res = metrics.talagrand_audit(mu, v, hp)
        worst = max(worst, res["lhs"] - res["rhs"])
        talagrand_pass &= res["pass"]
    r_grid = np.linspace(0.0, 8.0 * hp.sigma_u, cfg.audit.tail_grid_points)
    tail = metrics.tail_bound_audit(hp, r_grid,
                                    mc_samples=cfg.audit.tail_mc_samples,
                                    seed=cfg.hyper.seed)
    constant_reports = {}
    for name in ("tanh", "sigmoid", "identity", "softplus"):
        act = get_activation(name)
        rep = audit_constants(act, act.constants(),
                              grid_size=cfg.audit.constants_grid)
        constant_reports[name] = {"pass": rep.passed, "margins": rep.margins}
    # kernel-block Lipschitz envelopes along a short trajectory
    ds = build_dataset(cfg)
    e0 = init_ensemble(hp)
    e_t = e0
    for k in range(300):
        e_t = dynamics.step(e_t, hp, ds, step_index=k,
                            scaling=cfg.grad_scaling,
                            noise_variance_literal=cfg.noise_variance_literal)
    gram_audit = metrics.gram_perturbation_audit(e_t, e0, hp, ds)
    audits = {
        "config_hash": cfg.hash(),
        "seed": cfg.hyper.seed,
        "talagrand": {"cases": cases, "pass": bool(talagrand_pass),
                      "worst_margin": worst},
        "tail_bound": {
            "mc_samples": tail["mc_samples"],
            "stated_violations": tail["stated_violations"],
            "stated_violated_at_zero": 0.0 in tail["stated_violations"],
            "corrected_all_pass": tail["corrected_all_pass"],
        },
        "activation_constants": constant_reports,
        "gram_perturbation": gram_audit,
        "pass": bool(talagrand_pass and tail["corrected_all_pass"]
                     and gram_audit["pass"]
                     and all(r["pass"] for r in constant_reports.values())),
    }
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(audits, os.path.join(out, "audits.json"))
    return audits


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def run_bounds(cfg: ExperimentConfig, out: Optional[str] = None) -> dict:
    ds = build_dataset(cfg)
    hp = cfg.hyper_for()
    e0 = init_ensemble(hp)
    h0 = kernel.gram_h(e0, hp, ds, source="init")
    lam_min = kernel.min_eigenvalue(h0)
    l0 = model_loss(e0, hp, ds)
    g = hp.act.constants()
    result = {"config_hash": cfg.hash(), "seed": cfg.hyper.seed,
              "alpha": hp.alpha, "lambda": hp.lam,
              "lambda_min_measured": lam_min, "l0_measured": l0,
              "g_constants": {k: v for k, v in vars(g).items()
                              if v is not None}}
    try:
        lambda0 = kernel.lambda0(h0)
    except kernel.AssumptionViolatedError as exc:
        result["assumption_violated"] = str(exc)
        if out is not None:
            os.makedirs(out, exist_ok=True)
            _write_json(result, os.path.join(out, "bounds.json"))
        return result
    m_kl = theory.kl_bound(hp.alpha, hp.lam, lambda0,
                           theory.const_a1(g, hp.sigma_u, hp.sigma_theta, hp.d),
                           theory.const_a2(g, hp.sigma_u, hp.sigma_theta, hp.d),
                           l0)
    consts = theory.constants_for(g, hp.sigma_u, hp.sigma_theta, hp.d, ds.n,
                                  lam_min, l0, hp.lam, m_kl)
    result.update({
        "constants": _constants_dict(consts),
        "condition_holds": hp.alpha >= consts.alpha_min,
        "loss_floor": theory.loss_floor(hp.alpha, hp.lam, lambda0, consts.a1),
        "kl_bound": m_kl,
        "gen_bound_large_alpha": theory.gen_bound_large_alpha(
            min(m_kl, 1e300), hp.alpha, ds.n, cfg.generalize.delta,
            consts.b1, consts.b2),
    })
    if g.g7 is not None and m_kl <= 0.5:
        result["gen_bound_small_alpha"] = theory.gen_bound_small_alpha(
            m_kl, hp.alpha, ds.n, cfg.generalize.delta, g.g7, hp.sigma_u)
    teacher = make_teacher(cfg)
    chi2 = data_mod.chi2_to_init(teacher, hp.sigma_u, hp.sigma_theta)
    kl_d = data_mod.kl_to_init(teacher, hp.sigma_u, hp.sigma_theta)
    b2_teacher = theory.const_b2(g, hp.sigma_u, hp.sigma_theta,
                                 chi2 / hp.alpha ** 2)
    chi2_bound = theory.gen_bound_chi2(chi2, ds.n, cfg.generalize.delta,
                                       consts.b1, b2_teacher.value,
                                       alpha=hp.alpha, lam=hp.lam)
    result["teacher"] = {
        "chi2": chi2, "kl": kl_d,
        "chi2_bound": chi2_bound.value,
        "chi2_bound_premises": chi2_bound.premises,
        "chi2_bound_vacuous": chi2_bound.vacuous,
    }
    if g.g7 is not None:
        klb = theory.gen_bound_kl_teacher(kl_d, hp.alpha, ds.n,
                                          cfg.generalize.delta, g.g7,
                                          hp.sigma_u, hp.lam)
        result["teacher"]["kl_bound"] = klb.value
        result["teacher"]["kl_bound_premises"] = klb.premises
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(result, os.path.join(out, "bounds.json"))
    return result


def emit_plots(logs, out: str, labels=None) -> list:
    """Loss-versus-time SVGs for a batch of trajectory logs."""
    if not logs:
        raise ValueError("no logs to plot")
    os.makedirs(out, exist_ok=True)
    labels = labels or [f"run{i}" for i in range(len(logs))]
    paths = []
    series = [(lab, log.column("t"), log.column("loss"))
              for lab, log in zip(labels, logs)]
    path = os.path.join(out, "loss_overlay.svg")
    svgplot.save(svgplot.line_plot(series, title="training loss",
                                   xlabel="t", ylabel="loss", logy=True),
                 path)
    paths.append(path)
    return paths
