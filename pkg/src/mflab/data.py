"""Synthetic datasets with unit-ball inputs, and Gaussian teacher
distributions with closed-form divergences to the initialization.
"""

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .activations import Activation
from .rng import STREAM_DATA, STREAM_MC, stream

LABEL_MODES = ("rademacher_labels", "teacher_labels")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray          # (n, d), each row with ||x_i||_2 <= 1
    y: np.ndarray          # (n,)
    seed: int = 0
    mode: str = "rademacher_labels"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError("inputs must be (n, d) with labels (n,)")
        if x.shape[0] == 0:
            raise ValueError("dataset must contain at least one point")
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms > 1.0 + 1e-12):
            raise ValueError("input norms must not exceed 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class GaussianTeacher:
    """Gaussian parameter distribution N(mean, diag(sigma_theta^2 .. , sigma_u^2)).

    The first d mean coordinates belong to the first-layer block, the last one
    to the output weight.  The covariance is required to match the
    initialization covariance so that the chi-square and KL divergences to it
    are finite and closed-form.
    """
    mean_theta: np.ndarray   # (d,)
    mean_u: float
    sigma_theta: float
    sigma_u: float

    def __post_init__(self):
        mt = np.atleast_1d(np.asarray(self.mean_theta, dtype=np.float64))
        if self.sigma_theta <= 0 or self.sigma_u <= 0:
            raise ValueError("teacher scales must be positive")
        object.__setattr__(self, "mean_theta", mt)

    @property
    def d(self) -> int:
        return self.mean_theta.shape[0]


def _check_covariance(teacher: GaussianTeacher, sigma_u: float,
                      sigma_theta: float) -> None:
    if not (np.isclose(teacher.sigma_u, sigma_u)
            and np.isclose(teacher.sigma_theta, sigma_theta)):
        raise ValueError(
            "teacher covariance must equal the initialization covariance "
            f"(teacher sigma_u={teacher.sigma_u}, sigma_theta="
            f"{teacher.sigma_theta}; init {sigma_u}, {sigma_theta})")


def chi2_to_init(teacher: GaussianTeacher, sigma_u: float,
                 sigma_theta: float) -> float:
    """exp(mu' Sigma0^{-1} mu) - 1 for equal-covariance Gaussians."""
    _check_covariance(teacher, sigma_u, sigma_theta)
    q = (np.sum(teacher.mean_theta ** 2) / sigma_theta ** 2
         + teacher.mean_u ** 2 / sigma_u ** 2)
    return float(np.expm1(q))


def kl_to_init(teacher: GaussianTeacher, sigma_u: float,
               sigma_theta: float) -> float:
    """mu' Sigma0^{-1} mu / 2 for equal-covariance Gaussians."""
    _check_covariance(teacher, sigma_u, sigma_theta)
    q = (np.sum(teacher.mean_theta ** 2) / sigma_theta ** 2
         + teacher.mean_u ** 2 / sigma_u ** 2)
    return float(0.5 * q)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(80)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(2.0 * np.pi)


def teacher_label(teacher: GaussianTeacher, act: Activation, x: np.ndarray,
                  mc_samples: int = 0, seed: int = 0) -> float:
    """E[u h(theta' x)] under the teacher.

    u and theta are independent, so the value is mean_u * E[h(w)] with
    w ~ N(mean_theta' x, sigma_theta^2 ||x||^2).  The default path reduces the
    integral to one dimension: closed form for the identity activation,
    Gauss-Hermite quadrature otherwise.  mc_samples > 0 switches to plain
    Monte-Carlo (at least 1e4 samples).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (teacher.d,):
        raise ValueError("x must match the teacher dimension")
    if mc_samples:
        if mc_samples < 10_000:
            raise ValueError("Monte-Carlo path needs at least 1e4 samples")
        rng = stream(seed, STREAM_MC)
        thetas = teacher.mean_theta + teacher.sigma_theta * rng.standard_normal(
            (mc_samples, teacher.d))
        us = teacher.mean_u + teacher.sigma_u * rng.standard_normal(mc_samples)
        return float(np.mean(us * act.value(thetas @ x)))
    mu = float(teacher.mean_theta @ x)
    s = teacher.sigma_theta * float(np.linalg.norm(x))
    if act.kind == "identity":
        return teacher.mean_u * mu
    vals = act.value(mu + s * _GH_NODES)
    return float(teacher.mean_u * np.sum(_GH_WEIGHTS * vals))


def make_synthetic(n: int, d: int, seed: int,
                   mode: str = "rademacher_labels",
                   distinct: bool = False,
                   teacher: Optional[GaussianTeacher] = None,
                   act: Optional[Activation] = None) -> Dataset:
    """Inputs uniform in the unit ball; labels per mode.

    distinct=True resamples until no two inputs are (numerically) parallel,
    which keeps the kernel Gram matrix away from exact degeneracy.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if mode not in LABEL_MODES:
        raise ValueError(f"unknown label mode {mode!r}")
    rng = stream(seed, STREAM_DATA)
    x = _unit_ball(rng, n, d)
    if distinct:
        for _ in range(100):
            bad = _parallel_rows(x)
            if not bad:
                break
            for i in bad:
                x[i] = _unit_ball(rng, 1, d)[0]
        else:
            raise RuntimeError("could not sample pairwise non-parallel inputs")
    if mode == "rademacher_labels":
        y = rng.choice(np.array([-1.0, 1.0]), size=n)
    else:
        if teacher is None or act is None:
            raise ValueError("teacher_labels mode needs a teacher and an "
                             "activation")
        y = np.array([teacher_label(teacher, act, xi) for xi in x])
    return Dataset(x=x, y=y, seed=seed, mode=mode)


def _unit_ball(rng, n, d):
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.random(n) ** (1.0 / d)
    x = g / norms * radii[:, None]
    # guard against rounding pushing a norm above 1
    over = np.linalg.norm(x, axis=1) > 1.0
    if np.any(over):
        x[over] /= np.linalg.norm(x[over], axis=1, keepdims=True) * (1 + 1e-15)
    return x


def _parallel_rows(x, tol=1e-9):
    norms = np.linalg.norm(x, axis=1)
    unit = x / np.where(norms[:, None] == 0, 1.0, norms[:, None])
    cos = np.abs(unit @ unit.T)
    np.fill_diagonal(cos, 0.0)
    i, j = np.where(cos > 1.0 - tol)
    return sorted(set(int(a) for a in i[i < j]))


def save_csv(ds: Dataset, path, header_comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        cols = [f"x{i}" for i in range(ds.d)] + ["y"]
        fh.write(",".join(cols) + "\n")
        for xi, yi in zip(ds.x, ds.y):
            fields = [repr(float(v)) for v in xi] + [repr(float(yi))]
            fh.write(",".join(fields) + "\n")


def load_csv(path_or_buffer) -> Dataset:
    """Parse the x0,...,x{d-1},y layout; reject rows violating the norm
    invariant."""
    if isinstance(path_or_buffer, io.IOBase):
        lines = path_or_buffer.read().splitlines()
    else:
        with open(path_or_buffer) as fh:
            lines = fh.read().splitlines()
    rows = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError("empty dataset file")
    header = rows[0].split(",")
    if header[-1] != "y" or any(h != f"x{i}" for i, h in enumerate(header[:-1])):
        raise ValueError(f"unexpected CSV header {header}")
    d = len(header) - 1
    xs, ys = [], []
    for k, ln in enumerate(rows[1:], start=2):
        vals = [float(v) for v in ln.split(",")]
        if len(vals) != d + 1:
            raise ValueError(f"row {k}: expected {d + 1} fields")
        if np.linalg.norm(vals[:-1]) > 1.0 + 1e-12:
            raise ValueError(f"row {k}: input norm exceeds 1")
        xs.append(vals[:-1])
        ys.append(vals[-1])
    return Dataset(x=np.array(xs), y=np.array(ys))
