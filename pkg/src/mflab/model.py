"""Finite-width two-layer network, regularized objective and exact
per-particle gradients.

The network is f(x) = (alpha/m) sum_j u_j h(theta_j' x).  The objective adds
the Gaussian-prior weight decay (lam/m) sum_j (u_j^2/(2 sigma_u^2)
+ ||theta_j||^2/(2 sigma_theta^2)) to the mean squared error.

Reductions over the particle axis go through numpy's pairwise ufunc
summation, never through threaded BLAS dot products, so results are
bit-stable regardless of BLAS worker count.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from .activations import Activation, get as get_activation


@dataclass(frozen=True)
class HyperParams:
    alpha: float
    lam: float
    sigma_u: float
    sigma_theta: float
    eta: float
    d: int
    m: int
    n: int
    seed: int = 0
    activation: str = "tanh"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.sigma_u <= 0 or self.sigma_theta <= 0:
            raise ValueError("init scales must be positive")
        if self.eta <= 0:
            raise ValueError("step size must be positive")
        if self.d < 1 or self.m < 1 or self.n < 1:
            raise ValueError("d, m, n must be positive integers")

    @property
    def act(self) -> Activation:
        return get_activation(self.activation)

    def with_alpha(self, alpha: float, eta: float) -> "HyperParams":
        return replace(self, alpha=alpha, eta=eta)


@dataclass
class Ensemble:
    thetas: np.ndarray   # (m, d)
    us: np.ndarray       # (m,)
    generation: int = 0  # number of update steps applied

    def __post_init__(self):
        if self.thetas.ndim != 2 or self.us.ndim != 1:
            raise ValueError("thetas must be (m, d) and us (m,)")
        if self.thetas.shape[0] != self.us.shape[0] or self.us.shape[0] < 1:
            raise ValueError("particle counts must match and be >= 1")
        if not (np.all(np.isfinite(self.thetas)) and np.all(np.isfinite(self.us))):
            raise ValueError("ensemble entries must be finite")

    @property
    def m(self) -> int:
        return self.us.shape[0]

    @property
    def d(self) -> int:
        return self.thetas.shape[1]

    def points(self) -> np.ndarray:
        """Particles as rows of (theta, u) in R^{d+1}."""
        return np.concatenate([self.thetas, self.us[:, None]], axis=1)

    def copy(self) -> "Ensemble":
        return Ensemble(self.thetas.copy(), self.us.copy(), self.generation)


def init_ensemble(hp: HyperParams, rng=None) -> Ensemble:
    """theta_j ~ N(0, sigma_theta^2 I_d), u_j ~ N(0, sigma_u^2), i.i.d."""
    if rng is None:
        from .rng import STREAM_INIT, stream
        rng = stream(hp.seed, STREAM_INIT)
    thetas = hp.sigma_theta * rng.standard_normal((hp.m, hp.d))
    us = hp.sigma_u * rng.standard_normal(hp.m)
    return Ensemble(thetas=thetas, us=us, generation=0)


def forward_all(e: Ensemble, hp: HyperParams, x: np.ndarray) -> np.ndarray:
    """Network values on a batch of inputs, shape (n,)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != e.d:
        raise ValueError(f"input dimension {x.shape[1]} != ensemble d={e.d}")
    h = hp.act.value(e.thetas @ x.T)                    # (m, n)
    return (hp.alpha / e.m) * np.einsum("j,ji->i", e.us, h, optimize=False)


def forward(e: Ensemble, hp: HyperParams, x: np.ndarray) -> float:
    return float(forward_all(e, hp, x)[0])


def loss(e: Ensemble, hp: HyperParams, ds) -> float:
    r = forward_all(e, hp, ds.x) - ds.y
    return float(np.mean(r * r))


def regularizer(e: Ensemble, hp: HyperParams) -> float:
    su = np.sum(e.us ** 2) / (2.0 * hp.sigma_u ** 2)
    st = np.sum(e.thetas ** 2) / (2.0 * hp.sigma_theta ** 2)
    return float(hp.lam / e.m * (su + st))


def objective(e: Ensemble, hp: HyperParams, ds) -> float:
    return loss(e, hp, ds) + regularizer(e, hp)


def grads(e: Ensemble, hp: HyperParams, ds, scaling: str = "meanfield"):
    """Per-particle gradient pairs (du, dtheta).

    With the default mean-field scaling these are m times the raw gradient of
    the objective, i.e. the drift that keeps per-particle motion O(1) as m
    grows:

        du_j     = 2 alpha E_S[(f - y) h(theta_j' x)]        + lam u_j / sigma_u^2
        dtheta_j = 2 alpha E_S[(f - y) u_j h'(theta_j' x) x] + lam theta_j / sigma_theta^2

    scaling="raw" divides both by m, matching the literal gradient of the
    finite-width objective.
    """
    if scaling not in ("meanfield", "raw"):
        raise ValueError("scaling must be 'meanfield' or 'raw'")
    z = e.thetas @ ds.x.T                               # (m, n)
    h, h1 = hp.act.value_d1(z)
    f = (hp.alpha / e.m) * np.einsum("j,ji->i", e.us, h, optimize=False)
    w = (2.0 * hp.alpha / ds.n) * (f - ds.y)            # (n,)
    du = h @ w
    if hp.lam:
        du += (hp.lam / hp.sigma_u ** 2) * e.us
    h1 *= w[None, :]
    h1 *= e.us[:, None]
    dth = h1 @ ds.x
    if hp.lam:
        dth += (hp.lam / hp.sigma_theta ** 2) * e.thetas
    if scaling == "raw":
        du /= e.m
        dth /= e.m
    return du, dth


def save_ensemble(e: Ensemble, path) -> None:
    """Binary snapshot: little-endian f64 header {m, d}, theta rows, then u."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<2d", float(e.m), float(e.d)))
        fh.write(e.thetas.astype("<f8").tobytes(order="C"))
        fh.write(e.us.astype("<f8").tobytes())


def load_ensemble(path) -> Ensemble:
    with open(path, "rb") as fh:
        m, d = struct.unpack("<2d", fh.read(16))
        if not (m == int(m) and d == int(d) and m >= 1 and d >= 1):
            raise ValueError("snapshot header must hold positive integers")
        m, d = int(m), int(d)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != m * d + m:
        raise ValueError("snapshot length does not match header")
    thetas = raw[: m * d].reshape(m, d).copy()
    us = raw[m * d:].copy()
    return Ensemble(thetas=thetas, us=us)


def save_ensemble_csv(e: Ensemble, path, header_comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        cols = [f"theta{i}" for i in range(e.d)] + ["u"]
        fh.write(",".join(cols) + "\n")
        for row, u in zip(e.thetas, e.us):
            fh.write(",".join(repr(float(v)) for v in row)
                     + f",{float(u)!r}\n")
