"""Linearized training flow driven by the init-time Gram matrix.

The flow solves d[f(t) - y]/dt = -(2 alpha^2 / n) H0 [f(t) - y] from f(0) = 0
via the eigendecomposition of H0 (symmetric PSD), and a forward-Euler variant
is provided for discretization studies.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernel import GramMatrix


@dataclass(frozen=True)
class NtkFlow:
    h0: GramMatrix
    y: np.ndarray
    alpha: float
    eigvals: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (self.h0.n,):
            raise ValueError("label vector must match the Gram size")
        w, v = np.linalg.eigh(self.h0.a)
        ortho = np.max(np.abs(v.T @ v - np.eye(len(w))))
        if ortho > 1e-10:
            raise ValueError(f"eigenvector basis not orthonormal ({ortho:.2e})")
        scale = max(np.max(np.abs(self.h0.a)), 1e-300)
        recon = np.max(np.abs((v * w) @ v.T - self.h0.a))
        if recon > 1e-9 * scale:
            raise ValueError(f"eigendecomposition reconstruction off ({recon:.2e})")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "eigvals", w)
        object.__setattr__(self, "eigvecs", v)

    @property
    def n(self) -> int:
        return self.h0.n

    @property
    def rate(self) -> float:
        return 2.0 * self.alpha ** 2 / self.n


def closed_form(flow: NtkFlow, t: float) -> np.ndarray:
    """f(t) = (I - exp(-(2 alpha^2 / n) H0 t)) y."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    decay = np.exp(-flow.rate * flow.eigvals * t)
    coeffs = flow.eigvecs.T @ flow.y
    return flow.y - flow.eigvecs @ (decay * coeffs)


def max_stable_eta(flow: NtkFlow) -> float:
    lam_max = float(flow.eigvals[-1])
    if lam_max <= 0:
        return np.inf
    return 2.0 / (flow.rate * lam_max)


def euler(flow: NtkFlow, eta: float, steps: int) -> np.ndarray:
    """Forward-Euler iterates; rows are f at t = 0, eta, ..., steps*eta."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    eta_max = max_stable_eta(flow)
    if eta >= eta_max:
        raise ValueError(
            f"eta = {eta:g} violates the stability bound; the largest stable "
            f"step is {eta_max:g}")
    a = flow.rate * flow.h0.a
    g = -flow.y.copy()                   # residual f - y
    out = np.empty((steps + 1, flow.n))
    out[0] = flow.y + g
    for k in range(1, steps + 1):
        g = g - eta * (a @ g)
        out[k] = flow.y + g
    return out


def residual_gap(f_particle: np.ndarray, f_ntk: np.ndarray) -> float:
    """(1/n) squared Euclidean distance between the two function vectors."""
    f_particle = np.asarray(f_particle, dtype=np.float64)
    f_ntk = np.asarray(f_ntk, dtype=np.float64)
    if f_particle.shape != f_ntk.shape:
        raise ValueError("size mismatch")
    diff = f_particle - f_ntk
    return float(np.sum(diff * diff) / f_particle.shape[0])


def save_csv(flow: NtkFlow, times, path, header_comments=()) -> None:
    """ntk_flow.csv with columns t, f_1..f_n, residual_norm."""
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        cols = ["t"] + [f"f_{i + 1}" for i in range(flow.n)] + ["residual_norm"]
        fh.write(",".join(cols) + "\n")
        for t in times:
            f = closed_form(flow, t)
            res = float(np.linalg.norm(f - flow.y))
            fh.write(",".join([repr(float(t))]
                              + [repr(float(v)) for v in f]
                              + [repr(res)]) + "\n")
