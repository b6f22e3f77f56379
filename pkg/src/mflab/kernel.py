"""Tangent-kernel Gram matrices under the empirical particle distribution,
their spectra, and the drift quantities tracked along training.

For h(theta, x) = h~(theta'x) the two kernel blocks evaluate to

    H1[i,j] = mean_k u_k^2 h~'(z_ki) h~'(z_kj) <x_i, x_j>
    H2[i,j] = mean_k h~(z_ki) h~(z_kj),            z_ki = theta_k' x_i,

and H = H1 + H2.  Matrix products over the particle axis use einsum without
BLAS dispatch so entries do not depend on BLAS threading.
"""

import json
from dataclasses import dataclass

import numpy as np

from .model import Ensemble, HyperParams


class AssumptionViolatedError(RuntimeError):
    """The positive-definiteness assumption on the init Gram matrix failed."""


@dataclass(frozen=True)
class GramMatrix:
    a: np.ndarray        # (n, n) symmetric
    source: str          # "init" or "step {t}"
    m_used: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("Gram matrix must be square")
        a = 0.5 * (a + a.T)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.a))

    def __add__(self, other: "GramMatrix") -> "GramMatrix":
        if self.n != other.n:
            raise ValueError("size mismatch")
        return GramMatrix(self.a + other.a, source=self.source,
                          m_used=self.m_used)


def gram_h1(e: Ensemble, hp: HyperParams, ds, source: str = "init") -> GramMatrix:
    z = e.thetas @ ds.x.T                        # (m, n)
    weighted = e.us[:, None] * hp.act.d1(z)      # (m, n)
    inner = np.einsum("ki,kj->ij", weighted, weighted, optimize=False) / e.m
    g = ds.x @ ds.x.T
    return GramMatrix(inner * g, source=source, m_used=e.m)


def gram_h2(e: Ensemble, hp: HyperParams, ds, source: str = "init") -> GramMatrix:
    h = hp.act.value(e.thetas @ ds.x.T)
    a = np.einsum("ki,kj->ij", h, h, optimize=False) / e.m
    return GramMatrix(a, source=source, m_used=e.m)


def gram_h(e: Ensemble, hp: HyperParams, ds, source: str = "init") -> GramMatrix:
    return gram_h1(e, hp, ds, source) + gram_h2(e, hp, ds, source)


def min_eigenvalue(g: GramMatrix) -> float:
    """Smallest eigenvalue via the dense symmetric solver (n <= 2048)."""
    a = g.a
    if a.shape[0] > 2048:
        raise ValueError("dense eigensolver capped at n = 2048")
    scale = np.max(np.abs(a)) or 1.0
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(a)[0])


def lambda0(g: GramMatrix, tol_ratio: float = 1e-10) -> float:
    """sqrt(lambda_min / n); raises when the spectrum hits the degeneracy
    floor (duplicate or parallel inputs)."""
    lam_min = min_eigenvalue(g)
    floor = tol_ratio * max(g.trace(), 1e-300) / g.n
    if lam_min <= floor:
        raise AssumptionViolatedError(
            f"lambda_min(H(p0)) = {lam_min:.3e} is not positive "
            "(degenerate inputs?); bound evaluators are undefined")
    return float(np.sqrt(lam_min / g.n))


def kernel_drift(h_t: GramMatrix, h_0: GramMatrix) -> dict:
    """Entrywise drift and the n-times-larger spectral-norm envelope."""
    if h_t.n != h_0.n:
        raise ValueError("size mismatch")
    inf_inf = float(np.max(np.abs(h_t.a - h_0.a)))
    return {"inf_inf": inf_inf, "spectral_upper": h_t.n * inf_inf}


def reg_drift(e: Ensemble, hp: HyperParams, ds) -> np.ndarray:
    """Per-data-point particle average of
    u [h/sigma_u^2 + h~'(z) z/sigma_theta^2 - h~''(z)||x||^2]."""
    z = e.thetas @ ds.x.T
    h, h1, h2, _ = hp.act.eval(z)
    xsq = np.sum(ds.x ** 2, axis=1)              # (n,)
    integrand = (h / hp.sigma_u ** 2
                 + h1 * z / hp.sigma_theta ** 2
                 - h2 * xsq[None, :])
    return np.sum(e.us[:, None] * integrand, axis=0) / e.m


def save_csv(g: GramMatrix, path, header_comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        for row in g.a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def summary_json(g: GramMatrix, path=None) -> dict:
    summary = {"n": g.n, "lambda_min": min_eigenvalue(g), "trace": g.trace()}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary
