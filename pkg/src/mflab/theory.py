"""Closed-form constants and bound evaluators.

Every function is a literal transcription of a stated formula; nothing here
is fitted or tuned.  Logarithm arguments that can drop below their domain at
desk scale are clamped, and each clamp is reported through the ``clamped``
flag on the returned value.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .activations import GConstants
from .kernel import AssumptionViolatedError


@dataclass(frozen=True)
class ClampedScalar:
    value: float
    clamped: bool = False

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class TheoryConstants:
    a1: float
    a2: float
    b1: float
    b2: float
    r: float
    lambda0: float
    alpha_min: float
    r_clamped: bool = False
    b2_clamped: bool = False


def const_a1(g: GConstants, sigma_u: float, sigma_theta: float, d: int) -> float:
    s = sigma_theta ** 2 * d + sigma_u ** 2
    return (2.0 * (g.g1 / sigma_u ** 2 + g.g3 / sigma_theta ** 2) * s
            + 2.0 * (g.g2 / sigma_u ** 2 + g.g4) * math.sqrt(s))


def const_a2(g: GConstants, sigma_u: float, sigma_theta: float, d: int) -> float:
    s = math.sqrt(sigma_u ** 2 + sigma_theta ** 2 * d)
    inner = ((g.g1 + g.g3) / sigma_u ** 2
             + (g.g3 + g.g5) / sigma_theta ** 2
             + g.g6) * 2.0 * s + g.g2 / sigma_u ** 2 + g.g4
    return 2.0 * inner * max(sigma_u, sigma_theta)


def const_r(g: GConstants, sigma_u: float, sigma_theta: float, d: int,
            n: int, lam_min: float) -> ClampedScalar:
    """Stability radius: min of the init second-moment scale and the
    eigenvalue-margin branch.  The log argument is clamped below at e."""
    if lam_min <= 0:
        raise AssumptionViolatedError("stability radius needs lambda_min > 0")
    first = math.sqrt(sigma_theta ** 2 * d + sigma_u ** 2)
    log_arg = 8.0 * n * g.g3 ** 2 * sigma_u ** 2 / lam_min
    clamped = log_arg < math.e
    denom = (8.0 * g.g3 ** 2 * math.sqrt(8.0 * sigma_theta ** 2 * d
                                         + 10.0 * sigma_u ** 2)
             + 64.0 * g.g3 * g.g4 * math.log(max(log_arg, math.e))
             + 16.0 * g.g1 * g.g3 * math.sqrt(sigma_u ** 2
                                              + sigma_theta ** 2 * d)
             + 8.0 * g.g2 * g.g3)
    second = math.inf if denom == 0 else lam_min / (n * denom)
    return ClampedScalar(min(first, second), clamped and second <= first)


def alpha_threshold(l0: float, a1: float, a2: float, lam: float,
                    lambda0: float, r: float, sigma_u: float,
                    sigma_theta: float) -> float:
    """Smallest scale factor for which the linear-convergence regime is
    guaranteed."""
    if lambda0 <= 0 or r <= 0:
        raise AssumptionViolatedError("threshold needs lambda0 > 0 and r > 0")
    return (8.0 * math.sqrt(l0 * a2 ** 2 + lam * a1 ** 2)
            / lambda0 ** 2 / r * max(sigma_u, sigma_theta))


def loss_floor(alpha: float, lam: float, lambda0: float, a1: float) -> float:
    if lambda0 <= 0:
        raise AssumptionViolatedError("loss floor needs lambda0 > 0")
    return 2.0 * a1 ** 2 * lam ** 2 / alpha ** 2 / lambda0 ** 4


def loss_bound(t: float, alpha: float, lam: float, lambda0: float,
               a1: float, l0: float) -> float:
    """2 exp(-2 alpha^2 lambda0^2 t) L0 plus the lam^2 / alpha^2 floor."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return (2.0 * math.exp(-2.0 * alpha ** 2 * lambda0 ** 2 * t) * l0
            + loss_floor(alpha, lam, lambda0, a1))


def kl_bound(alpha: float, lam: float, lambda0: float, a1: float,
             a2: float, l0: float) -> float:
    if lambda0 <= 0:
        raise AssumptionViolatedError("KL bound needs lambda0 > 0")
    return (4.0 * a2 ** 2 * l0 + 4.0 * a1 ** 2 * lam) / (alpha ** 2
                                                         * lambda0 ** 4)


def const_b1(g: GConstants, sigma_u: float, sigma_theta: float, d: int,
             n: int) -> float:
    mx = max(sigma_u, sigma_theta)
    return ((4.0 * math.sqrt(2.0 * g.g1 ** 2 * sigma_theta ** 2 * d
                             + g.g2 ** 2)
             + 2.0 * math.sqrt(2.0) * g.g3 * sigma_u) * mx
            + 8.0 * g.g3 * sigma_u * mx * math.sqrt(math.log(n)))


def const_b2(g: GConstants, sigma_u: float, sigma_theta: float,
             m_kl: float) -> ClampedScalar:
    """Second Rademacher coefficient; its log term is clamped at 0 when the
    argument drops below 1 (reported)."""
    mx2 = max(sigma_u, sigma_theta) ** 2
    if m_kl <= 0:
        return ClampedScalar(math.inf, clamped=False)
    log_arg = sigma_u / (8.0 * mx2 * m_kl)
    clamped = log_arg < 1.0
    return ClampedScalar(40.0 * g.g3 * mx2
                         + 16.0 * g.g5 * sigma_u * mx2
                         * math.sqrt(max(math.log(log_arg), 0.0)),
                         clamped)


def _delta_term(n: int, delta: float, factor: float) -> float:
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    return factor * math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def gen_bound_large_alpha(m_kl: float, alpha: float, n: int, delta: float,
                          b1: float, b2: float) -> float:
    """b1 sqrt(M) alpha / sqrt(n) + b2 M alpha + 3 sqrt(log(2/delta)/2n)."""
    if m_kl < 0:
        raise ValueError("divergence budget must be nonnegative")
    tail = _delta_term(n, delta, 3.0)
    if m_kl == 0:
        return tail
    return b1 * math.sqrt(m_kl) * alpha / math.sqrt(n) + b2 * m_kl * alpha + tail


@dataclass(frozen=True)
class PremisedBound:
    value: float
    premises: dict
    vacuous: bool

    @property
    def premises_hold(self) -> bool:
        return all(self.premises.values())


def gen_bound_chi2(chi2: float, n: int, delta: float, b1: float, b2: float,
                   alpha: Optional[float] = None,
                   lam: Optional[float] = None) -> PremisedBound:
    """2 (b1 + b2) sqrt(chi2 / n) + 6 sqrt(log(2/delta)/2n) with the scale
    and regularization premises reported, never enforced."""
    if chi2 < 0:
        raise ValueError("chi-square divergence must be nonnegative")
    value = (2.0 * (b1 + b2) * math.sqrt(chi2 / n)
             + _delta_term(n, delta, 6.0))
    premises = {}
    if alpha is not None:
        need = math.sqrt(n * chi2) * max(2.0 * math.sqrt(lam or 0.0), 1.0)
        premises["alpha_scale"] = alpha >= need
        if lam is not None:
            premises["lambda_budget"] = 4.0 * n * lam * chi2 <= alpha ** 2
    return PremisedBound(value=value, premises=premises, vacuous=value >= 1.0)


def gen_bound_small_alpha(m_kl: float, alpha: float, n: int, delta: float,
                          g7: Optional[float], sigma_u: float) -> float:
    """4 alpha g7 sigma_u sqrt(M / n) + 3 sqrt(log(2/delta)/2n); needs a
    bounded activation and M <= 1/2."""
    if g7 is None:
        raise ValueError("small-scale bound needs a bounded activation")
    if not (0 <= m_kl <= 0.5):
        raise ValueError("divergence budget must lie in [0, 1/2]")
    return (4.0 * alpha * g7 * sigma_u * math.sqrt(m_kl / n)
            + _delta_term(n, delta, 3.0))


def gen_bound_kl_teacher(kl_d: float, alpha: float, n: int, delta: float,
                         g7: Optional[float], sigma_u: float,
                         lam: float) -> PremisedBound:
    """8 g7 sigma_u sqrt(alpha KL / n) + 6 sqrt(log(2/delta)/2n) with the
    regularization premise lam <= alpha / (4 n KL) reported."""
    if g7 is None:
        raise ValueError("teacher KL bound needs a bounded activation")
    if kl_d < 0:
        raise ValueError("KL divergence must be nonnegative")
    value = (8.0 * g7 * sigma_u * math.sqrt(alpha * kl_d / n)
             + _delta_term(n, delta, 6.0))
    premises = {"lambda_budget": kl_d == 0
                or lam <= alpha / (4.0 * n * kl_d)}
    return PremisedBound(value=value, premises=premises, vacuous=value >= 1.0)


def ramp_loss(y_pred, y):
    """Piecewise-linear margin loss: 0 above margin 1/2, linear in between,
    1 on mistakes.  2-Lipschitz in the prediction and dominates the 0-1
    loss."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +-1")
    p = np.asarray(y_pred, dtype=np.float64) * y
    out = np.where(p >= 0.5, 0.0, np.where(p < 0.0, 1.0, 1.0 - 2.0 * p))
    return out if out.ndim else float(out)


def zero_one_loss(y_pred, y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +-1")
    out = (np.asarray(y_pred, dtype=np.float64) * y < 0).astype(np.float64)
    return out if out.ndim else float(out)


def constants_for(g: GConstants, sigma_u: float, sigma_theta: float, d: int,
                  n: int, lam_min: float, l0: float, lam: float,
                  m_kl: float) -> TheoryConstants:
    """Convenience bundle of every constant at a measured spectrum."""
    a1 = const_a1(g, sigma_u, sigma_theta, d)
    a2 = const_a2(g, sigma_u, sigma_theta, d)
    r = const_r(g, sigma_u, sigma_theta, d, n, lam_min)
    b1 = const_b1(g, sigma_u, sigma_theta, d, n)
    b2 = const_b2(g, sigma_u, sigma_theta, m_kl)
    lambda0 = math.sqrt(lam_min / n)
    alpha_min = alpha_threshold(l0, a1, a2, lam, lambda0, r.value,
                                sigma_u, sigma_theta)
    return TheoryConstants(a1=a1, a2=a2, b1=b1, b2=b2.value, r=r.value,
                           lambda0=lambda0, alpha_min=alpha_min,
                           r_clamped=r.clamped, b2_clamped=b2.clamped)
