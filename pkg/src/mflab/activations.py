"""Scalar activations with derivatives up to third order and their
smoothness constants.

Four analytic activations are shipped: tanh (default), sigmoid, identity and
softplus.  Each evaluates jointly with its first three derivatives, and each
carries a frozen set of envelope constants

    |h(z)| <= g1|z| + g2,   |h'(z)| <= g3,   |h''(z)| <= g4,
    |(z h'(z))'| <= g5,     |h'''(z)| <= g6,

plus, for bounded activations, a uniform bound g7 on |h|.  The constants were
obtained by dense grid maximization on |z| <= 20 and rounded UP at the fourth
decimal so the inequality direction is preserved.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit as _sigmoid

ACTIVATION_NAMES = ("tanh", "sigmoid", "identity", "softplus")


@dataclass(frozen=True)
class GConstants:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float
    g6: float
    g7: Optional[float] = None  # present only for bounded activations


@dataclass(frozen=True)
class Activation:
    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATION_NAMES:
            raise ValueError(f"unknown activation {self.kind!r}; "
                             f"expected one of {ACTIVATION_NAMES}")

    def eval(self, z):
        """Value and first three derivatives at z (scalar or array)."""
        return _EVAL[self.kind](np.asarray(z, dtype=np.float64))

    def value(self, z):
        return _VALUE[self.kind](np.asarray(z, dtype=np.float64))

    def value_d1(self, z):
        """Value and first derivative only; the training-loop hot path."""
        return _VALUE_D1[self.kind](np.asarray(z, dtype=np.float64))

    def d1(self, z):
        return _D1[self.kind](np.asarray(z, dtype=np.float64))

    def d2(self, z):
        return _D2[self.kind](np.asarray(z, dtype=np.float64))

    def constants(self) -> GConstants:
        return _CONSTANTS[self.kind]

    @property
    def bounded(self) -> bool:
        return _CONSTANTS[self.kind].g7 is not None


def _eval_tanh(z):
    t = np.tanh(z)
    p = 1.0 - t * t
    return t, p, -2.0 * t * p, -2.0 * p * (1.0 - 3.0 * t * t)


def _eval_sigmoid(z):
    s = _sigmoid(z)
    p = s * (1.0 - s)
    return s, p, p * (1.0 - 2.0 * s), p * (1.0 - 6.0 * s + 6.0 * s * s)


def _eval_identity(z):
    one = np.ones_like(z)
    zero = np.zeros_like(z)
    return z, one, zero, zero


def _eval_softplus(z):
    s = _sigmoid(z)
    p = s * (1.0 - s)
    return np.logaddexp(0.0, z), s, p, p * (1.0 - 2.0 * s)


def _value_d1_tanh(z):
    t = np.tanh(z)
    return t, 1.0 - t * t


def _value_d1_sigmoid(z):
    s = _sigmoid(z)
    return s, s * (1.0 - s)


def _value_d1_identity(z):
    return z, np.ones_like(z)


def _value_d1_softplus(z):
    return np.logaddexp(0.0, z), _sigmoid(z)


_EVAL = {
    "tanh": _eval_tanh,
    "sigmoid": _eval_sigmoid,
    "identity": _eval_identity,
    "softplus": _eval_softplus,
}
_VALUE_D1 = {
    "tanh": _value_d1_tanh,
    "sigmoid": _value_d1_sigmoid,
    "identity": _value_d1_identity,
    "softplus": _value_d1_softplus,
}
_VALUE = {k: (lambda z, f=f: f(z)[0]) for k, f in _VALUE_D1.items()}
_D1 = {k: (lambda z, f=f: f(z)[1]) for k, f in _VALUE_D1.items()}
_D2 = {k: (lambda z, f=f: f(z)[2]) for k, f in _EVAL.items()}

# Grid-maximized envelopes, rounded up at 1e-4. Bounded activations use the
# constant envelope (g1 = 0) because it gives the smaller downstream bound
# constants whenever sigma_theta^2 * d >= 1.
_CONSTANTS = {
    "identity": GConstants(g1=1.0, g2=0.0, g3=1.0, g4=0.0, g5=1.0, g6=0.0),
    "tanh": GConstants(g1=0.0, g2=1.0, g3=1.0, g4=0.7699, g5=1.0, g6=2.0,
                       g7=1.0),
    "sigmoid": GConstants(g1=0.0, g2=1.0, g3=0.25, g4=0.0963, g5=0.25,
                          g6=0.125, g7=1.0),
    "softplus": GConstants(g1=1.0, g2=0.6932, g3=1.0, g4=0.25, g5=1.0999,
                           g6=0.0963),
}


@dataclass(frozen=True)
class ConstantAuditReport:
    kind: str
    grid_size: int
    margins: dict          # inequality name -> max violation (<= 0 is good)
    passed: bool


def audit_constants(act: Activation, g: GConstants,
                    grid_size: int = 1_000_000,
                    z_max: float = 20.0) -> ConstantAuditReport:
    """Re-check the envelope inequalities on a dense grid.

    A margin is max(|quantity| - bound) over the grid; the audit passes iff
    every margin is <= 0.
    """
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1e3")
    z = np.linspace(-z_max, z_max, grid_size)
    h, h1, h2, h3 = act.eval(z)
    margins = {
        "value_affine": float(np.max(np.abs(h) - (g.g1 * np.abs(z) + g.g2))),
        "d1": float(np.max(np.abs(h1)) - g.g3),
        "d2": float(np.max(np.abs(h2)) - g.g4),
        "z_d1_product": float(np.max(np.abs(h1 + z * h2)) - g.g5),
        "d3": float(np.max(np.abs(h3)) - g.g6),
    }
    if g.g7 is not None:
        margins["uniform"] = float(np.max(np.abs(h)) - g.g7)
    passed = all(v <= 0.0 for v in margins.values())
    return ConstantAuditReport(kind=act.kind, grid_size=grid_size,
                               margins=margins, passed=passed)


def get(name: str) -> Activation:
    return Activation(name)
