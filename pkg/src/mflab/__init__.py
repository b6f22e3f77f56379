"""Particle-ensemble simulator and bound-audit toolkit for scaled two-layer
networks trained by noisy gradient descent with weight decay."""

from .activations import Activation, GConstants, audit_constants, get
from .data import Dataset, GaussianTeacher, chi2_to_init, kl_to_init, \
    make_synthetic, teacher_label
from .dynamics import DivergedError, TrajectoryLog, step, train, \
    stationarity_diagnostic
from .kernel import AssumptionViolatedError, GramMatrix, gram_h, gram_h1, \
    gram_h2, kernel_drift, min_eigenvalue, reg_drift
from .model import Ensemble, HyperParams, forward, forward_all, grads, \
    init_ensemble, loss, objective
from .ntk_flow import NtkFlow, closed_form, euler, residual_gap

__version__ = "0.1.0"
