import math

import numpy as np
import pytest

from mflab import theory
from mflab.data import Dataset, make_synthetic
from mflab.dynamics import (DivergedError, FullRecorder, LiteRecorder,
                            TrajectoryLog, noise_scale, stationarity_diagnostic,
                            step, train)
from mflab.model import Ensemble, HyperParams, init_ensemble


def hp_with(**kw):
    base = dict(alpha=1.0, lam=0.0, sigma_u=1.0, sigma_theta=1.0, eta=1e-3,
                d=1, m=4, n=1, seed=3, activation="identity")
    base.update(kw)
    return HyperParams(**base)


def zero_drift_problem(d=3, m=1):
    # tanh vanishes at 0, so the all-zero state on the all-zero dataset has
    # exactly zero drift for any lam
    hp = hp_with(d=d, m=m, activation="tanh", lam=0.02, eta=0.05)
    ds = Dataset(x=np.zeros((1, d)), y=np.zeros(1))
    e = Ensemble(thetas=np.zeros((m, d)), us=np.zeros(m))
    return hp, ds, e


class TestStep:
    def test_interpolation_is_fixed_point(self):
        e = Ensemble(thetas=np.full((4, 1), 1.0), us=np.full(4, 1.0))
        ds = Dataset(x=np.array([[0.7]]), y=np.array([0.7]))
        out = step(e, hp_with(), ds, step_index=0)
        np.testing.assert_array_equal(out.thetas, e.thetas)
        np.testing.assert_array_equal(out.us, e.us)

    def test_noise_free_without_decay(self):
        rng = np.random.default_rng(0)
        e = Ensemble(thetas=rng.standard_normal((6, 2)),
                     us=rng.standard_normal(6))
        ds = make_synthetic(3, 2, seed=1)
        hp = hp_with(d=2, m=6, n=3, lam=0.0)
        a = step(e, hp, ds, step_index=0)
        b = step(e, hp, ds, step_index=999)   # noise stream never consulted
        np.testing.assert_array_equal(a.thetas, b.thetas)
        np.testing.assert_array_equal(a.us, b.us)

    def test_noise_scale_conventions(self):
        hp = hp_with(lam=0.02, eta=0.05)
        assert noise_scale(hp) == pytest.approx(math.sqrt(2 * 0.02 * 0.05))
        assert noise_scale(hp, literal=True) == pytest.approx(
            math.sqrt(0.02) * (2 * 0.05) ** 0.25)
        assert noise_scale(hp_with(lam=0.0)) == 0.0

    def test_increment_variance_matches_diffusion(self):
        # 2e4-step smoke version of the full calibration in the acceptance
        # suite
        hp, ds, e = zero_drift_problem(d=3, m=1)
        incs = []
        for k in range(20_000):
            out = step(e, hp, ds, step_index=k)
            incs.append(np.concatenate([out.thetas.ravel(), out.us]))
        incs = np.asarray(incs)
        target = 2.0 * hp.lam * hp.eta
        assert np.all(np.abs(np.var(incs, axis=0) / target - 1.0) <= 0.05)

    def test_literal_variance_convention(self):
        hp, ds, e = zero_drift_problem(d=2, m=1)
        incs = []
        for k in range(20_000):
            out = step(e, hp, ds, step_index=k, noise_variance_literal=True)
            incs.append(np.concatenate([out.thetas.ravel(), out.us]))
        target = hp.lam * math.sqrt(2.0 * hp.eta)
        assert np.all(np.abs(np.var(np.asarray(incs), axis=0) / target - 1.0)
                      <= 0.05)

    def test_divergence_guard(self):
        e = Ensemble(thetas=np.array([[1.0]]), us=np.array([1.0]))
        ds = Dataset(x=np.array([[1.0]]), y=np.array([-1.0]))
        hp = hp_with(alpha=100.0, eta=1e6)
        with pytest.raises(DivergedError) as err:
            step(e, hp, ds, step_index=17)
        assert err.value.step == 17

    def test_same_step_same_noise(self):
        hp, ds, e = zero_drift_problem(d=2, m=3)
        a = step(e, hp, ds, step_index=5)
        b = step(e, hp, ds, step_index=5)
        np.testing.assert_array_equal(a.us, b.us)
        c = step(e, hp, ds, step_index=6)
        assert not np.array_equal(a.us, c.us)


class TestTrain:
    def test_rejects_zero_steps(self):
        hp = hp_with()
        ds = Dataset(x=np.array([[1.0]]), y=np.array([1.0]))
        with pytest.raises(ValueError):
            train(hp, ds, steps=0)

    def test_deterministic_log(self):
        hp = hp_with(d=2, m=32, n=4, lam=1e-2, eta=0.01, alpha=2.0,
                     activation="tanh", seed=21)
        ds = make_synthetic(4, 2, seed=2)
        a = train(hp, ds, steps=40, record_every=10)
        b = train(hp, ds, steps=40, record_every=10)
        assert a.log.rows == b.log.rows
        np.testing.assert_array_equal(a.final.us, b.final.us)

    def test_one_dim_linear_regression_oracle(self):
        # identity activation on a single (x=1, y=1) point: the residual
        # contracts at rate 2 alpha^2 (sigma_u^2 + sigma_theta^2) in the wide
        # limit; loss must pass below 1e-6 within that analytic horizon
        hp = hp_with(alpha=2.0, m=20_000, eta=2e-3, seed=5,
                     activation="identity")
        ds = Dataset(x=np.array([[1.0]]), y=np.array([1.0]))
        rate = 2.0 * hp.alpha ** 2 * (hp.sigma_u ** 2 + hp.sigma_theta ** 2)
        horizon = math.log(4e3) / rate          # loss 1e-6 allowing l0 ~ 4
        steps = int(math.ceil(horizon / hp.eta))
        result = train(hp, ds, steps=steps, record_every=max(1, steps // 50),
                       recorder_factory=LiteRecorder)
        losses = result.log.column("loss")
        assert losses[-1] < 1e-6
        assert np.all(np.diff(losses) <= 1e-12)
        # the oracle rate is the linearization at init: fit the early window
        # (kernel growth from layer co-adaptation accelerates later decay)
        ts = result.log.column("t")
        keep = losses > losses[0] * math.exp(-3.0)
        slope = np.polyfit(ts[keep], np.log(losses[keep]), 1)[0]
        assert slope == pytest.approx(-2.0 * rate, rel=0.05)

    def test_records_include_endpoints(self):
        hp = hp_with(d=1, m=8, eta=0.01)
        ds = Dataset(x=np.array([[1.0]]), y=np.array([1.0]))
        result = train(hp, ds, steps=7, record_every=3,
                       recorder_factory=LiteRecorder)
        assert [r["step"] for r in result.log.rows] == [0, 3, 6, 7]
        for r in result.log.rows:
            assert r["t"] == r["step"] * hp.eta

    def test_full_recorder_columns_finite(self):
        hp = hp_with(d=2, m=64, n=4, lam=1e-3, eta=0.01, alpha=4.0,
                     activation="tanh", seed=11)
        ds = make_synthetic(4, 2, seed=9, distinct=True)
        result = train(hp, ds, steps=20, record_every=10)
        for row in result.log.rows:
            for key, val in row.items():
                assert np.isfinite(val), (key, val)

    def test_propagates_divergence_step(self):
        hp = hp_with(alpha=500.0, m=16, eta=10.0, activation="identity")
        ds = Dataset(x=np.array([[1.0]]), y=np.array([1.0]))
        with pytest.raises(DivergedError):
            train(hp, ds, steps=100, recorder_factory=LiteRecorder)


class TestTrajectoryLogInvariants:
    def test_strictly_increasing_steps(self):
        log = TrajectoryLog()
        row = dict.fromkeys(
            ("step", "t", "loss", "objective", "kl_surrogate", "w2_estimate",
             "kernel_drift_inf", "residual_gap", "energy", "reg_drift_norm"),
            0.0)
        log.append(row)
        with pytest.raises(ValueError):
            log.append(row)

    def test_csv_column_order(self, tmp_path):
        hp = hp_with(d=1, m=8, eta=0.01)
        ds = Dataset(x=np.array([[1.0]]), y=np.array([1.0]))
        result = train(hp, ds, steps=2, recorder_factory=LiteRecorder)
        path = tmp_path / "trajectory.csv"
        result.log.to_csv(path, header_comments=("seed=3",))
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=3"
        assert lines[1] == ("step,t,loss,objective,kl_surrogate,w2_estimate,"
                            "kernel_drift_inf,residual_gap,energy,"
                            "reg_drift_norm")


class TestStationarity:
    def _log_from_losses(self, losses, eta=1.0):
        log = TrajectoryLog()
        for k, l in enumerate(losses):
            log.append({"step": k, "t": k * eta, "loss": float(l),
                        "objective": float(l), "kl_surrogate": 0.0,
                        "w2_estimate": 0.0, "kernel_drift_inf": 0.0,
                        "residual_gap": 0.0, "energy": float(l),
                        "reg_drift_norm": 0.0})
        return log

    def test_decaying_to_zero(self):
        log = self._log_from_losses(np.exp(-0.5 * np.arange(40.0)))
        rep = stationarity_diagnostic(log)
        assert rep.plateau < 1e-7

    def test_constant_sequence(self):
        log = self._log_from_losses(np.full(25, 0.37))
        rep = stationarity_diagnostic(log)
        assert rep.plateau == pytest.approx(0.37)
        assert rep.entry_step == 0

    def test_exponential_plus_floor(self):
        t = np.arange(200.0)
        floor = 0.05
        log = self._log_from_losses(2.0 * np.exp(-0.08 * t) + floor)
        rep = stationarity_diagnostic(log)
        assert abs(rep.plateau - floor) <= 0.1 * floor
        entered = 2.0 * np.exp(-0.08 * rep.entry_step) + floor
        assert entered <= 2.0 * rep.plateau + 1e-12

    def test_requires_enough_records(self):
        log = self._log_from_losses(np.ones(5))
        with pytest.raises(ValueError):
            stationarity_diagnostic(log)


class TestTrajectoryInequalities:
    def test_reg_drift_stays_under_a1_and_talagrand_chain(self):
        hp = hp_with(d=3, m=2048, n=5, lam=1e-3, eta=5e-3, alpha=8.0,
                     activation="tanh", seed=13)
        ds = make_synthetic(5, 3, seed=4, distinct=True)
        result = train(hp, ds, steps=200, record_every=20)
        g = hp.act.constants()
        a1 = theory.const_a1(g, hp.sigma_u, hp.sigma_theta, hp.d)
        moment_scale = math.sqrt(hp.sigma_theta ** 2 * hp.d + hp.sigma_u ** 2)
        w0 = result.log.rows[0]["w2_estimate"]
        for row in result.log.rows:
            if row["w2_estimate"] <= moment_scale:
                assert row["reg_drift_norm"] <= a1
            kl = max(row["kl_surrogate"], 0.0)
            chain = 2.0 * max(hp.sigma_u, hp.sigma_theta) * math.sqrt(kl)
            assert row["w2_estimate"] <= chain + w0 + 0.05
