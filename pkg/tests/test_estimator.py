import numpy as np
import pytest

from cellstring.errors import DomainError
from cellstring.estimator import KalmanConfig, ResistanceEstimator


def synthetic_streams(r_ohm, duration_s=300.0, sample_hz=10.0, amp_a=5.0,
                      noise_v=0.0, seed=0):
    t = np.arange(0, duration_s, 1.0 / sample_hz)
    i_f = amp_a * np.sin(2 * np.pi * 0.5 * t)
    v_f = -r_ohm * i_f
    if noise_v > 0:
        v_f = v_f + np.random.default_rng(seed).normal(0.0, noise_v, v_f.size)
    return t, v_f, i_f


class TestKalmanConfig:
    def test_defaults_valid(self):
        cfg = KalmanConfig()
        assert cfg.rs0_ohm == pytest.approx(10e-3)
        assert cfg.warmup_s == 60.0

    @pytest.mark.parametrize("kw", [
        {"p0_var": 0.0}, {"r_meas": 0.0}, {"q_process": -1.0},
        {"i_min_a": 0.0}, {"conv_window_s": 0.0}, {"warmup_s": -1.0},
    ])
    def test_invalid_tuning_rejected(self, kw):
        with pytest.raises(DomainError):
            KalmanConfig(**kw)


class TestConvergenceToTruth:
    def test_noiseless_regression_converges_within_half_percent_by_100s(self):
        r = 3.17e-3
        _, v_f, i_f = synthetic_streams(r, duration_s=100.0)
        est = ResistanceEstimator(KalmanConfig(), 10.0).run(v_f, i_f)
        assert est.rs_hat_ohm == pytest.approx(r, rel=5e-3)
        assert est.n_updates > 0

    def test_convergence_flag_and_time(self):
        r = 3.17e-3
        _, v_f, i_f = synthetic_streams(r, duration_s=300.0)
        est = ResistanceEstimator(KalmanConfig(), 10.0).run(v_f, i_f)
        assert est.converged
        # warm-up 60 s plus a 30 s flat window: flag comes up just past 90 s
        assert 90.0 <= est.convergence_time_s <= 150.0
        # a converged flag implies a well-populated update window
        assert est.n_updates >= 150

    def test_zero_current_stream_learns_nothing(self):
        cfg = KalmanConfig()
        runner = ResistanceEstimator(cfg, 10.0)
        n = 2000
        est = runner.run(np.zeros(n), np.zeros(n))
        assert est.rs_hat_ohm == cfg.rs0_ohm
        assert est.n_updates == 0
        assert not est.converged
        # predict-only: p grows by q for every post-warmup sample
        n_post = n - int(cfg.warmup_s * 10.0)
        assert est.p_var == pytest.approx(cfg.p0_var + n_post * cfg.q_process, rel=1e-12)

    def test_warmup_samples_are_discarded(self):
        cfg = KalmanConfig(warmup_s=60.0)
        runner = ResistanceEstimator(cfg, 10.0)
        for _ in range(599):
            snap = runner.update(1.0, 1.0)
        assert snap.n_updates == 0
        assert snap.warmup_remaining_s == pytest.approx(0.1, abs=1e-9)
        snap = runner.update(1.0, 1.0)  # t = 59.9 s, still inside
        assert snap.n_updates == 0
        snap = runner.update(1.0, 1.0)  # t = 60.0 s, first accepted
        assert snap.n_updates == 1


class TestEstimatorProperties:
    def test_scale_equivariance(self):
        # needs the unscaled run converged well past 1e-6 itself
        r = 2.2e-3
        _, v_f, i_f = synthetic_streams(r, duration_s=600.0)
        a = ResistanceEstimator(KalmanConfig(), 10.0).run(v_f, i_f)
        b = ResistanceEstimator(KalmanConfig(), 10.0).run(1e3 * v_f, 1e3 * i_f)
        assert b.rs_hat_ohm == pytest.approx(a.rs_hat_ohm, rel=1e-6)

    def test_sign_robustness(self):
        r = 2.2e-3
        _, v_f, i_f = synthetic_streams(r, duration_s=200.0)
        a = ResistanceEstimator(KalmanConfig(), 10.0).run(v_f, i_f)
        b = ResistanceEstimator(KalmanConfig(), 10.0).run(-v_f, -i_f)
        assert b.rs_hat_ohm == pytest.approx(a.rs_hat_ohm, rel=1e-12)

    def test_unbiased_under_measurement_noise(self):
        r = 3.17e-3
        cfg = KalmanConfig(warmup_s=0.0)
        finals = []
        for rep in range(50):
            _, v_f, i_f = synthetic_streams(r, duration_s=120.0, amp_a=2.0,
                                            noise_v=1e-3, seed=rep)
            finals.append(ResistanceEstimator(cfg, 10.0).run(v_f, i_f).rs_hat_ohm)
        finals = np.asarray(finals)
        se = finals.std(ddof=1) / np.sqrt(len(finals))
        assert abs(finals.mean() - r) <= 3.0 * se

    def test_variance_nonincreasing_with_zero_process_noise(self):
        cfg = KalmanConfig(q_process=0.0, warmup_s=0.0)
        runner = ResistanceEstimator(cfg, 10.0)
        _, v_f, i_f = synthetic_streams(3e-3, duration_s=50.0)
        prev = cfg.p0_var
        for v, i in zip(v_f, i_f):
            snap = runner.update(float(v), float(i))
            assert snap.p_var <= prev + 1e-30
            prev = snap.p_var

    def test_low_current_guard_skips_update(self):
        cfg = KalmanConfig(warmup_s=0.0, i_min_a=0.05)
        runner = ResistanceEstimator(cfg, 10.0)
        snap = runner.update(1.0, 0.01)  # below the guard
        assert snap.n_updates == 0
        snap = runner.update(-3e-3, 1.0)
        assert snap.n_updates == 1

    def test_nonfinite_samples_rejected_with_counter(self):
        cfg = KalmanConfig(warmup_s=0.0)
        runner = ResistanceEstimator(cfg, 10.0)
        snap = runner.update(float("nan"), 1.0)
        assert snap.n_rejected == 1
        snap = runner.update(0.0, float("inf"))
        assert snap.n_rejected == 2
        assert snap.n_updates == 0

    def test_dc_only_stream_never_converges(self):
        cfg = KalmanConfig()
        runner = ResistanceEstimator(cfg, 10.0)
        est = runner.run(np.full(3000, 0.2), np.zeros(3000))
        assert not est.converged
        assert est.convergence_time_s is None

    def test_trace_recording(self):
        runner = ResistanceEstimator(KalmanConfig(warmup_s=0.0), 10.0, record=True)
        runner.run(np.array([-3e-3, -3e-3]), np.array([1.0, 1.0]))
        assert len(runner.trace) == 2
        t, v_f, i_f, rs, p, accepted = runner.trace[0]
        assert (t, v_f, i_f, accepted) == (0.0, -3e-3, 1.0, 1)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(DomainError):
            ResistanceEstimator(KalmanConfig(), 10.0).run(np.zeros(3), np.zeros(4))
