import math

import numpy as np
import pytest

from phasebench import readout_physics as rp

CHI = 2 * math.pi * 2.9e6
KAPPA = 2 * math.pi * 5.7e6


def model(**kw):
    base = dict(chi=CHI, kappa=KAPPA, epsilon=5e6, delta_r=2e6,
                gamma2=2.4e4, t_pulse=400e-9)
    base.update(kw)
    return rp.ReadoutModel(**base)


class TestResonatorAlpha:
    def test_starts_empty(self):
        assert rp.resonator_alpha(0.0, 0, model()) == 0.0

    def test_steady_state(self):
        m = model(t_pulse=2e-6)
        d = m.kappa / 2 + 1j * (m.delta_r + m.chi_of(1))
        want = -1j * m.epsilon / d
        got = rp.resonator_alpha(1.9e-6, 1, m)
        assert abs(got - want) / abs(want) < 1e-6

    def test_empties_after_pulse(self):
        assert abs(rp.resonator_alpha(50e-6, 0, model())) < 1e-12

    def test_continuous_at_pulse_edge(self):
        m = model()
        d = m.kappa / 2 + 1j * (m.delta_r + m.chi_of(0))
        during_at_edge = -1j * m.epsilon * (1 - np.exp(-m.t_pulse * d)) / d
        # force the after-pulse branch to evaluate at the edge
        shifted = m.with_(t_pulse=m.t_pulse * (1 - 1e-15))
        after_at_edge = rp.resonator_alpha(m.t_pulse, 0, shifted)
        assert abs(during_at_edge - after_at_edge) < 1e-12 * abs(
            during_at_edge)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            rp.resonator_alpha(-1e-9, 0, model())


class TestStarkAndDephasing:
    def test_zero_drive(self):
        om, ga = rp.stark_and_dephasing(100e-9, model(epsilon=0.0))
        assert om == 0.0 and ga == 0.0

    def test_zero_chi(self):
        om, ga = rp.stark_and_dephasing(100e-9, model(chi=0.0))
        assert abs(om) < 1e-12 and abs(ga) < 1e-12

    def test_steady_state_closed_form_on_resonance(self):
        m = model(delta_r=0.0, t_pulse=3e-6)
        om, ga = rp.stark_and_dephasing(2.9e-6, m)
        eps2 = m.epsilon ** 2
        den = (m.kappa ** 2 / 4 + m.chi ** 2) ** 2
        want_om = -2 * m.chi * eps2 * (m.kappa ** 2 / 4 - m.chi ** 2) / den
        want_ga = 2 * m.chi ** 2 * m.kappa * eps2 / den
        assert abs(om - want_om) / abs(want_om) < 1e-5
        assert abs(ga - want_ga) / abs(want_ga) < 1e-5

    def test_dephasing_nonnegative_on_resonance_during_drive(self):
        # after the pulse the product spirals at 2*chi and Im oscillates,
        # so the non-negativity property belongs to the drive window
        m = model(delta_r=0.0)
        ts = np.linspace(1e-9, m.t_pulse, 200)
        _, ga = rp.stark_and_dephasing(ts, m)
        assert np.all(ga >= -1e-9)


class TestBlochIntegrate:
    def test_no_drive_is_constant(self):
        m = model(epsilon=0.0, gamma2=0.0)
        _, xs, ys = rp.bloch_integrate(0.6, -0.3, m, 1e-6, 1e-9)
        assert abs(xs[-1] - 0.6) < 1e-12
        assert abs(ys[-1] + 0.3) < 1e-12

    def test_constant_rotation_preserves_norm(self):
        n_steps = 10_000
        om = np.full(2 * n_steps + 1, 2 * math.pi * 1e6)
        ga = np.zeros(2 * n_steps + 1)
        xs, ys = rp.rk4_bloch(1.0, 0.0, om, ga, 1e-9)
        norms = xs ** 2 + ys ** 2
        assert np.abs(norms - 1.0).max() < 1e-8

    def test_constant_decay_closed_form(self):
        n_steps = 2000
        rate = 3e5
        om = np.zeros(2 * n_steps + 1)
        ga = np.full(2 * n_steps + 1, rate)
        xs, _ = rp.rk4_bloch(1.0, 0.0, om, ga, 1e-9)
        want = math.exp(-rate * n_steps * 1e-9)
        assert abs(xs[-1] - want) / want < 1e-6

    def test_step_size_guard(self):
        with pytest.raises(ValueError):
            rp.bloch_integrate(1.0, 0.0, model(), 1e-6, 1e-7)


class TestDressedDephasing:
    SWEEP = 2 * math.pi * np.linspace(-12e6, 12e6, 21)

    def test_flat_baseline_without_drive(self):
        m = model(epsilon=0.0)
        px, my = rp.dressed_dephasing_signal(self.SWEEP, m)
        assert np.allclose(px, 1 + math.exp(-m.gamma2 * 900e-9), atol=1e-9)
        assert np.allclose(my, 1.0, atol=1e-9)

    def test_low_photon_drive_resolves_features(self):
        nbar = 0.04
        eps = math.sqrt(nbar * ((KAPPA / 2) ** 2 + CHI ** 2))
        px, _ = rp.dressed_dephasing_signal(self.SWEEP, model(epsilon=eps))
        assert px.max() - px.min() > 1e-3

    def test_x_curve_symmetric_under_detuning_flip(self):
        m = model(gamma2=0.0, delta_r=0.0)
        px_pos, _ = rp.dressed_dephasing_curves(self.SWEEP, m)
        px_neg, _ = rp.dressed_dephasing_curves(-self.SWEEP, m)
        assert np.abs(px_pos - px_neg).max() < 1e-12

    def test_closed_form_matches_rk4(self):
        m = model()
        px1, my1 = rp.dressed_dephasing_signal(self.SWEEP, m, dt=1e-9)
        px2, my2 = rp.dressed_dephasing_curves(self.SWEEP, m)
        assert np.abs(px1 - px2).max() < 1e-6
        assert np.abs(my1 - my2).max() < 1e-6


class TestDressedFit:
    SWEEP = 2 * math.pi * np.linspace(-12e6, 12e6, 41)

    def _truth_curves(self, nbars=(0.04, 0.28)):
        truth = model(delta_r=0.0)
        scale = math.sqrt((KAPPA / 2) ** 2 + CHI ** 2)
        eps = [math.sqrt(nb) * scale for nb in nbars]
        curves = [rp.dressed_dephasing_signal(
            self.SWEEP, truth.with_(epsilon=e)) for e in eps]
        return truth, eps, curves

    def test_noiseless_recovery_within_one_percent(self):
        truth, eps, curves = self._truth_curves()
        start = truth.with_(chi=CHI * 1.4, kappa=KAPPA * 0.7, epsilon=eps[0])
        fit = rp.fit_dressed_dephasing(self.SWEEP, curves, start)
        assert abs(fit.params["chi"] - CHI) / CHI < 0.01
        assert abs(fit.params["kappa"] - KAPPA) / KAPPA < 0.01

    def test_noisy_recovery_within_five_percent(self):
        truth, eps, curves = self._truth_curves()
        rng = np.random.default_rng(12)
        noisy = [(a + rng.normal(scale=0.01, size=a.shape),
                  b + rng.normal(scale=0.01, size=b.shape))
                 for a, b in curves]
        start = truth.with_(chi=CHI * 1.4, kappa=KAPPA * 0.7, epsilon=eps[0])
        fit = rp.fit_dressed_dephasing(self.SWEEP, noisy, start)
        assert abs(fit.params["chi"] - CHI) / CHI < 0.05
        assert abs(fit.params["kappa"] - KAPPA) / KAPPA < 0.05

    def test_requires_two_amplitudes(self):
        truth, eps, curves = self._truth_curves()
        with pytest.raises(ValueError):
            rp.fit_dressed_dephasing(self.SWEEP, curves[:1], truth)

    def test_nbar_extrapolates_to_algorithm_power(self):
        # photon number linear in drive power; line built through the truth
        amps_sq = [1e-4, 6.25e-4]
        nbars = [0.04, 0.28]
        target = amps_sq[0] + (11.0 - nbars[0]) * (amps_sq[1] - amps_sq[0]) \
            / (nbars[1] - nbars[0])
        assert abs(rp.nbar_extrapolate(amps_sq, nbars, target) - 11.0) < 1e-9


class TestEchoSignal:
    def _model(self, **kw):
        base = dict(chi=CHI, kappa=KAPPA, n0=3.8,
                    gamma2=-math.log(0.8) / 5e-6, t_ramsey=5e-6)
        base.update(kw)
        return rp.ReadoutModel(**base)

    def test_no_photons_floor(self):
        m = self._model(n0=0.0)
        for t in (0.0, 1e-7, 1e-6):
            assert abs(rp.echo_signal(t, m) - 0.1) < 1e-12

    def test_long_delay_floor(self):
        assert abs(rp.echo_signal(1e-3, self._model()) - 0.1) < 1e-12

    def test_chi_zero_is_smooth(self):
        m = self._model(chi=0.0)
        s = rp.echo_signal(np.linspace(0, 1e-6, 10), m)
        assert np.all(np.isfinite(s))
        assert abs(s[-1] - 0.1) < 1e-3

    def test_envelope_contracts_at_late_times(self):
        m = self._model()
        ts = np.linspace(3 / KAPPA, 1.5e-6, 40)
        dev = np.abs(rp.echo_signal(ts, m) - 0.1)
        bound = dev[0] * np.exp(-KAPPA * (ts - ts[0])) * math.e
        assert np.all(dev <= bound + 1e-12)

    def test_warns_outside_regime(self):
        with pytest.warns(UserWarning):
            rp.echo_signal(0.0, self._model(t_ramsey=1e-7))


class TestPhotonNumberFit:
    def test_noiseless_round_trip_exact(self):
        m = rp.ReadoutModel(chi=CHI, kappa=KAPPA, n0=3.8,
                            gamma2=-math.log(0.8) / 5e-6, t_ramsey=5e-6)
        t = np.linspace(0, 1.2e-6, 60)
        fit = rp.fit_photon_number(t, rp.echo_signal(t, m), CHI, KAPPA)
        assert abs(fit.params["n0"] - 3.8) < 1e-6
        assert abs(fit.params["alpha_c"] - 0.8) < 1e-6

    def test_gate_length_correction_factor(self):
        assert abs(math.exp(KAPPA * 30e-9) - 2.928) < 0.01

    def test_distinguishability_reported(self):
        m = rp.ReadoutModel(chi=CHI, kappa=KAPPA, n0=3.8,
                            gamma2=-math.log(0.8) / 5e-6, t_ramsey=5e-6)
        t = np.linspace(0, 1.2e-6, 60)
        fit = rp.fit_photon_number(t, rp.echo_signal(t, m), CHI, KAPPA)
        beta = rp.echo_beta(CHI, KAPPA)
        assert abs(fit.params["distinguishability"]
                   - 4 * beta * fit.params["n0"]) < 1e-9


class TestNCrit:
    ALPHA = -2 * math.pi * 343.1e6
    DELTA = 2 * math.pi * (5.3634e9 - 7.01325e9)

    def test_device_value_near_23(self):
        nc = rp.n_crit(self.ALPHA, self.DELTA, CHI)
        assert abs(nc - 23.0) / 23.0 < 0.10

    def test_chi_zero_guarded(self):
        with pytest.raises(ZeroDivisionError):
            rp.n_crit(self.ALPHA, self.DELTA, 0.0)

    def test_scaling_in_chi(self):
        a = rp.n_crit(self.ALPHA, self.DELTA, CHI)
        b = rp.n_crit(self.ALPHA, self.DELTA, 2 * CHI)
        assert abs(a / b - 2.0) < 1e-12


class TestHellinger:
    def test_identical_distributions(self):
        assert rp.hellinger_sq([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_disjoint_support(self):
        assert rp.hellinger_sq([1, 0], [0, 1]) == 1.0

    def test_reset_error_form(self):
        for p1 in (0.0, 0.0165, 0.2):
            got = rp.hellinger_sq([1 - p1, p1], [1, 0])
            assert abs(got - (1 - math.sqrt(1 - p1))) < 1e-12

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.random(4)
            q = rng.random(4)
            p, q = p / p.sum(), q / q.sum()
            a = rp.hellinger_sq(p, q)
            assert abs(a - rp.hellinger_sq(q, p)) < 1e-12
            assert 0.0 <= a <= 1.0 + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rp.hellinger_sq([1.0], [0.5, 0.5])


class TestMatchedFilter:
    def _readout_model(self):
        eps = 0.35 * math.sqrt((KAPPA / 2) ** 2 + CHI ** 2)
        return rp.ReadoutModel(chi=CHI, kappa=KAPPA, epsilon=eps,
                               t_pulse=300e-9)

    def test_zero_separation_is_coin_flip(self):
        m = self._readout_model().with_(chi=0.0)   # identical trajectories
        rng = np.random.default_rng(4)
        t0, t1 = rp.synth_iq_traces(m, 2000, 0.5, 80, 4e-9, rng)
        kernel, thr = rp.matched_filter(t0, t1)   # fits noise only
        h0, h1 = rp.synth_iq_traces(m, 2000, 0.5, 80, 4e-9, rng)
        err = rp.assignment_error([h0, h1], kernel, thr)
        assert abs(err - 0.5) < 0.05

    def test_exactly_identical_means_degenerate(self):
        m = self._readout_model().with_(chi=0.0)
        rng = np.random.default_rng(4)
        t0, t1 = rp.synth_iq_traces(m, 200, 0.0, 80, 4e-9, rng)
        with pytest.raises(ValueError):
            rp.matched_filter(t0, t1)

    def test_mean_traces_classify_correctly(self):
        m = self._readout_model()
        rng = np.random.default_rng(5)
        t0, t1 = rp.synth_iq_traces(m, 300, 0.05, 80, 4e-9, rng)
        kernel, thr = rp.matched_filter(t0, t1)
        ts = (np.arange(80) + 0.5) * 4e-9
        assert rp.discriminate(rp.resonator_alpha(ts, 0, m), kernel, thr) == 0
        assert rp.discriminate(rp.resonator_alpha(ts, 1, m), kernel, thr) == 1

    def test_gaussian_error_matches_tail_integral(self):
        m = self._readout_model()
        rng = np.random.default_rng(6)
        sigma = rp.noise_sigma_for_separation(m, 80, 4e-9, 12.0)
        t0, t1 = rp.synth_iq_traces(m, 30_000, sigma, 80, 4e-9, rng)
        kernel, thr = rp.matched_filter(t0, t1)
        s0 = rp.project_scores(t0.traces, kernel)
        s1 = rp.project_scores(t1.traces, kernel)
        d = s0.mean() - s1.mean()
        sd = math.sqrt((s0.var() + s1.var()) / 2)
        predicted = 0.5 * math.erfc(d / (2 * sd * math.sqrt(2)))
        err = rp.assignment_error([t0, t1], kernel, thr)
        n = t0.traces.shape[0] + t1.traces.shape[0]
        assert abs(err - predicted) < 3 * math.sqrt(predicted * (1 - predicted)
                                                    / n) + 1e-9

    def test_projection_confidence_at_separation_46(self):
        m = self._readout_model()
        rng = np.random.default_rng(7)
        sigma = rp.noise_sigma_for_separation(m, 80, 4e-9, 46.0)
        t0, t1 = rp.synth_iq_traces(m, 2000, sigma, 80, 4e-9, rng)
        kernel, thr = rp.matched_filter(t0, t1)
        bits = [rp.discriminate(tr, kernel, thr) for tr in t0.traces]
        assert np.mean(bits) < 0.01      # label 0 above threshold >99%

    def test_decay_limited_error_near_reference(self):
        # at Fisher separation 46 the Gaussian tails are ~1e-6; relaxation
        # during the 320 ns window dominates and lands near 3e-3
        m = self._readout_model()
        rng = np.random.default_rng(8)
        sigma = rp.noise_sigma_for_separation(m, 80, 4e-9, 46.0)
        t0, t1 = rp.synth_iq_traces(m, 20_000, sigma, 80, 4e-9, rng,
                                    t1=49.23e-6)
        kernel, thr = rp.matched_filter(t0, t1)
        fisher = rp.fisher_separation(rp.project_scores(t0.traces, kernel),
                                      rp.project_scores(t1.traces, kernel))
        assert 25.0 < fisher < 60.0
        err = rp.assignment_error([t0, t1], kernel, thr)
        assert 1e-3 < err < 9e-3

    def test_minimum_traces_enforced(self):
        m = self._readout_model()
        rng = np.random.default_rng(9)
        t0, t1 = rp.synth_iq_traces(m, 50, 0.1, 80, 4e-9, rng)
        with pytest.raises(ValueError):
            rp.matched_filter(t0, t1)
