import math

import numpy as np
import pytest

from rydberg_dark import dynamics, model, reduced
from rydberg_dark.reduced import (
    bounds,
    effective_comparison,
    effective_params,
    effective_steady_state,
    nonhermitian_spectrum,
    simulate_effective,
)

from conftest import ref_params

TWO_PI = 2 * math.pi
T3 = np.diag([0, 0, 0, 1]).astype(complex)


class TestEffectiveParams:
    def test_reference_Gamma(self, p_ref):
        G = effective_params(p_ref).Gamma / TWO_PI
        assert G == pytest.approx(6.06 / math.sqrt(10), rel=1e-12)
        assert abs(G - 1.89) / 1.89 < 0.02

    def test_reference_omega_tilde(self, p_ref):
        w = effective_params(p_ref).omega_tilde / TWO_PI
        assert w == pytest.approx(math.sqrt(2) * 0.25 * 2 / math.sqrt(5), rel=1e-12)
        assert abs(w - 0.320) / 0.320 < 0.02

    def test_no_raman(self):
        assert effective_params(ref_params(omega_raman=0)).omega_tilde == 0


class TestEffectiveModel:
    def test_operators(self, p_ref):
        H, jumps = reduced.effective_operators(p_ref)
        eff = effective_params(p_ref)
        assert np.allclose(H, H.conj().T)
        assert H[0, 1] == pytest.approx(eff.omega_tilde) and H[1, 2] == pytest.approx(eff.omega_tilde)
        assert np.all(H[3] == 0) and np.all(H[:, 3] == 0)
        assert sum(np.linalg.norm(c, 2) ** 2 for c in jumps) == pytest.approx(eff.Gamma)

    def test_T3_stationary(self, p_ref):
        tr = simulate_effective(p_ref, T3, 50.0, sample_every=1.0)
        assert np.max(np.abs(tr.F - 1)) < 1e-12
        assert np.max(np.abs(tr.states - T3)) < 1e-12

    def test_steady_state_is_T3(self, p_ref):
        np.testing.assert_allclose(effective_steady_state(p_ref), T3, atol=1e-12)

    def test_absolute_times(self, p_ref):
        rho0 = np.diag([1, 0, 0, 0]).astype(complex)
        tr = simulate_effective(p_ref, rho0, 3.0, t0=1.0, sample_every=0.5)
        np.testing.assert_allclose(tr.times, [1.0, 1.5, 2.0, 2.5, 3.0])
        assert tr.F[-1] > tr.F[0]
        with pytest.raises(ValueError):
            simulate_effective(p_ref, rho0, 0.5, t0=1.0)

    def test_projection(self, p_ref):
        ds = model.named_states(p_ref)["DS"]
        np.testing.assert_allclose(reduced.project_to_effective(np.outer(ds, ds.conj()), p_ref), T3, atol=1e-14)
        mixed = reduced.project_to_effective(np.eye(16) / 16, p_ref, renormalize=False)
        assert np.trace(mixed).real == pytest.approx(0.25)


class TestFullVsEffective:
    @pytest.mark.xfail(strict=True, reason="sup |dF| is about 0.1 when started at t = 1/Gamma (angular Gamma)")
    def test_agreement_from_inverse_Gamma(self, p_ref, ref_trajectory):
        _, dev = effective_comparison(p_ref, ref_trajectory)
        assert dev < 0.05

    def test_late_start_tracks(self, p_ref, ref_trajectory):
        # started one drain period (2 pi / Gamma) in, the reduced model tracks the full one
        eff, dev = effective_comparison(p_ref, ref_trajectory, TWO_PI / effective_params(p_ref).Gamma)
        assert dev < 0.05
        assert eff.times[-1] == pytest.approx(100.0)

    def test_needs_states(self, p_ref, ref_trajectory):
        bare = dynamics.Trajectory(ref_trajectory.times, None, ref_trajectory.observables, p_ref)
        with pytest.raises(ValueError, match="states"):
            effective_comparison(p_ref, bare)


class TestSpectrum:
    def test_lossless_is_real(self):
        p = ref_params(gamma0=0, gamma1=0, gammaR=0)
        ev = np.array([e.eigenvalue for e in nonhermitian_spectrum(p)])
        assert np.max(np.abs(ev.imag)) < 1e-10

    def test_sorted_and_decaying(self, p_ref):
        spec = nonhermitian_spectrum(p_ref)
        im = np.array([e.eigenvalue.imag for e in spec])
        assert np.all(im <= 1e-10)
        assert np.all(np.diff(np.abs(im)) >= 0)
        assert len(spec) == 16

    def test_slowest_mode_is_dark_singlet(self, p_ref_lossless):
        rep = bounds(p_ref_lossless)
        assert rep.spectrum[0].overlap_DS > 0.99
        assert rep.decay_gap_ratio > 100
        assert rep.slowest_decay < 1e-2 * abs(rep.spectrum[1].eigenvalue.imag)
        assert np.isfinite(rep.decay_per_2xi2) and rep.decay_per_2xi2 > 0

    def test_gap_ratio_with_rydberg_decay(self, p_ref):
        assert bounds(p_ref).decay_gap_ratio > 100

    def test_truncated_blockade(self, p_ref_lossless):
        spec = nonhermitian_spectrum(p_ref_lossless, "truncate")
        assert len(spec) == 15
        assert spec[0].overlap_DS > 0.99

    def test_surrogate_blockade_has_detuned_rr_mode(self, p_ref_lossless):
        # The huge finite shift leaves |rr> as a far-detuned, almost undamped level.
        spec = nonhermitian_spectrum(p_ref_lossless, "surrogate")
        vrr = model.perfect_blockade_surrogate(p_ref_lossless).vrr
        assert spec[0].eigenvalue.real == pytest.approx(vrr, rel=1e-3)
        assert spec[0].overlap_DS < 1e-12
        assert spec[1].overlap_DS > 0.99

    def test_csv(self, tmp_path, p_ref):
        path = tmp_path / "s.csv"
        reduced.write_spectrum_csv(nonhermitian_spectrum(p_ref), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "re_ev,im_ev,overlap_DS" and len(lines) == 17


class TestBounds:
    def test_closed_forms(self, p_ref):
        rep = bounds(p_ref)
        p = p_ref
        assert rep.gammaE_bound == pytest.approx(p.omega_raman * p.gammaP * p.omega1 / (p.omega1**2 + p.omega2**2 + p.omega_raman**2))
        assert rep.Fmax_bound == pytest.approx(0.9999875, abs=1e-12)
        assert rep.xi == pytest.approx(0.0025)
        assert rep.blockade_ok and rep.blockade_threshold == pytest.approx(TWO_PI * 5)

    def test_small_omega_limits(self):
        p = ref_params(omega_raman=1e-9)
        assert reduced.gammaE_bound(p) < 1e-9
        assert reduced.Fmax_bound(p) == pytest.approx(1.0, abs=1e-15)

    def test_steady_state_below_Fmax_bound(self, p_ref_lossless):
        ds = model.named_states(p_ref_lossless)["DS"]
        F = (ds.conj() @ dynamics.steady_state(p_ref_lossless) @ ds).real
        assert F <= reduced.Fmax_bound(p_ref_lossless) + 1e-6

    @pytest.mark.xfail(strict=True, reason="fitted rate exceeds the closed-form rate bound by about 3x here")
    def test_rate_below_bound_reference_point(self, sweep_results):
        spec, tables, _ = sweep_results("supfig1_rabi")
        table = tables["fixed_ratio"]
        p = spec.branches()[1][1][0]
        assert p.gammaP / TWO_PI == pytest.approx(1.0) and p.omega_raman / TWO_PI == pytest.approx(0.1)
        assert table.fits[0].gammaE <= reduced.gammaE_bound(p) * 1.05

    def test_format(self, p_ref):
        text = reduced.format_bounds(bounds(p_ref))
        kv = model.parse_key_values(text)
        assert kv["blockade_condition"] == "satisfied"
        assert float(kv["Fmax_bound"]) == pytest.approx(0.9999875)
        assert float(kv["gammaE_bound_mhz"]) == pytest.approx(reduced.gammaE_bound(p_ref) / TWO_PI)
