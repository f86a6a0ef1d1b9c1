"""Unit tests for the two-SQUID resonator model."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastr_readout.constants import PHI0, dbm_to_watt
from fastr_readout.exceptions import FitDiverged, FluxAtFrustration, TargetUnreachable
from fastr_readout.resonator import (
    BiasPoint,
    JunctionParams,
    ResonanceProfile,
    ResonatorDesign,
    Sweep,
    TlsLossModel,
    coupling_q,
    designed_device,
    duffing_a,
    fit_s21,
    internal_drive,
    operating_point,
    participation_ratio,
    perturb_design,
    resonance_frequency,
    retarget_design,
    s21,
    squid_inductance,
    synthesize_sweep,
    tls_qi,
    zero_flux_frequency,
)

pytestmark = pytest.mark.unit

flux = st.floats(min_value=-0.45, max_value=0.45, allow_nan=False)


class TestSquidInductance:
    """Test the DC-SQUID Josephson inductance."""

    def test_zero_flux(self):
        """Test 11 uA junctions at zero flux give 14.96 pH."""
        inductance = squid_inductance(JunctionParams(11e-6), 0.0)
        assert inductance == pytest.approx(14.96e-12, rel=1e-3)
        assert inductance == pytest.approx(PHI0 / (4 * math.pi * 11e-6), rel=1e-12)

    def test_third_flux_quantum_doubles_inductance(self):
        """Test flux 1/3 halves cos(pi flux) and doubles the inductance."""
        j = JunctionParams(11e-6)
        assert squid_inductance(j, 1 / 3) == pytest.approx(29.92e-12, rel=1e-3)
        assert squid_inductance(j, 1 / 3) == pytest.approx(2 * squid_inductance(j, 0.0))

    def test_frustration_raises(self):
        """Test half a flux quantum raises FluxAtFrustration."""
        with pytest.raises(FluxAtFrustration) as exc_info:
            squid_inductance(JunctionParams(11e-6), 0.5)
        assert exc_info.value.flux == 0.5
        assert exc_info.value.cos_value < 1e-6

    def test_junction_rejects_nonpositive_current(self):
        """Test a junction needs a positive critical current."""
        with pytest.raises(ValueError):
            JunctionParams(0.0)

    @given(flux)
    def test_periodic_and_even(self, phi):
        """Test the inductance is even in flux and periodic in one flux quantum."""
        j = JunctionParams(11e-6)
        assert squid_inductance(j, -phi) == squid_inductance(j, phi)
        assert squid_inductance(j, phi + 1.0) == pytest.approx(squid_inductance(j, phi))


class TestResonanceFrequency:
    """Test the flux-tunable resonance frequency."""

    def test_design_at_zero_flux(self, design):
        """Test the designed device resonates at 6.359 GHz unbiased."""
        assert resonance_frequency(design, BiasPoint(0.0, 0.0)) == pytest.approx(
            6.359e9, rel=2e-4
        )

    def test_design_at_third_flux_quantum(self, design):
        """Test both SQUIDs at 1/3 flux quantum give 6.106 GHz."""
        bias = BiasPoint(1 / 3, 1 / 3)
        assert resonance_frequency(design, bias) == pytest.approx(6.106e9, rel=2e-4)

    def test_flux_lowers_frequency(self, design):
        """Test nonzero flux strictly lowers the frequency."""
        f00 = resonance_frequency(design, BiasPoint(0.0, 0.0))
        assert resonance_frequency(design, BiasPoint(0.2, 0.0)) < f00
        assert resonance_frequency(design, BiasPoint(0.0, 0.2)) < f00

    def test_frustrated_bias_raises(self, design):
        """Test a frustrated SQUID propagates FluxAtFrustration."""
        with pytest.raises(FluxAtFrustration):
            resonance_frequency(design, BiasPoint(0.0, 0.5))

    @given(flux, flux)
    @settings(max_examples=50)
    def test_symmetries(self, tune, sense):
        """Test periodicity, parity and the zero-flux maximum on the surface."""
        d = designed_device()
        f = resonance_frequency(d, BiasPoint(tune, sense))
        assert resonance_frequency(d, BiasPoint(tune + 1.0, sense)) == pytest.approx(f)
        assert resonance_frequency(d, BiasPoint(-tune, -sense)) == pytest.approx(f)
        assert resonance_frequency(d, BiasPoint(tune, sense).canonical()) == pytest.approx(f)
        assert f <= zero_flux_frequency(d) * (1 + 1e-12)

    @pytest.mark.parametrize("k", [1, 2, -3])
    def test_flux_periodicity_is_exact(self, design, k):
        """Test shifting either flux by whole quanta leaves f0 bit-identical."""
        for phi in np.linspace(-0.45, 0.45, 91):
            f = resonance_frequency(design, BiasPoint(phi, 0.1))
            assert resonance_frequency(design, BiasPoint(phi + k, 0.1)) == f
            g = resonance_frequency(design, BiasPoint(0.1, phi))
            assert resonance_frequency(design, BiasPoint(0.1, phi + k)) == g

    def test_bias_must_be_finite(self):
        """Test a non-finite bias is rejected."""
        with pytest.raises(ValueError):
            BiasPoint(math.nan, 0.0)


class TestTransmission:
    """Test the shunt-resonator transmission."""

    def test_full_extinction_on_resonance(self):
        """Test lossless coupling gives zero transmission at f0."""
        p = ResonanceProfile.from_quality_factors(6.91e9, qi=math.inf, qc=329.0)
        assert p.qr == pytest.approx(p.qc)
        assert abs(s21(p.f0, p)) == pytest.approx(0.0, abs=1e-12)

    def test_depth_is_one_minus_ratio(self):
        """Test Qr/Qc = 0.9 leaves 0.1 on resonance."""
        p = ResonanceProfile.from_loaded(6.91e9, qr=0.9 * 329.0, qc=329.0)
        assert s21(p.f0, p) == pytest.approx(0.1 + 0j)

    def test_half_linewidth_detuning(self):
        """Test half a linewidth above f0 gives 0.5 + 0.5i when Qr = Qc."""
        p = ResonanceProfile.from_quality_factors(6.91e9, qi=math.inf, qc=329.0)
        assert s21(p.f0 + 0.5 * p.linewidth, p) == pytest.approx(0.5 + 0.5j)

    def test_far_off_resonance_is_unity(self, profile):
        """Test the carrier passes far from the resonance."""
        assert abs(s21(profile.f0 * 1.5, profile)) == pytest.approx(1.0, abs=1e-3)

    def test_profile_rejects_inconsistent_quality_factors(self):
        """Test 1/Qr = 1/Qi + 1/Qc is enforced."""
        with pytest.raises(ValueError):
            ResonanceProfile(f0=6e9, qr=300.0, qi=6000.0, qc=329.0, linewidth=2e7)

    def test_loaded_q_cannot_exceed_coupling_q(self):
        """Test from_loaded rejects Qr > Qc."""
        with pytest.raises(ValueError):
            ResonanceProfile.from_loaded(6e9, qr=400.0, qc=329.0)

    def test_shifted_keeps_quality_factors(self, profile):
        """Test shifting a profile rescales the linewidth only."""
        moved = profile.shifted(6.5e9)
        assert moved.qr == profile.qr
        assert moved.linewidth == pytest.approx(6.5e9 / profile.qr)


class TestFitS21:
    """Test fitting the transmission model to sweeps."""

    def test_noiseless_round_trip(self):
        """Test a noiseless sweep recovers f0, Qr and Qc to 0.1%."""
        truth = ResonanceProfile.from_loaded(6.91e9, qr=164.0, qc=329.0)
        fit = fit_s21(synthesize_sweep(truth))
        assert fit.profile.f0 == pytest.approx(truth.f0, rel=1e-3)
        assert fit.profile.qr == pytest.approx(truth.qr, rel=1e-3)
        assert fit.profile.qc == pytest.approx(truth.qc, rel=1e-3)
        assert fit.residual < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_noiseless_round_trip_random_resonances(self, seed):
        """Test random f0, Qr in [100, 1000] and Qc > Qr come back within 0.1%."""
        rng = np.random.default_rng(seed)
        qr = rng.uniform(100.0, 1000.0)
        truth = ResonanceProfile.from_loaded(
            rng.uniform(5.0e9, 7.5e9), qr=qr, qc=qr * rng.uniform(1.2, 5.0)
        )
        fit = fit_s21(synthesize_sweep(truth))
        assert fit.profile.f0 == pytest.approx(truth.f0, rel=1e-3)
        assert fit.profile.qr == pytest.approx(truth.qr, rel=1e-3)
        assert fit.profile.qc == pytest.approx(truth.qc, rel=1e-3)

    def test_noisy_sweep_locates_resonance(self):
        """Test SNR 50 sweeps find f0 within 1% of a linewidth (RMS over seeds)."""
        truth = ResonanceProfile.from_loaded(6.91e9, qr=164.0, qc=329.0)
        errors = np.array(
            [
                fit_s21(synthesize_sweep(truth, noise_snr=50.0, seed=s)).profile.f0 - truth.f0
                for s in range(10)
            ]
        )
        assert np.sqrt(np.mean(errors**2)) < 0.01 * truth.linewidth

    @pytest.mark.slow
    def test_noisy_sweep_many_seeds(self):
        """Test the SNR 50 frequency error and quality factors over 100 seeds."""
        truth = ResonanceProfile.from_loaded(6.91e9, qr=164.0, qc=329.0)
        fits = [fit_s21(synthesize_sweep(truth, noise_snr=50.0, seed=s)) for s in range(100)]
        errors = np.array([abs(f.profile.f0 - truth.f0) for f in fits])
        assert errors.mean() < 0.005 * truth.linewidth
        assert np.median([f.profile.qc for f in fits]) == pytest.approx(truth.qc, rel=0.02)

    def test_flat_sweep_diverges(self):
        """Test a sweep without a dip raises FitDiverged."""
        freqs = np.linspace(6.8e9, 7.0e9, 401)
        with pytest.raises(FitDiverged):
            fit_s21(Sweep(freqs, np.ones_like(freqs, dtype=complex)))

    def test_short_sweep_rejected(self, profile):
        """Test fewer than 20 points is a ValueError."""
        with pytest.raises(ValueError):
            fit_s21(synthesize_sweep(profile, n_points=10))

    def test_narrow_sweep_rejected(self, profile):
        """Test a sweep inside two linewidths is a ValueError."""
        with pytest.raises(ValueError):
            fit_s21(synthesize_sweep(profile, span_linewidths=2.0))


class TestTlsLoss:
    """Test the power-dependent intrinsic quality factor."""

    def test_low_power_limit(self):
        """Test zero field gives the low-power Qi."""
        assert tls_qi(TlsLossModel(), 0.0) == pytest.approx(1000.0)

    def test_saturation_field(self):
        """Test the TLS term is reduced by 1/sqrt(2) at the saturation field."""
        model = TlsLossModel()
        tls_term = 1.0 / tls_qi(model, model.e_sat) - 1.0 / model.qi_residual
        expected = (1.0 / model.qi_low_power - 1.0 / model.qi_residual) / math.sqrt(2.0)
        assert tls_term == pytest.approx(expected)

    def test_high_field_approaches_residual(self):
        """Test a large field saturates toward the residual Qi."""
        assert tls_qi(TlsLossModel(), 1e9) == pytest.approx(1e5, rel=1e-3)

    def test_model_ordering_validated(self):
        """Test qi_low_power must lie below qi_residual."""
        with pytest.raises(ValueError):
            TlsLossModel(qi_low_power=2e5, qi_residual=1e5)

    def test_negative_field_rejected(self):
        """Test a negative field is a ValueError."""
        with pytest.raises(ValueError):
            tls_qi(TlsLossModel(), -1.0)


class TestNonlinearity:
    """Test the Duffing parameter and the drive model."""

    def test_participation_at_zero_flux(self, design):
        """Test alpha = 29.92 / 353.9 at zero flux."""
        p = ResonanceProfile.from_loaded(zero_flux_frequency(design), qr=300.0, qc=design.qc)
        alpha = participation_ratio(design, p, BiasPoint(0.0, 0.0))
        assert alpha == pytest.approx(0.0845, abs=5e-4)

    def test_duffing_law(self, design):
        """Test a = (alpha Qr / 4)(I / Ic)^2 with Ic = 22 uA for the series stack."""
        p = ResonanceProfile.from_loaded(zero_flux_frequency(design), qr=300.0, qc=design.qc)
        bias = BiasPoint(0.0, 0.0)
        alpha = participation_ratio(design, p, bias)
        result = duffing_a(design, p, 2.2e-6, bias)
        assert result.a == pytest.approx(alpha * 300.0 / 4.0 * 0.01, rel=1e-9)
        assert result.a == pytest.approx(0.0634, abs=5e-4)
        assert not result.bifurcated

    def test_zero_current(self, design):
        """Test no current gives a = 0."""
        p = ResonanceProfile.from_loaded(zero_flux_frequency(design), qr=300.0, qc=design.qc)
        assert duffing_a(design, p, 0.0).a == 0.0

    def test_bifurcation_flag(self, design):
        """Test currents past a = 0.77 are flagged."""
        p = ResonanceProfile.from_loaded(zero_flux_frequency(design), qr=300.0, qc=design.qc)
        assert duffing_a(design, p, 10e-6, BiasPoint(0.0, 0.0)).bifurcated

    def test_inferred_bias_matches_explicit_on_diagonal(self, design):
        """Test the bias-free split agrees with an explicit diagonal bias."""
        bias = BiasPoint(0.2, 0.2)
        p = ResonanceProfile.from_loaded(resonance_frequency(design, bias), qr=300.0, qc=design.qc)
        assert participation_ratio(design, p) == pytest.approx(
            participation_ratio(design, p, bias), rel=1e-9
        )

    def test_zero_drive(self, prototype, profile):
        """Test zero generator power leaves the resonator empty."""
        state = internal_drive(prototype, profile, 0.0)
        assert state.current == 0.0
        assert state.e_field == 0.0

    def test_drive_is_linear_in_power(self, prototype, profile):
        """Test doubling pg doubles U and a, and grows E by sqrt(2)."""
        one = internal_drive(prototype, profile, 1e-13)
        two = internal_drive(prototype, profile, 2e-13)
        assert two.energy == pytest.approx(2 * one.energy)
        assert two.e_field == pytest.approx(math.sqrt(2) * one.e_field)
        a_one = duffing_a(prototype, profile, one.current).a
        a_two = duffing_a(prototype, profile, two.current).a
        assert a_two == pytest.approx(2 * a_one)

    def test_half_linewidth_detuning_halves_energy(self, prototype, profile):
        """Test the Lorentzian lineshape halves U at half a linewidth."""
        on = internal_drive(prototype, profile, 1e-13)
        off = internal_drive(prototype, profile, 1e-13, detuning=0.5 * profile.linewidth)
        assert off.energy == pytest.approx(0.5 * on.energy)


class TestOperatingPoint:
    """Test the prototype and its self-consistent operating point."""

    def test_prototype_frequency_and_coupling(self, prototype):
        """Test the prototype sits at 6.91 GHz with Qc = 329."""
        assert zero_flux_frequency(prototype) == pytest.approx(6.91e9, rel=1e-9)
        assert prototype.qc == 329.0

    def test_operating_bias(self, prototype):
        """Test the diagonal operating bias puts the resonance at 6.84 GHz."""
        bias = operating_point(prototype)
        assert bias.phi_tune == bias.phi_sense
        assert resonance_frequency(prototype, bias) == pytest.approx(6.84e9, rel=1e-9)

    def test_operating_frequency_out_of_range(self, prototype):
        """Test an operating point above the zero-flux frequency is unreachable."""
        with pytest.raises(TargetUnreachable):
            operating_point(prototype, f_op=7.5e9)

    def test_anchor_gives_duffing_005(self, calibrated):
        """Test the calibrated drive gives a = 0.05 at -98 dBm on resonance."""
        assert calibrated.duffing(-98.0).a == pytest.approx(0.05, rel=1e-6)
        assert calibrated.profile.duffing_a == 0.05

    def test_self_consistent_qi(self, calibrated):
        """Test the operating field saturates Qi to the ~6000 range."""
        assert 5000 < calibrated.profile.qi < 8000
        assert tls_qi(calibrated.design.tls, calibrated.e_field) == pytest.approx(
            calibrated.profile.qi, rel=1e-6
        )

    def test_duffing_scales_with_power(self, calibrated):
        """Test 10 dB more drive raises a tenfold."""
        a_low = calibrated.duffing(-98.0).a
        a_high = calibrated.duffing(-88.0).a
        assert a_high == pytest.approx(10 * a_low, rel=1e-9)

    def test_drive_matches_watts(self, calibrated):
        """Test the dBm drive helper agrees with a direct watt drive."""
        direct = internal_drive(
            calibrated.design,
            calibrated.profile,
            float(dbm_to_watt(-96.0)),
            kappa=calibrated.kappa,
        )
        assert calibrated.drive(-96.0).current == pytest.approx(direct.current)


class TestFabricationScatter:
    """Test dielectric-thickness perturbations and retargeting."""

    def test_ten_percent_thicker_shifts_300_mhz(self, design):
        """Test +10% thickness on a 6 GHz device shifts it by about +300 MHz."""
        nominal = retarget_design(design, 6.0e9)
        perturbed = perturb_design(nominal, 0.10)
        assert perturbed.predicted_shift * 6.0e9 == pytest.approx(300e6)
        exact = zero_flux_frequency(perturbed.design) - 6.0e9
        assert exact == pytest.approx(6.0e9 * (math.sqrt(1.1) - 1), rel=1e-9)
        assert abs(exact - 300e6) < 10e6

    def test_zero_perturbation_is_identity(self, design):
        """Test delta = 0 returns the design unchanged."""
        perturbed = perturb_design(design, 0.0)
        assert perturbed.design is design
        assert perturbed.predicted_shift == 0.0

    def test_thinner_dielectric_lowers_frequency(self, design):
        """Test -10% thickness is -5% to first order, exact from recomputation."""
        f0 = zero_flux_frequency(design)
        perturbed = perturb_design(design, -0.10)
        assert perturbed.predicted_shift == pytest.approx(-0.05)
        ratio = zero_flux_frequency(perturbed.design) / f0
        assert ratio == pytest.approx(math.sqrt(0.9), rel=1e-12)

    def test_perturbation_scales_coupling_q(self, design):
        """Test qc follows the lumped estimate under a thickness change."""
        perturbed = perturb_design(design, 0.05).design
        expected = design.qc * coupling_q(perturbed) / coupling_q(design)
        assert perturbed.qc == pytest.approx(expected)
        assert perturbed.dielectric_thickness_d == pytest.approx(1.05 * design.dielectric_thickness_d)

    def test_perturbation_bounds(self, design):
        """Test |delta| >= 1 is rejected."""
        with pytest.raises(ValueError):
            perturb_design(design, -1.0)

    def test_retarget_holds_coupling(self, design):
        """Test retargeting moves f0 and keeps qc and the coupling estimate."""
        moved = retarget_design(design, 5.5e9)
        assert zero_flux_frequency(moved) == pytest.approx(5.5e9, rel=1e-12)
        assert moved.qc == design.qc
        assert coupling_q(moved) == pytest.approx(coupling_q(design), rel=1e-9)
        assert moved.lg == design.lg


class TestDeviceDocument:
    """Test the device JSON document form."""

    def test_from_document(self, device_document):
        """Test a document builds the designed device."""
        d = ResonatorDesign.from_document(device_document)
        assert d == designed_device()
        assert d.tune_squid.ic_per_junction == 11e-6
        assert d.c_total == pytest.approx(1.77e-12)

    def test_document_round_trip(self, design):
        """Test to_document feeds back into from_document."""
        assert ResonatorDesign.from_document(design.to_document()) == design

    def test_design_rejects_nonpositive_values(self, design):
        """Test circuit values must be positive."""
        with pytest.raises(ValueError):
            replace(design, lg=0.0)
