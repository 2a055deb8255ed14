import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sagnac_epr.density import BELL_STATES, TwoQubitDensity, phase_damped_bell, random_density
from sagnac_epr.detection import (FRINGE_COLUMNS, AnalyzerSetting, CountRecord, coincidence_prob,
                                  fit_fringe, fringe_probabilities, fringe_visibility,
                                  marginal_probs, polarization_correlation, pump_qwp_to_theta,
                                  read_fringe_csv, sample_counts, simulate_fringe,
                                  subtract_accidentals, write_fringe_csv)
from sagnac_epr.errors import ConfigurationError, FitError
from sagnac_epr.sagnac import ExperimentConfig, NoiseParams, output_density, output_state, psi_out
from sagnac_epr.fock import coincidence_vector, overlap

PSI_PLUS = TwoQubitDensity.from_pure(BELL_STATES["psi+"])
PSI_MINUS = TwoQubitDensity.from_pure(BELL_STATES["psi-"])
DEG = math.pi / 180
ANGLES = np.linspace(0, math.pi, 37)


def _fringe_oracle(alpha, beta):
    # <alpha, beta|psi+> = (cos a sin b + sin a cos b) / sqrt 2
    return 0.5 * abs(math.cos(alpha) * math.sin(beta) + math.sin(alpha) * math.cos(beta)) ** 2


@pytest.mark.parametrize("alpha", np.linspace(0, math.pi, 13))
def test_psi_plus_scan_against_h(alpha):
    p = coincidence_prob(PSI_PLUS, AnalyzerSetting(pol1=alpha, pol2=0.0))
    assert p == pytest.approx(0.5 * math.sin(alpha) ** 2, abs=1e-12)


def test_psi_plus_diagonal_maximum():
    assert coincidence_prob(PSI_PLUS, AnalyzerSetting(45 * DEG, 45 * DEG)) == pytest.approx(0.5)


def test_no_analyzers_accepts_everything(rng):
    for _ in range(20):
        assert coincidence_prob(random_density(rng), AnalyzerSetting()) == pytest.approx(1, abs=1e-12)


def test_fringe_law_grid():
    worst = 0.0
    for alpha in np.linspace(0, math.pi, 100):
        for beta in np.linspace(0, math.pi, 10):
            p = coincidence_prob(PSI_PLUS, AnalyzerSetting(alpha, beta))
            worst = max(worst, abs(p - _fringe_oracle(alpha, beta)),
                        abs(p - 0.5 * math.sin(alpha + beta) ** 2))
    assert worst < 1e-12


def test_one_sided_analyzer_gives_marginal():
    s = AnalyzerSetting(pol1=0.3)
    assert coincidence_prob(PSI_PLUS, s) == pytest.approx(0.5)
    assert marginal_probs(PSI_PLUS, s) == pytest.approx((0.5, 1.0))


@given(st.floats(0, math.pi), st.floats(0, math.pi), st.floats(0, math.pi), st.floats(0, math.pi))
def test_probability_in_unit_interval(a, b, q1, q2):
    rho = output_density(ExperimentConfig(noise=NoiseParams(0.4, 0.9, 0.3)))
    p = coincidence_prob(rho, AnalyzerSetting(a, b, q1, q2))
    assert 0 <= p <= 1


def test_pump_qwp_aligned_gives_psi_plus():
    theta, pump = pump_qwp_to_theta(45 * DEG)
    assert theta == pytest.approx(0, abs=1e-12)
    assert abs(pump.h) == pytest.approx(abs(pump.v))


def test_pump_qwp_zero_gives_quarter_phase():
    theta, pump = pump_qwp_to_theta(0.0)
    assert theta == pytest.approx(math.pi / 2, abs=1e-12)
    assert abs(pump.h) ** 2 == pytest.approx(0.5)


def test_pump_qwp_minus_45_leaves_diagonal_input():
    # diagonal light is an eigenpolarization of a QWP at -45 deg too
    theta, _ = pump_qwp_to_theta(-45 * DEG)
    assert theta == pytest.approx(0, abs=1e-12)


def test_pump_qwp_circular_input_sweeps_psi_minus_to_psi_plus():
    circ = np.array([1, 1j]) / math.sqrt(2)
    theta0, _ = pump_qwp_to_theta(0.0, circ)
    theta90, _ = pump_qwp_to_theta(math.pi / 2, circ)
    assert abs(theta0) == pytest.approx(math.pi, abs=1e-12)
    assert theta90 == pytest.approx(0, abs=1e-12)


@given(st.floats(-math.pi, math.pi))
def test_pump_qwp_theta_drives_simulator(q):
    # the returned theta and arm balance feed the Sagnac model directly
    theta, pump = pump_qwp_to_theta(q)
    v = coincidence_vector(output_state(ExperimentConfig(theta=theta, pump=pump)))
    assert abs(v[1]) == pytest.approx(abs(pump.h), abs=1e-12)
    assert v[2] == pytest.approx(abs(pump.v) * np.exp(1j * theta), abs=1e-12)
    if abs(pump.h) == pytest.approx(abs(pump.v)):
        assert overlap(psi_out(theta), output_state(ExperimentConfig(theta=theta))) == pytest.approx(1)


def test_sample_counts_zero_probability():
    for seed in range(20):
        assert sample_counts(0.0, 1e5, 1.0, seed=seed).coincidences == 0


def test_sample_counts_mean():
    rng = np.random.default_rng(7)
    n = 10_000
    c = np.array([sample_counts(0.5, 1e5, 1.0, seed=rng).coincidences for _ in range(n)])
    sigma = math.sqrt(5e4 / n)
    assert abs(c.mean() - 5e4) < 3 * sigma


def test_sample_counts_singles_means():
    rng = np.random.default_rng(3)
    recs = [sample_counts(0.2, 1e4, 1.0, (0.5, 0.25), rng, marginals=(0.5, 0.4)) for _ in range(2000)]
    s1 = np.mean([r.singles1 for r in recs])
    s2 = np.mean([r.singles2 for r in recs])
    c = np.mean([r.coincidences for r in recs])
    assert abs(s1 - 2500) < 3 * math.sqrt(2500 / 2000)
    assert abs(s2 - 1000) < 3 * math.sqrt(1000 / 2000)
    assert abs(c - 250) < 3 * math.sqrt(250 / 2000)


def test_sample_counts_seed_reproducible():
    a = sample_counts(0.3, 1e4, 2.0, (0.8, 0.7), 42, accidentals=True)
    b = sample_counts(0.3, 1e4, 2.0, (0.8, 0.7), 42, accidentals=True)
    assert a == b


@pytest.mark.parametrize("kw", [{"prob": 1.5}, {"prob": -0.1}, {"pair_rate": -1.0},
                                {"duration": 0.0}, {"efficiencies": (1.2, 1.0)}])
def test_sample_counts_validation(kw):
    args = {"prob": 0.5, "pair_rate": 1e3, "duration": 1.0} | kw
    with pytest.raises(ConfigurationError):
        sample_counts(**args)


def test_count_record_validation():
    with pytest.raises(ConfigurationError):
        CountRecord(-1, 0, 0, 1.0)
    with pytest.raises(ConfigurationError):
        CountRecord(1.5, 0, 0, 1.0)
    with pytest.raises(ConfigurationError):
        CountRecord(1, 1, 1, 1.0, window=0.0)


def test_subtract_accidentals_example():
    r = CountRecord(100_000, 100_000, 100, 1.0, 2.3e-9)
    assert subtract_accidentals(r) == pytest.approx(77)


def test_subtract_accidentals_zero_singles():
    assert subtract_accidentals(CountRecord(0, 0, 12, 1.0)) == 12


def test_subtract_accidentals_floor():
    r = CountRecord(1_000_000, 1_000_000, 10, 1.0, 2.3e-9)
    assert subtract_accidentals(r) == 0
    assert subtract_accidentals(r, floor=False) == pytest.approx(10 - 2300)


def test_accidental_subtraction_unbiased():
    # independent sources: every coincidence is accidental
    n = 10_000
    vals = np.array([subtract_accidentals(
        sample_counts(0.0, 1e5, 1.0, seed=(11, i), marginals=(0.5, 0.5), accidentals=True),
        floor=False) for i in range(n)])
    assert abs(vals.mean()) < 3 * vals.std(ddof=1) / math.sqrt(n)


def test_fit_ideal_diagonal_scan():
    y = fringe_probabilities(PSI_PLUS, ANGLES, 45 * DEG)
    fit = fit_fringe(ANGLES, y)
    assert fit.visibility == pytest.approx(1, abs=1e-9)
    assert fit.phase == pytest.approx(45 * DEG, abs=1e-9)


def test_fit_constant_counts():
    fit = fit_fringe(ANGLES, np.full(len(ANGLES), 500.0))
    assert fit.visibility == pytest.approx(0, abs=1e-9)
    assert fit.offset == pytest.approx(500)


@pytest.mark.parametrize("d", [0.0, 0.3, 0.746, 0.83, 1.0])
def test_fit_matches_coherence(d):
    rho = phase_damped_bell(d)
    fit = fit_fringe(ANGLES, 1e3 * fringe_probabilities(rho, ANGLES, 45 * DEG))
    assert fit.visibility == pytest.approx(d, abs=1e-9)


def test_visibility_coherence_identity(rng):
    for _ in range(20):
        cfg = ExperimentConfig(noise=NoiseParams(rng.uniform(), rng.uniform()))
        m = output_density(cfg).matrix
        coherence = 2 * abs(m[1, 2]) / (m[1, 1] + m[2, 2]).real
        fit = fit_fringe(ANGLES, 1e3 * fringe_probabilities(m, ANGLES, 45 * DEG))
        assert fit.visibility == pytest.approx(coherence, abs=1e-9)
        assert fringe_visibility(m, 45 * DEG) == pytest.approx(coherence, abs=1e-9)


def test_imbalanced_arms_raise_diagonal_visibility(rng):
    # with arm weights p, q the diagonal fringe visibility is sqrt((p-q)^2 + 4|c|^2) / (p+q)
    for _ in range(20):
        cfg = ExperimentConfig(noise=NoiseParams(rng.uniform(), 1.0, rng.uniform(-0.5, 1)))
        m = output_density(cfg).matrix
        p, q, c = m[1, 1].real, m[2, 2].real, abs(m[1, 2])
        expected = math.sqrt((p - q) ** 2 + 4 * c ** 2) / (p + q)
        fit = fit_fringe(ANGLES, 1e3 * fringe_probabilities(m, ANGLES, 45 * DEG))
        assert fit.visibility == pytest.approx(expected, abs=1e-9)


def test_fit_equals_extremes_definition():
    rho = phase_damped_bell(0.6)
    fit = fit_fringe(ANGLES, 1e3 * fringe_probabilities(rho, ANGLES, 45 * DEG))
    assert fit.visibility == pytest.approx((fit.c_max - fit.c_min) / (fit.c_max + fit.c_min))


def test_fit_estimator_consistency():
    rho = phase_damped_bell(0.83)
    # peak coincidence probability 1/2, so pair_rate * duration = 2e6 gives 1e6 peak counts
    fit = simulate_fringe(rho, ANGLES, 45 * DEG, pair_rate=2e6, duration=1.0, seed=5,
                          accidentals=False)
    assert abs(fit.visibility - 0.83) < 0.01
    assert fit.visibility_err < 0.01


def test_fit_uncertainty_scales_with_counts():
    rho = phase_damped_bell(0.83)
    lo = simulate_fringe(rho, ANGLES, 45 * DEG, pair_rate=2e3, seed=1, accidentals=False)
    hi = simulate_fringe(rho, ANGLES, 45 * DEG, pair_rate=2e5, seed=1, accidentals=False)
    assert hi.visibility_err == pytest.approx(lo.visibility_err / 10, rel=0.3)


@given(st.lists(st.floats(0, 1e4), min_size=8, max_size=8))
def test_fit_keeps_offset_above_amplitude(counts):
    angles = np.linspace(0, math.pi, 8, endpoint=False)
    try:
        fit = fit_fringe(angles, counts)
    except FitError:
        return
    assert fit.offset >= fit.amplitude - 1e-9 and fit.amplitude >= 0
    assert np.all(fit.model(angles) >= -1e-6 * max(1.0, fit.offset))


def test_fit_needs_four_distinct_angles():
    with pytest.raises(ConfigurationError):
        fit_fringe([0, 0.1, 0.2, 0.2], [1, 2, 3, 3])


def test_fit_singular_design():
    angles = [0, math.pi, 2 * math.pi, 3 * math.pi]
    with pytest.raises(FitError):
        fit_fringe(angles, [10, 11, 9, 10])


def test_polarization_correlation_examples():
    dd = coincidence_prob(PSI_PLUS, AnalyzerSetting(45 * DEG, 45 * DEG))
    da = coincidence_prob(PSI_PLUS, AnalyzerSetting(45 * DEG, -45 * DEG))
    assert polarization_correlation(dd, da) == pytest.approx(1)
    dd = coincidence_prob(PSI_MINUS, AnalyzerSetting(45 * DEG, 45 * DEG))
    da = coincidence_prob(PSI_MINUS, AnalyzerSetting(45 * DEG, -45 * DEG))
    assert polarization_correlation(dd, da) == pytest.approx(-1)
    assert polarization_correlation(40, 40) == 0


def test_polarization_correlation_zero_denominator():
    with pytest.raises(ConfigurationError):
        polarization_correlation(0, 0)


def test_circular_basis_visibility():
    assert fringe_visibility(PSI_PLUS, 45 * DEG, "circular") == pytest.approx(1, abs=1e-12)
    assert fringe_visibility(phase_damped_bell(0.8), 45 * DEG, "circular") == pytest.approx(0.8)
    with pytest.raises(ConfigurationError):
        fringe_visibility(PSI_PLUS, 0.0, "elliptic")


def test_fringe_csv_round_trip():
    fit = simulate_fringe(phase_damped_bell(0.9), ANGLES, 45 * DEG, seed=3)
    buf = io.StringIO()
    write_fringe_csv(buf, ANGLES, fit.records)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(FRINGE_COLUMNS)
    cols = read_fringe_csv(io.StringIO("# comment\n" + text))
    assert np.allclose(cols["angle_deg"], np.degrees(ANGLES))
    assert np.array_equal(cols["coincidences_raw"], [r.coincidences for r in fit.records])
    assert np.allclose(cols["coincidences_corrected"],
                       [subtract_accidentals(r) for r in fit.records], atol=1e-6)


def test_fringe_csv_missing_column():
    with pytest.raises(ConfigurationError):
        read_fringe_csv(io.StringIO("angle_deg,singles1\n0,1\n"))


def test_simulated_fringe_deterministic():
    a = simulate_fringe(PSI_PLUS, ANGLES, 45 * DEG, seed=9)
    b = simulate_fringe(PSI_PLUS, ANGLES, 45 * DEG, seed=9)
    assert a.records == b.records
