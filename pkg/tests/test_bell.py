import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sagnac_epr.bell import (BELL_SETTINGS, DEFAULT_SETTING, OUTCOMES, TSIRELSON, ChshSetting,
                             chsh_counts, chsh_from_counts, chsh_s, correlation,
                             correlation_block, correlation_from_counts, horodecki_max, max_chsh,
                             optimal_chsh_setting)
from sagnac_epr.density import (BELL_STATES, TwoQubitDensity, phase_damped_bell, random_density,
                                random_product_density)
from sagnac_epr.errors import ConfigurationError

PSI_PLUS = TwoQubitDensity.from_pure(BELL_STATES["psi+"])
HH = TwoQubitDensity.from_pure(np.array([1, 0, 0, 0]))


def _grid_max(density, steps=16):
    # brute-force oracle over a uniform grid of analyzer angles in [0, pi)
    m = correlation_block(density)
    grid = np.linspace(0, math.pi, steps, endpoint=False)
    u = np.stack([np.cos(2 * grid), np.sin(2 * grid)])
    e = u.T @ m @ u  # e[i, j] = E(grid[i], grid[j])
    best = 0.0
    for i, ip in itertools.product(range(steps), repeat=2):
        row = e[i][:, None] - e[i][None, :] + e[ip][:, None] + e[ip][None, :]
        best = max(best, float(np.abs(row).max()))
    return best


def test_psi_plus_correlation_law():
    for a, b in np.random.default_rng(0).uniform(0, math.pi, (50, 2)):
        assert correlation(PSI_PLUS, a, b) == pytest.approx(-math.cos(2 * (a + b)), abs=1e-12)


@pytest.mark.parametrize("name", sorted(BELL_STATES))
def test_bell_states_reach_tsirelson(name):
    rho = TwoQubitDensity.from_pure(BELL_STATES[name])
    assert chsh_s(rho, BELL_SETTINGS[name]) == pytest.approx(TSIRELSON, abs=1e-9)
    assert chsh_s(rho, optimal_chsh_setting(rho)) == pytest.approx(TSIRELSON, abs=1e-9)
    assert max_chsh(rho) == pytest.approx(TSIRELSON, abs=1e-12)


def test_psi_plus_setting_is_grid_optimum():
    assert _grid_max(PSI_PLUS) == pytest.approx(TSIRELSON, abs=1e-9)
    assert chsh_s(PSI_PLUS, BELL_SETTINGS["psi+"]) >= _grid_max(PSI_PLUS) - 1e-9


def test_default_angles_suit_psi_minus_only():
    assert DEFAULT_SETTING == BELL_SETTINGS["psi-"]
    assert chsh_s(PSI_PLUS, DEFAULT_SETTING) == pytest.approx(0, abs=1e-12)


def test_maximally_mixed_gives_zero():
    rho = TwoQubitDensity.maximally_mixed()
    assert chsh_s(rho, BELL_SETTINGS["psi+"]) == pytest.approx(0, abs=1e-12)
    assert max_chsh(rho) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("d", [0.5, 0.746, 0.83, 1.0])
def test_dephased_bell_s_value(d):
    # E(a,b) = -(cos 2a cos 2b - d sin 2a sin 2b) gives S = 2 sqrt(1 + d^2)
    rho = phase_damped_bell(d)
    assert max_chsh(rho) == pytest.approx(2 * math.sqrt(1 + d * d), abs=1e-12)
    assert chsh_s(rho, optimal_chsh_setting(rho)) == pytest.approx(max_chsh(rho), abs=1e-9)


def test_tsirelson_bound_random_states(rng):
    worst = 0.0
    for _ in range(1000):
        worst = max(worst, chsh_s(random_density(rng), BELL_SETTINGS["psi+"]))
    assert worst <= TSIRELSON + 1e-9


def test_local_bound_product_states(rng):
    worst = 0.0
    for _ in range(1000):
        setting = ChshSetting(*rng.uniform(0, math.pi, 4))
        worst = max(worst, chsh_s(random_product_density(rng), setting))
    assert worst <= 2 + 1e-9


@given(st.tuples(*[st.floats(-math.pi, math.pi)] * 4))
def test_hh_product_state_local(angles):
    assert chsh_s(HH, ChshSetting(*angles)) <= 2 + 1e-9


def test_optimal_setting_beats_grid(rng):
    for _ in range(10):
        rho = random_density(rng, rank=int(rng.integers(1, 5)))
        s_opt = chsh_s(rho, optimal_chsh_setting(rho))
        assert s_opt == pytest.approx(max_chsh(rho), abs=1e-9)
        assert s_opt >= _grid_max(rho) - 1e-9


def test_horodecki_bounds_linear_optimum(rng):
    for _ in range(100):
        rho = random_density(rng)
        assert horodecki_max(rho) >= max_chsh(rho) - 1e-12
    assert horodecki_max(PSI_PLUS) == pytest.approx(TSIRELSON)


def test_setting_validation_and_helpers():
    with pytest.raises(ConfigurationError):
        ChshSetting(a=float("nan"))
    assert DEFAULT_SETTING.degrees() == pytest.approx((0, 45, 22.5, 67.5))
    assert list(DEFAULT_SETTING.pairs) == ["ab", "ab'", "a'b", "a'b'"]


def test_correlation_from_counts():
    assert correlation_from_counts([50, 50, 0, 0])[0] == 1
    e, se = correlation_from_counts([25, 25, 25, 25])
    assert e == 0 and se == pytest.approx(0.1)
    with pytest.raises(ConfigurationError):
        correlation_from_counts([0, 0, 0, 0])
    with pytest.raises(ConfigurationError):
        correlation_from_counts([1, 2, 3])


def test_chsh_from_equal_counts_is_zero():
    counts = {k: [100] * 4 for k in ("ab", "ab'", "a'b", "a'b'")}
    s, sigma = chsh_from_counts(counts)
    assert s == 0 and sigma > 0


def test_chsh_from_counts_zero_total():
    counts = {k: [100] * 4 for k in ("ab", "ab'", "a'b")} | {"a'b'": [0] * 4}
    with pytest.raises(ConfigurationError):
        chsh_from_counts(counts)
    with pytest.raises(ConfigurationError):
        chsh_from_counts({"ab": [1] * 4})


def test_chsh_counts_layout():
    counts = chsh_counts(PSI_PLUS, BELL_SETTINGS["psi+"], seed=1)
    assert set(counts) == {"ab", "ab'", "a'b", "a'b'"}
    assert all(len(v) == len(OUTCOMES) for v in counts.values())
    assert counts == chsh_counts(PSI_PLUS, BELL_SETTINGS["psi+"], seed=1)


def test_ideal_long_run_approaches_tsirelson():
    s, sigma = chsh_from_counts(chsh_counts(PSI_PLUS, BELL_SETTINGS["psi+"], 1e4, 100.0, seed=2))
    assert abs(s - TSIRELSON) < 0.01
    assert sigma < 0.005


def test_sigma_shrinks_with_duration():
    rho = phase_damped_bell(0.83)
    setting = optimal_chsh_setting(rho)
    short = chsh_from_counts(chsh_counts(rho, setting, 1e4, 1.0, seed=3))[1]
    long = chsh_from_counts(chsh_counts(rho, setting, 1e4, 100.0, seed=3))[1]
    assert long == pytest.approx(short / 10, rel=0.1)


@pytest.mark.parametrize("seed", range(5))
def test_estimator_matches_density_oracle(seed):
    rho = phase_damped_bell(0.83)
    setting = optimal_chsh_setting(rho)
    s, sigma = chsh_from_counts(chsh_counts(rho, setting, pair_rate=1e5, seed=seed))
    assert abs(s - chsh_s(rho, setting)) < 3 * sigma
