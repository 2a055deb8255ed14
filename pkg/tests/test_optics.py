import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sagnac_epr.errors import ConfigurationError
from sagnac_epr.fock import basis_state, overlap, path_modes, vacuum
from sagnac_epr.optics import (ModeTransform, PolarizerSetting, bs, hwp, hwp_jones, pbs,
                               phase_shift, polarizer_project, polarizer_vector, qwp,
                               qwp_jones, reverse_hom_check, reverse_hom_state)

angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)

LH, LV = path_modes("loop")
A_H, A_V, B_H, B_V = path_modes("a", "b")
O1H, O1V, O2H, O2V = path_modes("out1", "out2")


@given(angles)
def test_waveplates_unitary(t):
    for m in (hwp(t, "loop"), qwp(t, "loop"), phase_shift(t, "loop"), phase_shift(t, "loop", "V")):
        assert m.unitarity_error() < 1e-12


@given(angles)
def test_hwp_involutive(t):
    j = hwp_jones(t)
    assert np.max(np.abs(j @ j - np.eye(2))) < 1e-14


@given(angles)
def test_hwp_determinant_minus_one(t):
    assert np.linalg.det(hwp_jones(t)) == pytest.approx(-1)


@given(angles)
def test_qwp_fourth_power_identity_up_to_phase(t):
    m = np.linalg.matrix_power(qwp_jones(t), 4)
    phase = m[0, 0]
    assert abs(abs(phase) - 1) < 1e-12
    assert np.allclose(m, phase * np.eye(2), atol=1e-12)


def test_hwp45_swaps_h_and_v():
    t = hwp(math.pi / 4, "loop")
    assert t.apply(basis_state((LH, LV), {LV: 1})) .isclose(basis_state((LH, LV), {LH: 1}))
    assert t.apply(basis_state((LH, LV), {LH: 1})).isclose(basis_state((LH, LV), {LV: 1}))


def test_hwp22_5_diagonal_map():
    j = hwp_jones(math.pi / 8)
    s = 1 / math.sqrt(2)
    # column j = image of a_j^dagger
    assert np.allclose(j[:, 0], [s, s])
    assert np.allclose(j[:, 1], [s, -s])


def test_qwp0_adds_quarter_phase_to_v():
    j = qwp_jones(0.0)
    assert np.allclose(j, np.diag([1, 1j]))


def test_qwp45_makes_h_circular():
    out = qwp_jones(math.pi / 4) @ np.array([1, 0])
    assert np.linalg.norm(out) == pytest.approx(1)
    assert abs(out[0]) == pytest.approx(abs(out[1]))
    assert abs(np.angle(out[1] / out[0])) == pytest.approx(math.pi / 2)


def test_pbs_routes_pair_to_both_outputs():
    modes = path_modes("a", "b", "out1", "out2")
    t = pbs("a", "b", "out1", "out2")
    s = basis_state(modes, {path_modes("a")[0]: 1, path_modes("a")[1]: 1})
    out = t.apply(s)
    assert overlap(out, basis_state(modes, {O1H: 1, O2V: 1})) == pytest.approx(1)


def test_pbs_transmits_double_h():
    modes = path_modes("a", "b", "out1", "out2")
    s = basis_state(modes, {path_modes("a")[0]: 2})
    out = pbs("a", "b", "out1", "out2").apply(s)
    assert overlap(out, basis_state(modes, {O1H: 2})) == pytest.approx(1)


def test_pbs_vacuum_and_unitarity():
    t = pbs("a", "b")
    assert t.unitarity_error() < 1e-12
    v = vacuum((A_H, A_V, B_H, B_V))
    assert t.apply(v) == v


def test_bs_hom_no_coincidence():
    modes = (A_H, A_V, B_H, B_V)
    s = basis_state(modes, {A_H: 1, B_H: 1})
    out = bs(0.5, "a", "b").apply(s)
    assert abs(out.amplitude({A_H: 1, B_H: 1})) < 1e-15
    assert out.norm() == pytest.approx(1)


def test_bs_splits_orthogonal_pair_half_the_time():
    modes = (A_H, A_V, B_H, B_V)
    out = bs(0.5, "a", "b").apply(basis_state(modes, {A_H: 1, A_V: 1}))
    split = abs(out.amplitude({A_H: 1, B_V: 1})) ** 2 + abs(out.amplitude({A_V: 1, B_H: 1})) ** 2
    assert split == pytest.approx(0.5, abs=1e-12)


def test_bs_zero_reflectivity_is_identity():
    assert np.allclose(bs(0.0, "a", "b").matrix, np.eye(4))


@pytest.mark.parametrize("r", [-0.1, 1.1, float("nan")])
def test_bs_reflectivity_range(r):
    with pytest.raises(ConfigurationError):
        bs(r, "a", "b")


def test_transform_composition_and_inverse():
    a, b = hwp(0.3, "loop"), qwp(1.1, "loop")
    s = basis_state((LH, LV), {LH: 1, LV: 1})
    assert (a @ b).apply(s).isclose(a.apply(b.apply(s)))
    assert (a @ b).inverse().apply((a @ b).apply(s)).isclose(s)


def test_non_unitary_rejected():
    with pytest.raises(ConfigurationError):
        ModeTransform((LH, LV), np.array([[1, 0], [0, 2]]))


@pytest.mark.parametrize("angle, prob", [(0.0, 1.0), (math.pi / 2, 0.0), (math.pi / 4, 0.5)])
def test_polarizer_on_h_photon(angle, prob):
    s = basis_state((LH, LV), {LH: 1})
    out = polarizer_project(s, PolarizerSetting(angle), "loop")
    assert out.norm() ** 2 == pytest.approx(prob, abs=1e-12)


def test_polarizer_absent_passes_everything():
    s = basis_state((LH, LV), {LV: 1})
    assert polarizer_project(s, PolarizerSetting(present=False), "loop") == s


def test_polarizer_projector_idempotent():
    p = PolarizerSetting(0.37).projector()
    assert np.allclose(p @ p, p)


def test_malus_law_grid():
    grid = np.linspace(0, math.pi, 10)
    worst = 0.0
    for alpha in grid:
        for beta in grid:
            jones = polarizer_vector(beta)
            s = vacuum((LH, LV))
            s = s._with({(1, 0): jones[0], (0, 1): jones[1]})
            p = polarizer_project(s, PolarizerSetting(alpha), "loop").norm() ** 2
            worst = max(worst, abs(p - math.cos(alpha - beta) ** 2))
    assert worst < 1e-12


def test_reverse_hom_at_pi():
    amps = reverse_hom_check(math.pi)
    assert abs(amps["1H1V"]) == pytest.approx(1, abs=1e-12)
    assert abs(amps["2H"]) < 1e-12 and abs(amps["2V"]) < 1e-12


def test_reverse_hom_at_zero():
    assert abs(reverse_hom_check(0.0)["1H1V"]) < 1e-12


def test_reverse_hom_quarter():
    assert abs(reverse_hom_check(math.pi / 2)["1H1V"]) ** 2 == pytest.approx(0.5, abs=1e-12)


def test_reverse_hom_law_grid():
    phis = np.linspace(0, 2 * math.pi, 100)
    err = max(abs(abs(reverse_hom_check(p)["1H1V"]) ** 2 - math.sin(p / 2) ** 2) for p in phis)
    assert err < 1e-12


def test_forward_hom_round_trip():
    t = hwp(math.pi / 8, "loop")
    pair = basis_state((LH, LV), {LH: 1, LV: 1})
    fwd = t.apply(pair)
    target = reverse_hom_state(math.pi).normalize()
    assert overlap(fwd, target) == pytest.approx(1, abs=1e-12)
    back = t.inverse().apply(fwd)
    assert overlap(back, pair) ** 2 > 1 - 1e-12
