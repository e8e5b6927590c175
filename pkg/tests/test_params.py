import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisecool.errors import InvalidArgument
from noisecool.params import (TWO_PI, CoherentDrive, NoiseDrive, SimConfig, SystemParams,
                              derive_seed, load_params, params_from_dict, params_to_dict,
                              renormalize_for_probe, require_valid, thermal_occupancy, validate)

# CODATA exact values, kept separate from the implementation's scipy.constants
H = 6.62607015e-34
KB = 1.380649e-23


def bose_oracle(T, f_hz):
    return 1.0 / math.expm1(H * f_hz / (KB * T))


def codes(violations):
    return {v.code for v in violations}


# --- lab parameter set -----------------------------------------------------

def test_lab_set_values(paper):
    assert paper.omega_m / TWO_PI == pytest.approx(9.22e6)
    assert paper.gamma / TWO_PI == pytest.approx(120)
    assert paper.kappa / TWO_PI == pytest.approx(1.06e6)
    assert paper.g0 / TWO_PI == pytest.approx(39)
    assert paper.n_th == 24
    assert paper.probe_cooperativity == pytest.approx(2.2)
    assert paper.kappa_ext_fraction == 1.0


def test_lab_set_validates(paper):
    assert validate(paper) == []


def test_desk_set_validates(desk):
    assert validate(desk) == []
    assert desk.omega_m / desk.kappa == pytest.approx(10)
    assert desk.kappa / desk.gamma == pytest.approx(1e3)
    assert desk.n_th == 20


# --- thermal occupancy -------------------------------------------------------

def test_thermal_occupancy_lab_temperature():
    n = thermal_occupancy(10.6e-3, TWO_PI * 9.22e6)
    assert n == pytest.approx(bose_oracle(10.6e-3, 9.22e6), rel=1e-12)
    assert n == pytest.approx(23.5, rel=0.01)
    assert n == pytest.approx(24, rel=0.05)


def test_thermal_occupancy_ln2_gives_one():
    f = 5e6
    T = H * f / (KB * math.log(2))
    assert thermal_occupancy(T, TWO_PI * f) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("ratio", [100, 300, 1e4])
def test_thermal_occupancy_high_temperature(ratio):
    f = 1e6
    T = ratio * H * f / KB
    assert thermal_occupancy(T, TWO_PI * f) == pytest.approx(ratio, rel=5e-3)


@pytest.mark.parametrize("T,w", [(0, 1.0), (-1, 1.0), (1.0, 0), (1.0, -5)])
def test_thermal_occupancy_rejects_nonpositive(T, w):
    with pytest.raises(InvalidArgument):
        thermal_occupancy(T, w)


@given(st.lists(st.floats(1e-3, 10), min_size=2, max_size=8, unique=True),
       st.floats(1e5, 1e10))
def test_thermal_occupancy_monotone(temps, w):
    temps = sorted(temps)
    n = thermal_occupancy(np.array(temps), w)
    assert np.all(np.diff(n) > 0)
    ws = np.array([w, 2 * w, 4 * w])
    assert np.all(np.diff(thermal_occupancy(temps[0], ws)) < 0)


# --- probe renormalization -------------------------------------------------

def test_renormalize_identity_without_probe(desk):
    assert renormalize_for_probe(desk) == desk


def test_renormalize_lab_probe(paper):
    r = renormalize_for_probe(paper)
    assert r.gamma == pytest.approx(3.2 * paper.gamma)
    assert r.n_th == pytest.approx(7.5)
    assert r.probe_cooperativity == 0


def test_renormalize_unit_cooperativity(paper):
    r = renormalize_for_probe(paper.replace(probe_cooperativity=1.0))
    assert r.gamma / TWO_PI == pytest.approx(240)


def test_renormalize_idempotent(paper):
    once = renormalize_for_probe(paper)
    assert renormalize_for_probe(once) == once


@given(st.floats(1, 1e4), st.floats(0, 1e3), st.floats(0, 100))
def test_renormalize_preserves_heat_load(gamma, n_th, c):
    p = SystemParams(1e7, gamma, 1e6, 10.0, n_th, probe_cooperativity=c)
    r = renormalize_for_probe(p)
    assert r.gamma * r.n_th == pytest.approx(gamma * n_th, rel=1e-12, abs=1e-300)


# --- validation --------------------------------------------------------------

def test_validate_resolved_sideband(desk):
    assert "RESOLVED_SIDEBAND_VIOLATED" in codes(validate(desk.replace(kappa=2 * desk.omega_m)))


def test_validate_sigma_zero(desk):
    assert "SIGMA_NONPOSITIVE" in codes(validate(desk, NoiseDrive(1.0, 0.0)))


def test_validate_box_leak(desk):
    d = NoiseDrive(1.0, desk.omega_m, center_detuning=0.6 * desk.omega_m)
    assert "BOX_LEAKS_BLUE_SIDEBAND" in codes(validate(desk, d))


def test_validate_config_gates(desk):
    bad = SimConfig(dt=0.2 / desk.kappa, t_total=1e-3, t_burn=2e-3, n_traj=0, sample_stride=0)
    c = codes(validate(desk, CoherentDrive(1.0), bad))
    assert {"DT_STABILITY", "BURN_NOT_BEFORE_END", "N_TRAJ_INVALID", "STRIDE_INVALID"} <= c


def test_validate_noise_sampling_gates(desk):
    sigma = 0.2 * desk.kappa
    cfg = SimConfig(dt=TWO_PI / (5 * sigma), t_total=1e-6, t_burn=0)
    c = codes(validate(desk, NoiseDrive(1.0, sigma), cfg))
    assert {"DT_UNDERSAMPLES_BAND", "NOISE_TOO_SHORT"} <= c


def test_validate_negative_fields(desk):
    p = desk.replace(gamma=-1, n_th=-1, g0=-1, kappa_ext_fraction=1.5)
    c = codes(validate(p, NoiseDrive(-1.0, 1.0, seed=-3)))
    assert {"GAMMA_NONPOSITIVE", "N_TH_NEGATIVE", "G0_NEGATIVE",
            "KAPPA_EXT_FRACTION_OUT_OF_RANGE", "FLUX_NEGATIVE", "SEED_OUT_OF_RANGE"} <= c


def test_require_valid_raises_with_code(desk):
    with pytest.raises(InvalidArgument) as info:
        require_valid(desk.replace(kappa=2 * desk.omega_m))
    assert info.value.code == "RESOLVED_SIDEBAND_VIOLATED"


finite_or_not = st.one_of(st.floats(allow_nan=True, allow_infinity=True), st.just(0.0))


@settings(max_examples=200)
@given(finite_or_not, finite_or_not, finite_or_not, finite_or_not, finite_or_not,
       finite_or_not, finite_or_not)
def test_validate_never_raises(wm, g, k, g0, nth, flux, sigma):
    p = SystemParams(wm, g, k, g0, nth)
    out = validate(p, NoiseDrive(flux, sigma), SimConfig(1e-8, 1e-3, 0.0))
    assert isinstance(out, list)


# --- seeds and files -------------------------------------------------------

def test_derive_seed_deterministic_and_distinct():
    a = [derive_seed(7, i) for i in range(100)]
    assert a == [derive_seed(7, i) for i in range(100)]
    assert len(set(a)) == 100
    assert derive_seed(8, 0) != a[0]
    assert all(0 <= s < 2**64 for s in a)


def test_params_dict_round_trip(paper):
    again = params_from_dict(params_to_dict(paper))
    for name in ("omega_m", "gamma", "kappa", "g0", "n_th", "probe_cooperativity"):
        assert getattr(again, name) == pytest.approx(getattr(paper, name), rel=1e-15)


def test_params_from_temperature(tmp_path):
    doc = {"omega_m": 9.22e6, "gamma": 120, "kappa": 1.06e6, "g0": 39, "temperature_mK": 10.6,
           "comment": "ignored"}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    p = load_params(path)
    assert p.n_th == pytest.approx(bose_oracle(10.6e-3, 9.22e6), rel=1e-12)


def test_params_rejects_unknown_keys():
    with pytest.raises(InvalidArgument):
        params_from_dict({"omega_m": 1, "gamma": 1, "kappa": 1, "g0": 1, "n_th": 1, "bogus": 2})
