"""Slope fitting and the decay-rate report suite."""

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import linregress

from radhydro import decay, solver
from radhydro.decay import DecayReport, fit_decay, verify_rates
from radhydro.model import PhysicalParams, derive_constants

REF_CONSTS = derive_constants(PhysicalParams())


# ---------------------------------------------------------------------------
# fit_decay on synthetic series
# ---------------------------------------------------------------------------

def test_fit_exact_power_law():
    t = np.geomspace(1.0, 1.0e4, 40)
    slope = fit_decay(t, (1.0 + t) ** -0.75, (10.0, 1.0e4))
    assert abs(slope + 0.75) < 1e-10


def test_fit_constant_series():
    t = np.geomspace(10.0, 1.0e3, 20)
    assert abs(fit_decay(t, np.full_like(t, 3.7), (10.0, 1.0e3))) < 1e-12


def test_fit_noisy_power_law():
    rng = np.random.default_rng(7)
    t = np.geomspace(10.0, 1.0e4, 50)
    norms = (1.0 + t) ** -1.25 * (1.0 + 0.01 * rng.standard_normal(50))
    slope = fit_decay(t, norms, (10.0, 1.0e4))
    assert abs(slope + 1.25) < 0.02
    # same regression through an independent implementation
    check = linregress(np.log1p(t), np.log(norms)).slope
    assert abs(slope - check) < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    exponent=st.floats(min_value=-3.0, max_value=0.0),
    amplitude=st.floats(min_value=1e-6, max_value=1e6),
    n_samples=st.integers(min_value=12, max_value=60),
)
def test_fit_recovers_any_exponent(exponent, amplitude, n_samples):
    t = np.geomspace(10.0, 1.0e4, n_samples)
    slope = fit_decay(t, amplitude * (1.0 + t) ** exponent, (10.0, 1.0e4))
    assert abs(slope - exponent) < 1e-8


def test_fit_ignores_samples_outside_window():
    t = np.geomspace(1.0, 1.0e4, 30)
    norms = (1.0 + t) ** -1.25
    norms[t < 10.0] = -5.0  # garbage, but excluded by the window
    slope = fit_decay(t, norms, (10.0, 1.0e4))
    assert abs(slope + 1.25) < 1e-10


def test_fit_validation():
    t = np.geomspace(10.0, 1.0e4, 20)
    good = (1.0 + t) ** -1.0
    with pytest.raises(ValueError, match="at least 8"):
        fit_decay(t[:7], good[:7], (10.0, 1.0e4))
    with pytest.raises(ValueError, match="at least 8"):
        fit_decay(t, good, (10.0, 20.0))
    bad = good.copy()
    bad[10] = 0.0
    with pytest.raises(ValueError, match="positive"):
        fit_decay(t, bad, (10.0, 1.0e4))
    with pytest.raises(ValueError, match="increasing"):
        fit_decay(t[::-1], good, (10.0, 1.0e4))
    with pytest.raises(ValueError, match="equal length"):
        fit_decay(t, good[:-1], (10.0, 1.0e4))
    with pytest.raises(ValueError, match="1-d"):
        fit_decay(t.reshape(4, 5), good.reshape(4, 5), (10.0, 1.0e4))


# ---------------------------------------------------------------------------
# report invariants and serialization
# ---------------------------------------------------------------------------

def _report(**kw):
    t = np.geomspace(10.0, 1.0e4, 12)
    base = dict(quantity="nabla^0 state", times=tuple(t),
                norms=tuple((1.0 + t) ** -0.75), window=(10.0, 1.0e4),
                slope=-0.75, target=-0.75, tolerance=0.05, passed=True)
    base.update(kw)
    return DecayReport(**base)


def test_report_record_round_trip():
    rep = _report(slope=-0.761)
    rec = rep.record()
    assert set(rec) == {"quantity", "slope", "target", "tolerance", "pass"}
    assert rec["pass"] is True and rec["slope"] == -0.761
    assert json.loads(json.dumps(rec)) == rec


def test_report_window_invariants():
    with pytest.raises(ValueError, match="transient"):
        _report(window=(5.0, 1.0e4))
    with pytest.raises(ValueError, match="increasing pair"):
        _report(window=(100.0, 20.0))
    with pytest.raises(ValueError, match="at least 8"):
        _report(window=(10.0, 30.0))
    with pytest.raises(ValueError, match="tolerance"):
        _report(tolerance=0.0)


# ---------------------------------------------------------------------------
# verify_rates wiring (synthetic norm tables)
# ---------------------------------------------------------------------------

def _spec_exponent(spec):
    m, component, time_derivative = spec
    if time_derivative:
        return -1.25 if component == "hydro" else -0.75
    if component == "xi":
        return -1.25 - 0.5 * m
    return -0.75 - 0.5 * m if m <= 2 else -1.75


def _fake_table(seen):
    def fake(consts, profile, specs, times, rtol=1e-6):
        seen.append(consts)
        times = np.asarray(times, dtype=float)
        rows = [(1.0 + times) ** _spec_exponent(s) for s in specs]
        return np.array(rows)
    return fake


def test_verify_rates_structure(monkeypatch):
    seen = []
    monkeypatch.setattr(solver, "semigroup_norm_table", _fake_table(seen))
    reports = verify_rates(REF_CONSTS)
    assert len(reports) == 20
    assert [c.kappa for c in seen] == [1.0, 0.0]
    names = [r.quantity for r in reports]
    assert names[:10] == [
        "nabla^0 state", "nabla^1 state", "nabla^2 state", "nabla^3 state",
        "nabla^4 state", "nabla^0 Xi", "nabla^1 Xi", "nabla^2 Xi",
        "d/dt (rho,u)", "d/dt (theta,j0)"]
    assert all(n.startswith("kappa=0: ") for n in names[10:])
    for rep in reports:
        assert rep.passed
        assert abs(rep.slope - rep.target) < 1e-10
        assert rep.window == (10.0, 1.0e4)
    two_sided = [r.two_sided for r in reports[:10]]
    assert two_sided == [True, True, True, False, False,
                         False, False, False, False, False]
    dumped = json.dumps([r.record() for r in reports], sort_keys=True)
    assert json.loads(dumped)[0]["quantity"] == "nabla^0 state"


def test_verify_rates_m_list_and_variants(monkeypatch):
    seen = []
    monkeypatch.setattr(solver, "semigroup_norm_table", _fake_table(seen))
    reports = verify_rates(REF_CONSTS, m_list=(0, 2))
    assert len(reports) == 12  # (2 fields + 2 Xi + 2 time derivatives) x 2
    assert verify_rates(REF_CONSTS, include_kappa_zero=False)[9].quantity \
        == "d/dt (theta,j0)"
    assert len(verify_rates(REF_CONSTS, include_kappa_zero=False)) == 10
    # a kappa = 0 input has no second variant to run
    consts0 = dataclasses.replace(REF_CONSTS, kappa=0.0)
    reports0 = verify_rates(consts0)
    assert len(reports0) == 10
    assert not any(r.quantity.startswith("kappa=0:") for r in reports0)


def test_verify_rates_validation():
    with pytest.raises(ValueError, match="increasing"):
        verify_rates(REF_CONSTS, t_grid=[100.0, 10.0, 1000.0])
    with pytest.raises(ValueError, match="two decades"):
        verify_rates(REF_CONSTS, t_grid=np.geomspace(10.0, 500.0, 12))
    with pytest.raises(ValueError, match="two decades"):
        verify_rates(REF_CONSTS, t_grid=np.geomspace(1.0, 2000.0, 7))
    with pytest.raises(ValueError, match="0..4"):
        verify_rates(REF_CONSTS, m_list=(0, 5))
    with pytest.raises(ValueError, match="duplicates"):
        verify_rates(REF_CONSTS, m_list=(1, 1))
    with pytest.raises(ValueError, match="duplicates"):
        verify_rates(REF_CONSTS, m_list=())
    with pytest.raises(ValueError, match="tolerance"):
        verify_rates(REF_CONSTS, tolerance=1.5)


# ---------------------------------------------------------------------------
# the measured suite on the reference constants
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def reference_reports():
    t_grid = np.geomspace(10.0, 1.0e4, 13)
    return verify_rates(REF_CONSTS, t_grid=t_grid)


def test_reference_suite_all_pass(reference_reports):
    assert len(reference_reports) == 20
    for rep in reference_reports:
        assert rep.passed, f"{rep.quantity}: {rep.slope:+.4f} vs {rep.target}"


def test_reference_suite_measured_slopes(reference_reports):
    by = {r.quantity: r for r in reference_reports}
    expected = {
        "nabla^0 state": -0.759, "nabla^1 state": -1.275,
        "nabla^2 state": -1.790, "nabla^0 Xi": -1.254,
        "d/dt (rho,u)": -1.252,
        "kappa=0: nabla^0 state": -0.757, "kappa=0: nabla^1 state": -1.265,
        "kappa=0: nabla^2 state": -1.777, "kappa=0: nabla^0 Xi": -1.297,
        "kappa=0: d/dt (rho,u)": -1.256,
    }
    for name, value in expected.items():
        assert abs(by[name].slope - value) < 0.03, name


def test_time_derivative_of_thermo_pair_exceeds_its_bound(reference_reports):
    # the claimed -3/4 for d/dt (theta, j0) is an upper bound only; the
    # measured linear-path slope is far steeper, and passes one-sidedly
    for name in ("d/dt (theta,j0)", "kappa=0: d/dt (theta,j0)"):
        rep = next(r for r in reference_reports if r.quantity == name)
        assert not rep.two_sided and rep.passed
        assert rep.slope < -1.2
        assert rep.slope < rep.target - rep.tolerance


def test_kappa_zero_higher_xi_modes_decay_faster(reference_reports):
    # with no heat conduction the slow branch is weakly damped and keeps
    # the m >= 1 Xi fits well below the claimed bound on finite windows
    for name, floor in (("kappa=0: nabla^1 Xi", -2.1),
                        ("kappa=0: nabla^2 Xi", -2.9)):
        rep = next(r for r in reference_reports if r.quantity == name)
        assert rep.passed and not rep.two_sided
        assert floor < rep.slope < rep.target - rep.tolerance


def test_derivative_laddering(reference_reports):
    by = {r.quantity: r.slope for r in reference_reports}
    for prefix in ("", "kappa=0: "):
        for m in (0, 1):
            assert by[f"{prefix}nabla^{m + 1} state"] \
                <= by[f"{prefix}nabla^{m} state"] - 0.4


def test_damped_mode_outpaces_temperature():
    t = np.geomspace(10.0, 1.0e3, 9)
    for consts in (REF_CONSTS, dataclasses.replace(REF_CONSTS, kappa=0.0)):
        profile = solver.reference_profile(consts)
        table = solver.semigroup_norm_table(
            consts, profile, [(0, "theta", False), (0, "xi", False)], t)
        s_theta = fit_decay(t, table[0], (10.0, 1.0e3))
        s_xi = fit_decay(t, table[1], (10.0, 1.0e3))
        assert s_xi <= s_theta - 0.4


def test_slopes_invariant_under_amplitude_rescale():
    t = np.geomspace(10.0, 1.0e3, 9)
    profile = solver.reference_profile(REF_CONSTS)
    scaled = dataclasses.replace(
        profile, v0=tuple(3.0 * v for v in profile.v0))
    specs = [(0, None, False), (0, "xi", False)]
    base = solver.semigroup_norm_table(REF_CONSTS, profile, specs, t)
    big = solver.semigroup_norm_table(REF_CONSTS, scaled, specs, t)
    for row_a, row_b in zip(base, big):
        a = fit_decay(t, row_a, (10.0, 1.0e3))
        b = fit_decay(t, row_b, (10.0, 1.0e3))
        assert abs(a - b) < 0.01  # in fact agrees to rounding noise
        assert abs(a - b) < 1e-9
