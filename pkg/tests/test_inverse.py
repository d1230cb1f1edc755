import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracinv.errors import IncompatibleData, SmoothnessViolation, SmoothnessWarning
from fracinv.fracode import SourceTimeProfile, b_coefficient, mode_homogeneous
from fracinv.inverse import (DEGENERATE, REGULAR, DegenerateMode, FreeCoefficientPolicy,
                             InverseProblem, assemble, check_compatibility, classify,
                             degenerate_cosine_profile, forward, mode_table, reconstruct_mode,
                             sandwich_report, uniqueness_probe)
from fracinv.multiml import FractionalOrders
from fracinv.spectral import EllipticSymbol, SpectralField

ORDERS = FractionalOrders((0.7, 0.4), (1.0, 0.5))
G = SourceTimeProfile.polynomial([1.0, 1.0])


def _problem(dim=1, **kw):
    kw.setdefault("smoothness", "off")
    return InverseProblem(ORDERS, EllipticSymbol.laplacian(dim), G, t0=0.5, **kw)


@pytest.fixture(scope="module")
def table_1d():
    return mode_table(_problem(1), 12)


@pytest.fixture(scope="module")
def degenerate_setup():
    g, omega = degenerate_cosine_profile(ORDERS, 4.0, 1.0)
    problem = InverseProblem(ORDERS, EllipticSymbol.laplacian(1), g, t0=1.0, T=1.0,
                             smoothness="off")
    table = mode_table(problem, 6)
    return problem, table, omega


def _data(problem, cutoff, seed, f=None, table=None):
    dim = problem.symbol.dim
    phi = SpectralField.random(dim, cutoff, seed=seed, decay=3.0)
    f = f if f is not None else SpectralField.random(dim, cutoff, seed=seed + 1, decay=3.0)
    psi = SpectralField(dim, cutoff, forward(problem, phi, f, [problem.t0], table)[0])
    return phi, f, psi


# ---------------------------------------------------------------- single mode


def test_reconstruct_regular_mode():
    lam, phi, f = 9.0, 0.3 - 0.1j, 1.7 + 0.2j
    b = b_coefficient(ORDERS, lam, G, 0.5)
    H = mode_homogeneous(ORDERS, lam, 0.5)
    got = reconstruct_mode(ORDERS, lam, phi, phi * H + f * b, G, 0.5)
    assert got == pytest.approx(f, rel=1e-13)


def test_reconstruct_zero_mode():
    b = b_coefficient(ORDERS, 0.0, G, 0.5)
    assert reconstruct_mode(ORDERS, 0.0, 2.0, 2.0 + 3.0 * b, G, 0.5) == pytest.approx(3.0)


def test_reconstruct_flags_degenerate_mode():
    marker = reconstruct_mode(ORDERS, 9.0, 1.0, 0.5, G, 0.5, b_t0=1e-14, homogeneous=0.5)
    assert isinstance(marker, DegenerateMode)
    assert marker.residual == 0.0
    assert check_compatibility(marker, free_value=4.0) == 4.0
    bad = reconstruct_mode(ORDERS, 9.0, 1.0, 0.6, G, 0.5, b_t0=1e-14, homogeneous=0.5)
    with pytest.raises(IncompatibleData) as exc:
        check_compatibility(bad)
    assert exc.value.modes == [bad]


def test_reconstruct_rejects_bad_time():
    with pytest.raises(ValueError):
        reconstruct_mode(ORDERS, 1.0, 1.0, 1.0, G, 0.0)


def test_free_coefficient_policy():
    pol = FreeCoefficientPolicy.from_mapping({(2,): 5.0}, default=1.0)
    assert pol.value_for((2,)) == 5.0
    assert pol.value_for([-2]) == 1.0
    assert FreeCoefficientPolicy.constant(3.0).value_for((0,)) == 3.0


def test_problem_validation():
    with pytest.raises(ValueError):
        InverseProblem(ORDERS, EllipticSymbol.laplacian(1), G, t0=2.0, T=1.0)
    with pytest.raises(ValueError):
        InverseProblem(ORDERS, EllipticSymbol.laplacian(1), G, t0=0.5, smoothness="loud")
    assert InverseProblem(ORDERS, EllipticSymbol.laplacian(3), G, t0=0.5).tau == 2.0


# ---------------------------------------------------------------- forward and round trip


def test_forward_initial_slice_is_phi(table_1d):
    problem = _problem(1)
    phi, f, _ = _data(problem, 12, 0)
    u = forward(problem, phi, f, [0.0, 0.25, 0.5])
    assert u.shape == (3, 25)
    np.testing.assert_allclose(u[0], phi.coeffs, atol=1e-15)
    with pytest.raises(ValueError):
        forward(problem, phi, SpectralField.zeros(1, 3), [0.5])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2))
def test_forward_is_linear(seed, a, c):
    problem = _problem(1)
    phi1, f1, _ = _data(problem, 4, seed)
    phi2, f2, _ = _data(problem, 4, seed + 7)
    lhs = forward(problem, SpectralField(1, 4, a * phi1.coeffs + c * phi2.coeffs),
                  SpectralField(1, 4, a * f1.coeffs + c * f2.coeffs), [0.5])
    rhs = a * forward(problem, phi1, f1, [0.5]) + c * forward(problem, phi2, f2, [0.5])
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_roundtrip_recovers_source(table_1d, seed):
    problem = _problem(1)
    phi, f, psi = _data(problem, 12, seed)
    res = assemble(problem, phi, psi, table=table_1d)
    np.testing.assert_allclose(res.f.coeffs, f.coeffs, rtol=1e-9, atol=1e-13)
    assert res.unique
    assert res.diagnostics["overdetermination_relative"] < 1e-12
    assert res.f.is_hermitian(1e-10)


def test_roundtrip_two_dimensions_with_threads():
    problem = _problem(2)
    phi, f, psi = _data(problem, 6, 3)
    serial = assemble(problem, phi, psi)
    threaded = assemble(problem, phi, psi, threads=4)
    np.testing.assert_array_equal(serial.f.coeffs, threaded.f.coeffs)
    err = np.linalg.norm((serial.f.coeffs - f.coeffs).ravel()) / f.l2()
    assert err < 1e-10
    assert serial.u.shape == (3, 13, 13)
    assert serial.u_at(1).coeffs == pytest.approx(psi.coeffs, abs=1e-12)


def test_amplification_grows_linearly(table_1d):
    problem = _problem(1)
    phi, _, psi = _data(problem, 12, 0)
    amp = assemble(problem, phi, psi, table=table_1d).diagnostics["amplification"]
    assert amp["slope"] > 0 and amp["r2"] > 0.99


def test_table_must_cover_field(table_1d):
    problem = _problem(1)
    phi, _, psi = _data(problem, 14, 0)
    with pytest.raises(ValueError):
        assemble(problem, phi, psi, table=table_1d)


def test_mismatched_fields_rejected():
    problem = _problem(1)
    with pytest.raises(ValueError):
        assemble(problem, SpectralField.zeros(1, 3), SpectralField.zeros(1, 4))
    with pytest.raises(ValueError):
        assemble(problem, SpectralField.zeros(2, 3), SpectralField.zeros(2, 3))


def test_sandwich_report_constant_source(table_1d):
    problem = InverseProblem(ORDERS, EllipticSymbol.laplacian(1), SourceTimeProfile.constant(1.0),
                             t0=0.5)
    rep = sandwich_report(problem, mode_table(problem, 12))
    assert rep["holds"] and rep["same_sign"]
    assert 0 < rep["C0"] <= rep["C1"] <= 1.0


# ---------------------------------------------------------------- smoothness


def test_rough_data_warns_then_errors():
    problem = _problem(1, smoothness="warn")
    phi = SpectralField.from_modes(1, 8, {(8,): 1.0, (-8,): 1.0})
    psi = phi.copy()
    with pytest.warns(SmoothnessWarning):
        res = assemble(problem, phi, psi)
    assert not res.diagnostics["smoothness"]["passed"]
    with pytest.raises(SmoothnessViolation):
        assemble(_problem(1, smoothness="error"), phi, psi)


def test_smooth_data_is_quiet(table_1d):
    problem = _problem(1, smoothness="warn")
    phi, _, psi = _data(problem, 12, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SmoothnessWarning)
        res = assemble(problem, phi, psi, table=table_1d)
    assert res.diagnostics["smoothness"]["passed"]


# ---------------------------------------------------------------- degenerate modes


def test_degenerate_profile_zeroes_denominator(degenerate_setup):
    problem, table, omega = degenerate_setup
    i = int(np.searchsorted(table.lams, 4.0))
    assert abs(table.b_t0[i]) < 1e-12
    assert 0.5 < omega < 30
    classes, _ = classify(problem, table, 6)
    status = {c.n: c.status for c in classes}
    assert status[(2,)] == status[(-2,)] == DEGENERATE
    assert all(s == REGULAR for n, s in status.items() if abs(n[0]) != 2)


def test_compatible_degenerate_data_is_non_unique(degenerate_setup):
    problem, table, _ = degenerate_setup
    phi, f, psi = _data(problem, 6, 11, table=table)
    free = FreeCoefficientPolicy.from_mapping({(2,): f[(2,)], (-2,): f[(-2,)]})
    res = assemble(problem, phi, psi, free=free, table=table)
    assert not res.unique
    assert {c.n for c in res.degenerate_modes} == {(2,), (-2,)}
    np.testing.assert_allclose(res.f.coeffs, f.coeffs, rtol=1e-8, atol=1e-10)
    probe = uniqueness_probe(res)
    assert probe["non_unique_witnessed"] and probe["both_valid"]
    assert not probe["identical"]
    assert probe["alternative_f"][(2,)] == 1.0


def test_incompatible_degenerate_data_raises(degenerate_setup):
    problem, table, _ = degenerate_setup
    phi, _, psi = _data(problem, 6, 11, table=table)
    psi[(2,)] += 1e-3
    psi[(-2,)] += 1e-3
    with pytest.raises(IncompatibleData) as exc:
        assemble(problem, phi, psi, table=table)
    assert sorted(m.n for m in exc.value.modes) == [(-2,), (2,)]


def test_unique_probe_is_bitwise_identical(table_1d):
    problem = _problem(1)
    phi, _, psi = _data(problem, 12, 5)
    probe = uniqueness_probe(assemble(problem, phi, psi, table=table_1d))
    assert probe["unique"] and probe["identical"] and probe["difference_l2"] == 0.0


def test_degenerate_search_reports_failure():
    with pytest.raises(ValueError):
        degenerate_cosine_profile(ORDERS, 4.0, 1.0, omega_range=(0.1, 0.3), n_scan=4)


def test_degenerate_count_stable_under_cutoff_ladder(degenerate_setup):
    problem, _, _ = degenerate_setup
    counts = []
    for cutoff in (6, 12, 24):
        classes, _ = classify(problem, mode_table(problem, cutoff), cutoff)
        counts.append(sum(c.status == DEGENERATE for c in classes))
    assert counts == [2, 2, 2]
