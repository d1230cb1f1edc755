import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracinv.errors import AliasingRisk, SymbolNotNonnegative
from fracinv.spectral import (EllipticSymbol, SpectralField, analyze, ellipticity_constant,
                              equivalence_constants, grid_points, mode_list, read_coefficients_csv,
                              read_grid_csv, sobolev_norm, symbol_eval, synthesize,
                              write_coefficients_csv, write_grid_csv)


# ---------------------------------------------------------------- symbols


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_laplacian_and_biharmonic_symbols(dim):
    n = np.array([1, -2, 3][:dim])
    n2 = float(n @ n)
    assert symbol_eval(EllipticSymbol.laplacian(dim), n) == pytest.approx(n2)
    assert symbol_eval(EllipticSymbol.biharmonic(dim), n) == pytest.approx(n2 ** 2)


def test_mixed_symbol():
    # -d_xx - d_yy + d_xy is elliptic with A(n) = n1^2 + n2^2 - n1 n2
    sym = EllipticSymbol(2, 2, {(2, 0): -1.0, (0, 2): -1.0, (1, 1): -1.0})
    assert symbol_eval(sym, [2, 1]) == pytest.approx(4 + 1 + 2)
    assert ellipticity_constant(sym) > 0.4


@pytest.mark.parametrize("dim, order, coeffs", [
    (4, 2, {(2, 0, 0, 0): -1.0}),
    (1, 3, {(3,): 1.0}),
    (1, 2, {(1,): 1.0}),
    (2, 2, {(2,): 1.0}),
    (1, 2, {(-2,): 1.0}),
])
def test_symbol_rejects_bad_input(dim, order, coeffs):
    with pytest.raises(ValueError):
        EllipticSymbol(dim, order, coeffs)


def test_symbol_rejects_negative_values():
    sym = EllipticSymbol(1, 2, {(2,): 1.0})  # d_xx has symbol -n^2
    with pytest.raises(SymbolNotNonnegative):
        symbol_eval(sym, [1])


def test_symbol_spec_roundtrip():
    sym = EllipticSymbol.biharmonic(2)
    assert EllipticSymbol.from_spec(sym.to_spec()) == sym
    assert EllipticSymbol.from_spec({"kind": "laplacian", "dim": 3}) == EllipticSymbol.laplacian(3)


def test_mode_list_order_and_size():
    modes = mode_list(EllipticSymbol.laplacian(2), 2)
    assert len(modes) == 25
    assert modes[0] == ((0, 0), 0.0)
    assert [n for n, _ in modes[1:5]] == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    lams = [lam for _, lam in modes]
    assert lams == sorted(lams)
    with pytest.raises(ValueError):
        mode_list(EllipticSymbol.laplacian(1), -1)


def test_equivalence_constants_for_laplacian():
    # 1 + |n|^(4 tau) against (1 + |n|^2)^(2 tau)
    c1, c2 = equivalence_constants(EllipticSymbol.laplacian(2), 10, 1.5)
    assert 0 < c1 <= c2 <= 1.0 + 1e-12


# ---------------------------------------------------------------- fields


def test_field_indexing_and_resize():
    f = SpectralField.zeros(2, 3)
    f[(1, -2)] = 2 + 1j
    assert f[(1, -2)] == 2 + 1j
    g = f.resized(5)
    assert g[(1, -2)] == 2 + 1j and g.coeffs.shape == (11, 11)
    h = g.resized(1)
    assert h.l2() == 0.0


def test_field_rejects_bad_shape():
    with pytest.raises(ValueError):
        SpectralField(1, 2, np.zeros(4))


def test_from_modes_and_hermitian_part():
    f = SpectralField.from_modes(1, 3, {(2,): 1j})
    assert not f.is_hermitian()
    h = f.hermitian_part()
    assert h.is_hermitian()
    assert h[(-2,)] == pytest.approx(-0.5j)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_random_field_is_hermitian_and_reproducible(dim):
    a = SpectralField.random(dim, 3, seed=7, decay=2.0)
    b = SpectralField.random(dim, 3, seed=7, decay=2.0)
    assert a.is_hermitian()
    np.testing.assert_array_equal(a.coeffs, b.coeffs)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 3), st.integers(0, 1000))
def test_transform_roundtrip(dim, cutoff, extra, seed):
    if dim == 3:
        cutoff = min(cutoff, 3)
    fld = SpectralField.random(dim, cutoff, seed=seed)
    n_points = 2 * cutoff + 1 + extra
    grid = synthesize(fld, n_points)
    assert np.isrealobj(grid)
    back = analyze(grid, cutoff)
    np.testing.assert_allclose(back.coeffs, fld.coeffs, atol=1e-13)
    # Parseval in the value convention: grid mean square equals coefficient sum
    assert np.mean(grid ** 2) == pytest.approx(fld.l2() ** 2, rel=1e-12, abs=1e-300)


def test_synthesize_single_mode():
    fld = SpectralField.from_modes(1, 2, {(1,): 0.5, (-1,): 0.5})
    x = grid_points(8)[0]
    np.testing.assert_allclose(synthesize(fld, 8), np.cos(x), atol=1e-15)


def test_aliasing_guard():
    fld = SpectralField.random(1, 4, seed=0)
    with pytest.raises(AliasingRisk):
        synthesize(fld, 8)
    with pytest.raises(AliasingRisk):
        analyze(np.zeros(8), 4)
    with pytest.raises(ValueError):
        analyze(np.zeros((9, 8)), 2)


def test_sobolev_norm_weights():
    fld = SpectralField.from_modes(2, 2, {(1, 1): 1.0})
    assert sobolev_norm(fld, 0.0) == pytest.approx(1.0)
    assert sobolev_norm(fld, 1.0) == pytest.approx(np.sqrt(3.0))
    assert sobolev_norm(fld, 1.0, orthonormal=True) == pytest.approx(np.sqrt(3.0) * 2 * np.pi)
    with pytest.raises(ValueError):
        sobolev_norm(fld, -1.0)


# ---------------------------------------------------------------- CSV


@pytest.mark.parametrize("dim", [1, 2])
def test_coefficient_csv_roundtrip(tmp_path, dim):
    fld = SpectralField.random(dim, 3, seed=1)
    p = tmp_path / "c.csv"
    write_coefficients_csv(p, fld)
    back = read_coefficients_csv(p)
    np.testing.assert_array_equal(back.coeffs, fld.coeffs)
    header = p.read_text().splitlines()[0]
    assert header == ",".join([f"n{k + 1}" for k in range(dim)] + ["re", "im"])
    small = read_coefficients_csv(p, cutoff=1)
    assert small.cutoff == 1 and small[(0,) * dim] == fld[(0,) * dim]


def test_coefficient_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_coefficients_csv(p)


@pytest.mark.parametrize("cplx", [False, True])
def test_grid_csv_roundtrip(tmp_path, cplx):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(5, 5))
    if cplx:
        vals = vals + 1j * rng.normal(size=(5, 5))
    p = tmp_path / "g.csv"
    write_grid_csv(p, vals)
    np.testing.assert_array_equal(read_grid_csv(p), vals)


def test_grid_csv_rejects_ragged(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("x1,x2,value\n0,0,1\n0,1,2\n0,2,3\n")
    with pytest.raises(ValueError):
        read_grid_csv(p)
