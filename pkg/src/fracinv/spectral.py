"""Fourier machinery on the torus T^N = [0, 2 pi)^N.

Coefficients use the value convention h(x) = sum_n h_n exp(i n.x), so a
field's coefficients are plain grid averages. The orthonormal basis
(2 pi)^(-N/2) exp(i n.x) differs by the factor (2 pi)^(N/2); see
``sobolev_norm(..., orthonormal=True)``.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AliasingRisk, SymbolNotNonnegative


@dataclass(frozen=True)
class EllipticSymbol:
    """Constant-coefficient homogeneous operator sum_{|alpha|=m} a_alpha D^alpha.

    ``coeffs`` maps multi-index tuples to real coefficients; D = d/dx acts on
    exp(i n.x) as multiplication by (i n), so the symbol on the lattice is
    A(n) = sum a_alpha prod (i n_k)^alpha_k.
    """

    dim: int
    order: int
    coeffs: tuple

    def __post_init__(self):
        items = self.coeffs.items() if isinstance(self.coeffs, dict) else self.coeffs
        norm = tuple(sorted((tuple(int(a) for a in alpha), float(c)) for alpha, c in items))
        if self.dim not in (1, 2, 3):
            raise ValueError("only N in {1, 2, 3} is supported")
        if self.order <= 0 or self.order % 2:
            raise ValueError("order m must be a positive even integer")
        for alpha, _ in norm:
            if len(alpha) != self.dim or min(alpha) < 0:
                raise ValueError(f"bad multi-index {alpha}")
            if sum(alpha) != self.order:
                raise ValueError(f"multi-index {alpha} is not of order {self.order}")
        object.__setattr__(self, "coeffs", norm)

    @classmethod
    def laplacian(cls, dim: int = 1) -> "EllipticSymbol":
        """-Delta, with symbol |n|^2."""
        return cls(dim, 2, {tuple(2 if k == j else 0 for k in range(dim)): -1.0 for j in range(dim)})

    @classmethod
    def biharmonic(cls, dim: int = 1) -> "EllipticSymbol":
        """Delta^2, with symbol |n|^4."""
        coeffs: dict = {}
        for i in range(dim):
            for j in range(dim):
                alpha = [0] * dim
                alpha[i] += 2
                alpha[j] += 2
                coeffs[tuple(alpha)] = coeffs.get(tuple(alpha), 0.0) + 1.0
        return cls(dim, 4, coeffs)

    @classmethod
    def from_spec(cls, spec: dict) -> "EllipticSymbol":
        kind = spec.get("kind", "coefficients")
        dim = int(spec.get("dim", 1))
        if kind == "laplacian":
            return cls.laplacian(dim)
        if kind == "biharmonic":
            return cls.biharmonic(dim)
        return cls(dim, int(spec["order"]),
                   {tuple(c["alpha"]): c["value"] for c in spec["coeffs"]})

    def to_spec(self) -> dict:
        return {"kind": "coefficients", "dim": self.dim, "order": self.order,
                "coeffs": [{"alpha": list(a), "value": c} for a, c in self.coeffs]}

    def evaluate(self, n) -> np.ndarray:
        """A(n) for an (..., dim) integer array; raises if any value is negative."""
        n = np.asarray(n, dtype=float)
        if n.shape[-1] != self.dim:
            raise ValueError("frequency vector has the wrong dimension")
        total = np.zeros(n.shape[:-1], dtype=complex)
        for alpha, c in self.coeffs:
            term = np.full(n.shape[:-1], c, dtype=complex)
            for k, a in enumerate(alpha):
                if a:
                    term = term * (1j * n[..., k]) ** a
            total += term
        scale = 1.0 + np.max(np.abs(n), initial=0.0) ** self.order * sum(abs(c) for _, c in self.coeffs)
        if np.any(np.abs(total.imag) > 1e-12 * scale):
            raise SymbolNotNonnegative("symbol is not real on the lattice")
        vals = total.real
        if np.any(vals < -1e-12 * scale):
            raise SymbolNotNonnegative("symbol takes negative values on the lattice")
        return np.maximum(vals, 0.0)


def symbol_eval(sym: EllipticSymbol, n) -> float:
    """A(n) for a single frequency vector."""
    return float(sym.evaluate(np.asarray(n)[None, :])[0])


def ellipticity_constant(sym: EllipticSymbol, n_dirs: int = 256, seed: int = 0) -> float:
    """Fitted c with A(xi) >= c |xi|^m over sampled unit directions."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_dirs, sym.dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    total = np.zeros(n_dirs)
    for alpha, c in sym.coeffs:
        # (i xi)^alpha = i^m xi^alpha, and i^m = (-1)^(m/2)
        total += c * (-1) ** (sym.order // 2) * np.prod(d ** np.asarray(alpha), axis=1)
    return float(total.min())


def mode_list(sym: EllipticSymbol, cutoff: int):
    """All n in [-cutoff, cutoff]^N with lambda = A(n), ordered by |n|^2 then lexicographically."""
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    rng = range(-cutoff, cutoff + 1)
    ns = sorted(itertools.product(rng, repeat=sym.dim), key=lambda v: (sum(x * x for x in v), v))
    lams = sym.evaluate(np.array(ns, dtype=float).reshape(-1, sym.dim))
    return [(n, float(lam)) for n, lam in zip(ns, lams)]


def equivalence_constants(sym: EllipticSymbol, cutoff: int, tau: float):
    """Fitted c1, c2 with c1 (1+|n|^2)^(tau m) <= 1 + A(n)^(2 tau) <= c2 (1+|n|^2)^(tau m)."""
    modes = mode_list(sym, cutoff)
    n2 = np.array([sum(x * x for x in n) for n, _ in modes], float)
    lam = np.array([v for _, v in modes])
    ratio = (1.0 + lam ** (2 * tau)) / (1.0 + n2) ** (tau * sym.order)
    return float(ratio.min()), float(ratio.max())


@dataclass
class SpectralField:
    """Fourier coefficients on the box [-cutoff, cutoff]^dim, value convention.

    ``coeffs`` is a dense complex array of shape (2 cutoff + 1,) * dim whose
    entry at index ``n + cutoff`` is h_n.
    """

    dim: int
    cutoff: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        shape = (2 * self.cutoff + 1,) * self.dim
        if self.coeffs.shape != shape:
            raise ValueError(f"coefficient array must have shape {shape}")

    @classmethod
    def zeros(cls, dim: int, cutoff: int) -> "SpectralField":
        return cls(dim, cutoff, np.zeros((2 * cutoff + 1,) * dim, dtype=complex))

    @classmethod
    def from_modes(cls, dim: int, cutoff: int, values: dict) -> "SpectralField":
        out = cls.zeros(dim, cutoff)
        for n, v in values.items():
            out[n] = v
        return out

    @classmethod
    def random(cls, dim: int, cutoff: int, seed=None, decay: float = 1.0,
               band: int | None = None) -> "SpectralField":
        """Random real-valued field with coefficients ~ (1+|n|^2)^(-decay) up to ``band``."""
        rng = np.random.default_rng(seed)
        band = cutoff if band is None else band
        shape = (2 * cutoff + 1,) * dim
        c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        grids = np.meshgrid(*[np.arange(-cutoff, cutoff + 1)] * dim, indexing="ij")
        n2 = sum(g ** 2 for g in grids)
        inside = np.all([np.abs(g) <= band for g in grids], axis=0)
        c = np.where(inside, c * (1.0 + n2) ** (-decay), 0.0)
        out = cls(dim, cutoff, c)
        return out.hermitian_part()

    def __getitem__(self, n):
        return self.coeffs[tuple(np.asarray(n) + self.cutoff)]

    def __setitem__(self, n, value):
        self.coeffs[tuple(np.asarray(n) + self.cutoff)] = value

    def copy(self) -> "SpectralField":
        return SpectralField(self.dim, self.cutoff, self.coeffs.copy())

    def hermitian_part(self) -> "SpectralField":
        flipped = np.conj(self.coeffs[(slice(None, None, -1),) * self.dim])
        return SpectralField(self.dim, self.cutoff, 0.5 * (self.coeffs + flipped))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        flipped = np.conj(self.coeffs[(slice(None, None, -1),) * self.dim])
        scale = max(float(np.max(np.abs(self.coeffs), initial=0.0)), 1e-300)
        return bool(np.max(np.abs(self.coeffs - flipped), initial=0.0) <= tol * scale)

    def resized(self, cutoff: int) -> "SpectralField":
        """Truncate or zero-pad to a new cutoff."""
        out = SpectralField.zeros(self.dim, cutoff)
        c = min(cutoff, self.cutoff)
        src = (slice(self.cutoff - c, self.cutoff + c + 1),) * self.dim
        dst = (slice(cutoff - c, cutoff + c + 1),) * self.dim
        out.coeffs[dst] = self.coeffs[src]
        return out

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def n_vectors(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(-self.cutoff, self.cutoff + 1)] * self.dim, indexing="ij")
        return np.stack(grids, axis=-1)


def grid_points(n_points: int, dim: int = 1):
    """Uniform torus grid x_j = 2 pi j / n_points along each axis."""
    x = 2 * np.pi * np.arange(n_points) / n_points
    return np.meshgrid(*[x] * dim, indexing="ij") if dim > 1 else [x]


def analyze(values, cutoff: int) -> SpectralField:
    """Fourier coefficients |n_k| <= cutoff of samples on the uniform torus grid."""
    values = np.asarray(values)
    dim = values.ndim
    n_points = values.shape[0]
    if any(s != n_points for s in values.shape):
        raise ValueError("grid must have the same number of points along each axis")
    if n_points < 2 * cutoff + 1:
        raise AliasingRisk(f"{n_points} points per axis cannot resolve cutoff {cutoff}")
    spec = np.fft.fftn(values) / n_points ** dim
    idx = np.arange(-cutoff, cutoff + 1) % n_points
    coeffs = spec[np.ix_(*[idx] * dim)]
    return SpectralField(dim, cutoff, coeffs)


def synthesize(field: SpectralField, n_points: int | None = None, real: bool | None = None):
    """Grid values of sum_n h_n exp(i n.x); real output for Hermitian coefficients."""
    if n_points is None:
        n_points = 2 * field.cutoff + 1
    if n_points < 2 * field.cutoff + 1:
        raise AliasingRisk(f"{n_points} points per axis cannot represent cutoff {field.cutoff}")
    dim = field.dim
    spec = np.zeros((n_points,) * dim, dtype=complex)
    idx = np.arange(-field.cutoff, field.cutoff + 1) % n_points
    spec[np.ix_(*[idx] * dim)] = field.coeffs
    vals = np.fft.ifftn(spec) * n_points ** dim
    if real is None:
        real = field.is_hermitian()
    return vals.real if real else vals


def sobolev_norm(field: SpectralField, a: float, orthonormal: bool = False) -> float:
    """sqrt(sum (1 + |n|^2)^a |h_n|^2).

    With ``orthonormal=True`` the coefficients are first rescaled to the
    orthonormal eigenbasis (2 pi)^(-N/2) exp(i n.x).
    """
    if a < 0:
        raise ValueError("a must be non-negative")
    n2 = np.sum(field.n_vectors() ** 2, axis=-1)
    total = float(np.sum((1.0 + n2) ** a * np.abs(field.coeffs) ** 2))
    if orthonormal:
        total *= (2 * np.pi) ** field.dim
    return float(np.sqrt(total))


# --------------------------------------------------------------------------
# CSV I/O


def _axis_names(dim):
    return [f"n{k + 1}" for k in range(dim)]


def write_coefficients_csv(path, field: SpectralField) -> None:
    """Rows ``n1[,n2,n3],re,im`` in mode-list order (|n|^2, then lexicographic)."""
    ns = sorted(itertools.product(range(-field.cutoff, field.cutoff + 1), repeat=field.dim),
                key=lambda v: (sum(x * x for x in v), v))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_axis_names(field.dim) + ["re", "im"])
        for n in ns:
            c = complex(field[n])
            w.writerow(list(n) + [repr(c.real), repr(c.imag)])


def read_coefficients_csv(path, cutoff: int | None = None) -> SpectralField:
    """Inverse of :func:`write_coefficients_csv`; modes beyond ``cutoff`` are dropped."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    dim = len(header) - 2
    if dim < 1 or header[-2:] != ["re", "im"]:
        raise ValueError(f"{path}: expected columns n1..nN, re, im")
    ns = [tuple(int(v) for v in r[:dim]) for r in body]
    found = max((max(abs(x) for x in n) for n in ns), default=0)
    cutoff = found if cutoff is None else cutoff
    out = SpectralField.zeros(dim, cutoff)
    for n, r in zip(ns, body):
        if max(abs(x) for x in n) <= cutoff:
            out[n] = complex(float(r[dim]), float(r[dim + 1]))
    return out


def write_grid_csv(path, values) -> None:
    """Rows ``x1[,x2,x3],value`` (or ``value_re,value_im`` when complex) on the uniform grid."""
    values = np.asarray(values)
    dim = values.ndim
    axes = grid_points(values.shape[0], dim)
    cplx = np.iscomplexobj(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(dim)] + (["value_re", "value_im"] if cplx else ["value"]))
        for idx in np.ndindex(values.shape):
            coords = [repr(float(a[idx])) for a in axes]
            v = values[idx]
            w.writerow(coords + ([repr(float(v.real)), repr(float(v.imag))] if cplx else [repr(float(v))]))


def read_grid_csv(path) -> np.ndarray:
    """Inverse of :func:`write_grid_csv`; rows must be in C order of the grid."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    cplx = header[-1] == "value_im"
    dim = len(header) - (2 if cplx else 1)
    n_points = round(len(body) ** (1.0 / dim))
    if n_points ** dim != len(body):
        raise ValueError(f"{path}: {len(body)} rows do not form a square grid in {dim} dimensions")
    data = np.array([[float(v) for v in r[dim:]] for r in body])
    vals = data[:, 0] + 1j * data[:, 1] if cplx else data[:, 0]
    return vals.reshape((n_points,) * dim)
