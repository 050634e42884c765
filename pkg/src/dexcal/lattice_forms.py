"""Graded form fields on a periodic hypercubic lattice.

A form is stored as a map from a strictly increasing multi-index to a node
array. Coefficients sit in the right slot: the stored array ``f`` under key
``(a1, ..., ap)`` represents ``dX^a1 ... dX^ap f``. Moving a function ``f``
rightward past ``dX^b`` translates it, ``f dX^b = dX^b T_{e_b}[f]``.

Axes are 0-based throughout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

Index = tuple[int, ...]


@dataclass(frozen=True)
class Lattice:
    """Periodic D-dimensional hypercubic lattice with spacing ``spacing``."""

    shape: tuple[int, ...]
    spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if not self.shape:
            raise ValueError("lattice needs at least one axis")
        if any(n < 2 for n in self.shape):
            raise ValueError(f"every axis needs at least 2 sites, got {self.shape}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def unit(self, a: int) -> tuple[int, ...]:
        return tuple(int(b == a) for b in range(self.dim))

    def indices(self, p: int | None = None) -> list[Index]:
        """Increasing multi-indices of grade ``p``, or of every grade in order."""
        grades = range(self.dim + 1) if p is None else [p]
        return [I for q in grades for I in combinations(range(self.dim), q)]

    def grid(self) -> list[np.ndarray]:
        """Integer node coordinates, one array per axis."""
        return list(np.indices(self.shape))


def lattice(shape: Iterable[int], spacing: float = 1.0) -> Lattice:
    return Lattice(tuple(shape), spacing)


# multi-index helpers


def sort_sign(seq: Iterable[int]) -> tuple[Index | None, int]:
    """Sort ``seq`` and return the permutation sign; ``(None, 0)`` on repeats."""
    items = list(seq)
    if len(set(items)) != len(items):
        return None, 0
    sign = 1
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return tuple(sorted(items)), sign


def complement(lat: Lattice, idx: Index) -> Index:
    return tuple(a for a in range(lat.dim) if a not in idx)


def index_shift(lat: Lattice, idx: Iterable[int], sign: int = 1) -> tuple[int, ...]:
    """The integer vector ``sign * sum_{a in idx} e_a``."""
    v = [0] * lat.dim
    for a in idx:
        v[a] += sign
    return tuple(v)


# node-array operations


def shift(f: np.ndarray, y: Iterable[int]) -> np.ndarray:
    """Translation ``(T_y f)(x) = f(x - y)`` with periodic wrap.

    Only the leading ``len(y)`` axes are node axes; trailing axes hold values.
    """
    y = tuple(int(v) for v in y)
    if not any(y):
        return f
    return np.roll(f, y, axis=tuple(range(len(y))))


def forward_diff(f: np.ndarray, a: int, spacing: float = 1.0) -> np.ndarray:
    """``(f(x + e_a) - f(x)) / eps``."""
    return (np.roll(f, -1, axis=a) - f) / spacing


def backward_diff(f: np.ndarray, a: int, spacing: float = 1.0) -> np.ndarray:
    """``(f(x) - f(x - e_a)) / eps``."""
    return (f - np.roll(f, 1, axis=a)) / spacing


def symmetric_diff(f: np.ndarray, a: int, spacing: float = 1.0) -> np.ndarray:
    """``(f(x + e_a) - f(x - e_a)) / (2 eps)``."""
    return (np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / (2 * spacing)


def osmotic_diff(f: np.ndarray, a: int, spacing: float = 1.0) -> np.ndarray:
    """Forward minus backward difference, ``(f(x+e) - 2 f(x) + f(x-e)) / eps``."""
    return (np.roll(f, -1, axis=a) - 2 * f + np.roll(f, 1, axis=a)) / spacing


def coordinate(lat: Lattice, a: int) -> np.ndarray:
    """Sawtooth coordinate ``X^a = eps * x_a`` over one period."""
    return lat.spacing * lat.grid()[a].astype(float)


# form fields


def _mul(x: np.ndarray, y: np.ndarray, xs: tuple, ys: tuple) -> np.ndarray:
    """Node-wise product of scalar or matrix coefficients."""
    if xs and ys:
        if xs[1] != ys[0]:
            raise ValueError(f"incompatible matrix sizes {xs} and {ys}")
        return np.matmul(x, y)
    if xs:
        return x * y[..., None, None]
    if ys:
        return x[..., None, None] * y
    return x * y


class FormField:
    """A (possibly inhomogeneous) form with right-slot node coefficients.

    ``coeffs`` may use any index ordering; permutations are sorted with their
    sign and repeated indices are dropped. Arrays are never mutated in place.
    """

    __slots__ = ("lattice", "value_shape", "_coeffs")

    def __init__(
        self,
        lat: Lattice,
        coeffs: Mapping[Iterable[int], np.ndarray] | None = None,
        value_shape: tuple[int, ...] = (),
    ):
        self.lattice = lat
        self.value_shape = tuple(value_shape)
        full = lat.shape + self.value_shape
        store: dict[Index, np.ndarray] = {}
        for raw, arr in (coeffs or {}).items():
            idx, sign = sort_sign(raw)
            if idx is None:
                continue
            if any(a < 0 or a >= lat.dim for a in idx):
                raise ValueError(f"index {raw} out of range for D={lat.dim}")
            arr = np.asarray(arr)
            if arr.shape != full:
                arr = np.broadcast_to(arr, full)
            term = arr if sign > 0 else -arr
            store[idx] = store[idx] + term if idx in store else term
        self._coeffs = store

    # construction helpers

    @classmethod
    def zeros(cls, lat: Lattice, value_shape: tuple[int, ...] = ()):
        return cls(lat, {}, value_shape)

    @classmethod
    def scalar(cls, lat: Lattice, f, value_shape: tuple[int, ...] = ()):
        """0-form from a node array (or a constant)."""
        arr = np.broadcast_to(np.asarray(f), lat.shape + tuple(value_shape))
        return cls(lat, {(): np.array(arr)}, value_shape)

    @classmethod
    def from_left(cls, lat: Lattice, idx: Iterable[int], f):
        """Form written with the coefficient on the left, ``f dX^idx``."""
        idx = tuple(idx)
        arr = np.broadcast_to(np.asarray(f), lat.shape)
        return cls(lat, {idx: shift(np.array(arr), index_shift(lat, idx))})

    @classmethod
    def basis(cls, lat: Lattice, idx: Iterable[int], node: Iterable[int], value=1.0):
        """``dX^idx delta_node`` with the delta in the right slot."""
        arr = np.zeros(lat.shape, dtype=np.result_type(value, float))
        arr[tuple(node)] = value
        return cls(lat, {tuple(idx): arr})

    # accessors

    @property
    def coeffs(self) -> dict[Index, np.ndarray]:
        return dict(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def component(self, idx: Iterable[int]) -> np.ndarray:
        idx, sign = sort_sign(idx)
        full = self.lattice.shape + self.value_shape
        if idx is None or idx not in self._coeffs:
            return np.zeros(full)
        return sign * self._coeffs[idx]

    @property
    def grades(self) -> set[int]:
        return {len(I) for I in self._coeffs}

    @property
    def grade(self) -> int:
        """Grade of a homogeneous form; the zero form reports 0."""
        gs = self.grades
        if len(gs) > 1:
            raise ValueError(f"inhomogeneous form with grades {sorted(gs)}")
        return gs.pop() if gs else 0

    def part(self, p: int):
        """Grade-``p`` part."""
        return self._new({I: f for I, f in self._coeffs.items() if len(I) == p})

    def map(self, fn: Callable[[np.ndarray], np.ndarray], value_shape=None):
        """Apply ``fn`` to every coefficient array."""
        vs = self.value_shape if value_shape is None else value_shape
        return type(self)(self.lattice, {I: fn(f) for I, f in self._coeffs.items()}, vs)

    def map_indexed(self, fn: Callable[[Index, np.ndarray], np.ndarray]):
        return self._new({I: fn(I, f) for I, f in self._coeffs.items()})

    def _new(self, coeffs):
        return type(self)(self.lattice, coeffs, self.value_shape)

    # algebra

    def _check(self, other: "FormField"):
        if other.lattice != self.lattice:
            raise ValueError("lattice mismatch")

    def __add__(self, other):
        if not isinstance(other, FormField):
            return NotImplemented
        self._check(other)
        vs = self.value_shape or other.value_shape
        out = dict(self._coeffs)
        for I, f in other._coeffs.items():
            out[I] = out[I] + f if I in out else f
        return type(self)(self.lattice, out, vs)

    def __neg__(self):
        return self.map(np.negative)

    def __sub__(self, other):
        if not isinstance(other, FormField):
            return NotImplemented
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, FormField):
            return NotImplemented
        return self.map(lambda f: c * f)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.map(lambda f: f / c)

    def conj(self):
        return self.map(np.conj)

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(f))) for f in self._coeffs.values()), default=0.0)

    def allclose(self, other: "FormField", atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def __repr__(self):
        keys = ", ".join(str(I) for I in sorted(self._coeffs, key=lambda I: (len(I), I)))
        return f"{type(self).__name__}(shape={self.lattice.shape}, indices=[{keys}])"


def random_form(
    lat: Lattice,
    grades: Iterable[int],
    rng: np.random.Generator,
    complex_values: bool = False,
    value_shape: tuple[int, ...] = (),
    cls=FormField,
) -> FormField:
    """Form with standard-normal coefficients on every index of the given grades."""
    full = lat.shape + tuple(value_shape)
    coeffs = {}
    for p in grades:
        for I in lat.indices(p):
            f = rng.standard_normal(full)
            if complex_values:
                f = f + 1j * rng.standard_normal(full)
            coeffs[I] = f
    return cls(lat, coeffs, value_shape)


def apply_diff(A: FormField, diff, a: int) -> FormField:
    return A.map(lambda f: diff(f, a, A.lattice.spacing))


# creators, annihilators and the product


def creator(A: FormField, a: int) -> FormField:
    """Left multiplication by ``dX^a`` with the coefficient left unshifted."""
    out = {}
    for I, f in A.items():
        if a not in I:
            out[(a,) + I] = f
    return type(A)(A.lattice, out, A.value_shape)


def annihilator(A: FormField, a: int) -> FormField:
    """Flat adjoint of :func:`creator`: removes ``a`` with sign ``(-1)^position``."""
    out = {}
    for I, f in A.items():
        if a in I:
            k = I.index(a)
            rest = I[:k] + I[k + 1 :]
            out[rest] = f if k % 2 == 0 else -f
    return type(A)(A.lattice, out, A.value_shape)


def form_product(A: FormField, B: FormField) -> FormField:
    """Noncommutative product ``(dX^I f)(dX^J g) = dX^I dX^J T_{e_J}[f] g``."""
    A._check(B)
    lat = A.lattice
    vs = A.value_shape or B.value_shape
    out: dict[Index, np.ndarray] = {}
    for I, f in A.items():
        for J, g in B.items():
            K, sign = sort_sign(I + J)
            if K is None:
                continue
            term = _mul(shift(f, index_shift(lat, J)), g, A.value_shape, B.value_shape)
            if sign < 0:
                term = -term
            out[K] = out[K] + term if K in out else term
    return type(A)(lat, out, vs)


def graded_parts(A: FormField) -> dict[int, FormField]:
    return {p: A.part(p) for p in sorted(A.grades)}


def supercommutator(A: FormField, B: FormField) -> FormField:
    """``[A, B} = AB - (-1)^{pq} BA`` extended bilinearly over grades."""
    out = FormField.zeros(A.lattice, A.value_shape or B.value_shape)
    for p, Ap in graded_parts(A).items():
        for q, Bq in graded_parts(B).items():
            sign = -1 if (p * q) % 2 == 0 else 1
            out = out + form_product(Ap, Bq) + sign * form_product(Bq, Ap)
    return out


def exterior_derivative(A: FormField) -> FormField:
    """``d = sum_b dX^b (backward difference along b)`` acting on coefficients.

    Equivalently ``d(dX^I f) = (-1)^p dX^I dX^b (backward_b f)`` summed over b.
    Top-grade terms vanish because ``dX^b`` repeats an index.
    """
    lat = A.lattice
    out = type(A)(lat, {}, A.value_shape)
    for b in range(lat.dim):
        out = out + creator(apply_diff(A, backward_diff, b), b)
    return out


def graph_operator(lat: Lattice) -> FormField:
    """``G = (1/eps) sum_a dX^a`` with unit coefficient arrays."""
    one = np.full(lat.shape, 1.0 / lat.spacing)
    return FormField(lat, {(a,): one for a in range(lat.dim)})


def coordinate_form(lat: Lattice, a: int) -> FormField:
    return FormField.scalar(lat, coordinate(lat, a))


# structure functions


def structure_functions(vielbein: np.ndarray) -> np.ndarray:
    """``C^{mu nu}_lambda = -sum_a e_a^mu e_a^nu e_lambda^a`` per node.

    ``vielbein[..., a, mu]`` holds ``e_a^mu``; ``e_lambda^a`` is its node-wise
    inverse. A singular vielbein raises ``ValueError`` naming the node.
    """
    e = np.asarray(vielbein, dtype=float)
    det = np.linalg.det(e)
    bad = np.argwhere(np.abs(det) <= 1e-12)
    if bad.size:
        raise ValueError(f"singular vielbein at node {tuple(int(i) for i in bad[0])}")
    einv = np.linalg.inv(e)  # einv[..., lam, a] = e_lambda^a
    return -np.einsum("...am,...an,...la->...mnl", e, e, einv)


# CSV serialization


def write_form_csv(A: FormField, path: str | Path) -> None:
    """Write coefficients as CSV plus a JSON sidecar ``<path>.json``.

    Columns: ``multi_index, x0..x_{D-1}`` followed by interleaved ``re, im``
    pairs for every value entry in row-major order. Floats use ``repr`` so
    a round trip is bit exact.
    """
    lat = A.lattice
    path = Path(path)
    header = {
        "shape": list(lat.shape),
        "spacing": lat.spacing,
        "value_shape": list(A.value_shape),
        "kind": type(A).__name__,
    }
    Path(str(path) + ".json").write_text(json.dumps(header))
    n_vals = int(np.prod(A.value_shape)) if A.value_shape else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["multi_index"] + [f"x{i}" for i in range(lat.dim)]
        for k in range(n_vals):
            cols += [f"re{k}", f"im{k}"]
        w.writerow(cols)
        for I in sorted(A.coeffs, key=lambda I: (len(I), I)):
            f = np.asarray(A.component(I), dtype=complex)
            for node in np.ndindex(*lat.shape):
                vals = np.ravel(f[node])
                row = [":".join(map(str, I)) or "-"] + list(map(str, node))
                for v in vals:
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)


def read_form_csv(path: str | Path, cls=FormField) -> FormField:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    lat = Lattice(tuple(header["shape"]), header["spacing"])
    vs = tuple(header["value_shape"])
    coeffs: dict[Index, np.ndarray] = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            key = () if row[0] == "-" else tuple(int(t) for t in row[0].split(":"))
            node = tuple(int(t) for t in row[1 : 1 + lat.dim])
            nums = [float(t) for t in row[1 + lat.dim :]]
            vals = np.array(nums[0::2]) + 1j * np.array(nums[1::2])
            arr = coeffs.setdefault(key, np.zeros(lat.shape + vs, dtype=complex))
            arr[node] = vals.reshape(vs) if vs else vals[0]
    real = {I: (f.real if not np.any(f.imag) else f) for I, f in coeffs.items()}
    return cls(lat, real, vs)
