"""Metrics, inner products, codifferential, Hodge star and Clifford generators.

The metric operator ``g_hat`` acts pointwise on grade ``p`` through the
compound matrix of ``g`` (all ``p x p`` minors). Inner products are
``<A|B>_g = sum_x sum_I conj(A_I) (g_hat^{-1} B)_I dV``. The codifferential
is the exact adjoint of ``d`` under that product, ``d_g^dag = g_hat d^dag
g_hat^{-1}`` where ``d^dag`` is the dV-weighted flat adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .lattice_forms import (
    FormField,
    Lattice,
    annihilator,
    apply_diff,
    backward_diff,
    complement,
    coordinate_form,
    creator,
    exterior_derivative,
    form_product,
    forward_diff,
    index_shift,
    shift,
    sort_sign,
    symmetric_diff,
)

DET_THRESHOLD = 1e-12

Operator = Callable[[FormField], FormField]


def _compound(g: np.ndarray, p: int, D: int) -> np.ndarray:
    """Stack of ``p x p`` minors of ``g`` over increasing index pairs."""
    idx = list(combinations(range(D), p))
    out = np.empty(g.shape[:-2] + (len(idx), len(idx)), dtype=g.dtype)
    for i, I in enumerate(idx):
        for j, J in enumerate(idx):
            if p == 0:
                out[..., i, j] = 1.0
            else:
                out[..., i, j] = np.linalg.det(g[..., list(I), :][..., :, list(J)])
    return out


class MetricField:
    """Per-node symmetric metric ``g_ab(x)`` with cached derived data.

    ``dV = |c| sqrt(|det g|)``; the sign of ``c`` enters the volume form and
    the Hodge star. ``kind`` records how the metric was built so that
    constructions defined only for flat or diamond geometry can check it.
    """

    def __init__(self, lat: Lattice, g, c: float = 1.0, kind: str = "full"):
        D = lat.dim
        g = np.asarray(g, dtype=float)
        if g.shape == (D, D):
            g = np.broadcast_to(g, lat.shape + (D, D))
        if g.shape != lat.shape + (D, D):
            raise ValueError(f"metric shape {g.shape} does not match lattice {lat.shape}")
        if not np.allclose(g, np.swapaxes(g, -1, -2), rtol=0, atol=1e-12):
            raise ValueError("metric is not symmetric")
        if c == 0:
            raise ValueError("volume constant c must be nonzero")
        det = np.linalg.det(g)
        bad = np.argwhere(np.abs(det) <= DET_THRESHOLD)
        if bad.size:
            raise ValueError(f"degenerate metric at node {tuple(int(i) for i in bad[0])}")
        self.lattice = lat
        self.g = np.array(g)
        self.c = float(c)
        self.kind = kind
        self.det = det
        self.inv = np.linalg.inv(self.g)
        self.dv = abs(self.c) * np.sqrt(np.abs(det))
        self.sign_c = 1.0 if self.c > 0 else -1.0
        self.is_constant = bool(np.all(self.g == self.g[(0,) * D]))
        self._minors = {p: _compound(self.g, p, D) for p in range(D + 1)}
        self._inv_minors = {p: _compound(self.inv, p, D) for p in range(D + 1)}

    def compound(self, p: int, inverse: bool = False) -> np.ndarray:
        return (self._inv_minors if inverse else self._minors)[p]

    @property
    def is_identity(self) -> bool:
        return self.kind == "flat"


def flat_metric(lat: Lattice, c: float = 1.0) -> MetricField:
    return MetricField(lat, np.eye(lat.dim), c, kind="flat")


def diamond_metric(lat: Lattice, c: float = 1.0) -> MetricField:
    """Constant metric ``delta_ab - 2/D`` induced by the graph operator."""
    D = lat.dim
    if D < 2:
        raise ValueError("diamond metric needs D >= 2")
    return MetricField(lat, np.eye(D) - 2.0 / D, c, kind="diamond")


def diagonal_metric(lat: Lattice, diag, c: float = 1.0) -> MetricField:
    """Metric with diagonal entries ``diag`` (shape ``(D,)`` or ``shape + (D,)``)."""
    diag = np.asarray(diag, dtype=float)
    g = np.zeros(diag.shape + (lat.dim,))
    for a in range(lat.dim):
        g[..., a, a] = diag[..., a]
    return MetricField(lat, g, c, kind="diagonal")


def random_diagonal_metric(
    lat: Lattice, rng: np.random.Generator, low: float = 0.5, high: float = 2.0
) -> MetricField:
    """Position-dependent Riemannian diagonal metric with entries in [low, high)."""
    return diagonal_metric(lat, rng.uniform(low, high, lat.shape + (lat.dim,)))


def metric_from_spec(lat: Lattice, spec: dict) -> MetricField:
    """Build a metric from ``{"kind": ..., "data": ..., "c": ...}``."""
    kind = spec.get("kind")
    c = float(spec.get("c", 1.0))
    if kind == "flat":
        return flat_metric(lat, c)
    if kind == "diamond":
        return diamond_metric(lat, c)
    if kind == "diagonal":
        return diagonal_metric(lat, spec["data"], c)
    if kind == "full":
        return MetricField(lat, spec["data"], c, kind="full")
    raise ValueError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True)
class InnerProductWeight:
    """Integration weight ``dV`` and optional metric (``None`` means flat)."""

    dv: np.ndarray
    metric: MetricField | None = field(default=None)

    def __post_init__(self):
        if np.any(np.asarray(self.dv) <= 0):
            raise ValueError("dV must be positive")


def flat_weight(lat: Lattice) -> InnerProductWeight:
    return InnerProductWeight(np.ones(lat.shape))


def weight_of(metric: MetricField) -> InnerProductWeight:
    return InnerProductWeight(metric.dv, metric)


def _as_weight(lat: Lattice, w) -> InnerProductWeight:
    if w is None:
        return flat_weight(lat)
    if isinstance(w, MetricField):
        return weight_of(w)
    return w


def _broadcast(dv: np.ndarray, vs: tuple) -> np.ndarray:
    return dv.reshape(dv.shape + (1,) * len(vs))


# metric operator


def metric_operator_apply(A: FormField, m: MetricField, inverse: bool = False) -> FormField:
    """``(g_hat A)_J(x) = sum_I minor_{J,I}(g(x)) A_I(x)`` per grade."""
    lat = A.lattice
    if m.lattice != lat:
        raise ValueError("lattice mismatch")
    out = {}
    for p in sorted(A.grades):
        idx = lat.indices(p)
        stack = np.stack([A.component(I) for I in idx], axis=lat.dim)
        mat = m.compound(p, inverse)
        if A.value_shape:
            res = np.einsum("...ij,...jkl->...ikl", mat, stack)
        else:
            res = np.einsum("...ij,...j->...i", mat, stack)
        for i, J in enumerate(idx):
            out[J] = np.take(res, i, axis=lat.dim)
    return type(A)(lat, out, A.value_shape)


# inner product


def inner_product(A: FormField, B: FormField, w=None) -> complex:
    """``sum_x sum_I conj(A_I) (g_hat^{-1} B)_I dV``; matrix values contract as trace."""
    if A.lattice != B.lattice:
        raise ValueError("lattice mismatch")
    lat = A.lattice
    w = _as_weight(lat, w)
    if w.metric is not None and not w.metric.is_identity:
        B = metric_operator_apply(B, w.metric, inverse=True)
    dv = _broadcast(np.asarray(w.dv), B.value_shape)
    total = 0.0 + 0.0j
    for I, f in A.items():
        g = B.coeffs.get(I)
        if g is not None:
            total += np.sum(np.conj(f) * g * dv)
    return complex(total)


# codifferential


def codifferential(A: FormField, w=None) -> FormField:
    """Adjoint of :func:`exterior_derivative` under ``inner_product(., ., w)``.

    Flat part: ``d^dag B = sum_b c^b [ -(1/dV) forward_b (dV B) ]``, which
    carries the dV ratio factors of the divergence. With a metric the result
    is conjugated by the metric operator.
    """
    lat = A.lattice
    w = _as_weight(lat, w)
    m = w.metric
    deformed = m is not None and not m.is_identity
    if deformed:
        A = metric_operator_apply(A, m, inverse=True)
    dv = np.asarray(w.dv)
    dvb = _broadcast(dv, A.value_shape)
    out = type(A)(lat, {}, A.value_shape)
    weighted = A.map(lambda f: f * dvb)
    for b in range(lat.dim):
        div = apply_diff(weighted, forward_diff, b).map(lambda f: -f / dvb)
        out = out + annihilator(div, b)
    if deformed:
        out = metric_operator_apply(out, m)
    return out


def laplace_beltrami(A: FormField, w=None) -> FormField:
    """``{d, d_g^dag} A``."""
    return exterior_derivative(codifferential(A, w)) + codifferential(exterior_derivative(A), w)


# volume and Hodge star


def volume_form(m: MetricField) -> FormField:
    """``sign(c) dX^0..dX^{D-1} det g / dV``; equals ``dX sqrt(det g)`` when c = 1."""
    lat = m.lattice
    top = tuple(range(lat.dim))
    return FormField(lat, {top: m.sign_c * m.det / m.dv})


def hodge_star(A: FormField, m: MetricField | None = None) -> FormField:
    """``star_g = g_hat o star`` with the closed-form flat star.

    ``star(dX^I a) = sign(c) s(I, J) dX^J T_{e_J}[a] / dV`` where ``J`` is the
    increasing complement of ``I`` and ``s`` the sign of the permutation
    ``(I, J)``.
    """
    lat = A.lattice
    m = flat_metric(lat) if m is None else m
    dvb = _broadcast(m.dv, A.value_shape)
    out = {}
    for I, f in A.items():
        J = complement(lat, I)
        _, s = sort_sign(I + J)
        out[J] = (m.sign_c * s) * shift(f, index_shift(lat, J)) / dvb
    star = type(A)(lat, out, A.value_shape)
    return star if m.is_identity else metric_operator_apply(star, m)


def hodge_star_inverse(A: FormField, m: MetricField | None = None) -> FormField:
    lat = A.lattice
    m = flat_metric(lat) if m is None else m
    if not m.is_identity:
        A = metric_operator_apply(A, m, inverse=True)
    dvb = _broadcast(m.dv, A.value_shape)
    out = {}
    for J, f in A.items():
        I = complement(lat, J)
        _, s = sort_sign(I + J)
        out[I] = (m.sign_c * s) * shift(f * dvb, index_shift(lat, J, -1))
    return type(A)(lat, out, A.value_shape)


# partial derivative operators


def partial_operator(a: int) -> Operator:
    """``partial_a = {d, c^a}``: backward difference on every coefficient."""
    return lambda psi: apply_diff(psi, backward_diff, a)


def partial_adjoint(a: int) -> Operator:
    """Flat adjoint of :func:`partial_operator` (constant dV)."""
    return lambda psi: -apply_diff(psi, forward_diff, a)


def antihermitian_partial(a: int) -> Operator:
    """``(partial_a - partial_a^dag) / 2``, the symmetric difference."""
    return lambda psi: apply_diff(psi, symmetric_diff, a)


# Clifford generators


def _check_clifford_metric(metric: MetricField | None) -> None:
    if metric is not None and metric.kind not in ("flat", "diamond"):
        raise ValueError(f"Clifford generators need a flat or diamond metric, got {metric.kind!r}")


def clifford_generator(a: int, sign: int, metric: MetricField | None = None) -> Operator:
    """``gamma_+-^a = c^dag_a +- (g-adjoint of c^dag_a)``.

    Flat: ``c^dag +- c``. Diamond: ``c^dag +- g_hat c g_hat^{-1}``.
    """
    _check_clifford_metric(metric)
    if metric is None or metric.is_identity:
        return lambda psi: creator(psi, a) + sign * annihilator(psi, a)

    def op(psi: FormField) -> FormField:
        adj = metric_operator_apply(
            annihilator(metric_operator_apply(psi, metric, inverse=True), a), metric
        )
        return creator(psi, a) + sign * adj

    return op


def timelike_clifford(lat: Lattice, sign: int, metric: MetricField | None = None) -> Operator:
    """``gamma^t = (1/sqrt(D)) sum_a gamma^a`` along the main diagonal."""
    gens = [clifford_generator(a, sign, metric) for a in range(lat.dim)]
    norm = 1.0 / np.sqrt(lat.dim)

    def op(psi: FormField) -> FormField:
        out = type(psi)(psi.lattice, {}, psi.value_shape)
        for gen in gens:
            out = out + gen(psi)
        return norm * out

    return op


def pseudo_clifford(a: int, sign: int) -> Operator:
    """``q_+-^a = c^dag_a +- T_{-e_a} c^a``."""

    def op(psi: FormField) -> FormField:
        lat = psi.lattice
        back = annihilator(psi, a).map(lambda f: shift(f, index_shift(lat, [a], -1)))
        return creator(psi, a) + sign * back

    return op


def multiply_left(f: FormField) -> Operator:
    """Left multiplication by a fixed form."""
    return lambda psi: form_product(f, psi)


def gamma_coordinate_commutator_check(
    lat: Lattice, a: int, b: int, sign: int = 1, rng=None, n_forms: int = 3
) -> float:
    """Max of ``[gamma_+-^a, X^b] - eps delta_ab gamma_-+^a`` on random forms.

    Nodes where the sawtooth ``X^b`` wraps inside the stencil (``x_b = 0``)
    are excluded.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    gamma = clifford_generator(a, sign)
    other = clifford_generator(a, -sign)
    X = multiply_left(coordinate_form(lat, b))
    keep = lat.grid()[b] != 0
    worst = 0.0
    for _ in range(n_forms):
        psi = _random_full(lat, rng)
        res = gamma(X(psi)) - X(gamma(psi))
        if a == b:
            res = res - lat.spacing * other(psi)
        for _, f in res.items():
            worst = max(worst, float(np.max(np.abs(f[keep]), initial=0.0)))
    return worst


def _random_full(lat: Lattice, rng: np.random.Generator) -> FormField:
    return FormField(lat, {I: rng.standard_normal(lat.shape) for I in lat.indices()})


# dense representations


def form_to_vector(A: FormField) -> np.ndarray:
    """Concatenate scalar coefficients over all increasing indices (grade order)."""
    if A.value_shape:
        raise ValueError("dense vectors support scalar forms only")
    return np.concatenate([np.ravel(A.component(I)) for I in A.lattice.indices()])


def vector_to_form(lat: Lattice, v: np.ndarray, cls=FormField) -> FormField:
    n = lat.n_nodes
    coeffs = {I: v[k * n : (k + 1) * n].reshape(lat.shape) for k, I in enumerate(lat.indices())}
    return cls(lat, coeffs)


def operator_matrix(op: Operator, lat: Lattice, cls=FormField) -> np.ndarray:
    """Dense matrix of a linear operator on the full scalar form space."""
    n = lat.n_nodes * 2**lat.dim
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols.append(form_to_vector(op(vector_to_form(lat, e, cls))))
    return np.array(cols, dtype=complex).T
