"""Lattice p-vector fields (chains), musical maps, integration and Stokes.

A chain stores ``v^I(x)`` on increasing multi-indices with the same node
placement as forms: the unit edge from ``x`` to ``x + e_a`` is ``v^a = 1`` at
node ``x + e_a``. Storing only increasing tuples absorbs the ``1/p!`` of
the antisymmetric sum, so ``integrate`` is a plain sum over stored tuples.
"""

from __future__ import annotations

import warnings

import numpy as np

from .lattice_forms import (
    FormField,
    annihilator,
    apply_diff,
    exterior_derivative,
    forward_diff,
)
from .metric_hodge import MetricField, metric_operator_apply


class ChainField(FormField):
    """p-vector field; shares storage and index discipline with FormField."""

    __slots__ = ()


class GradeMismatchWarning(UserWarning):
    pass


def sharp(A: FormField, m: MetricField) -> ChainField:
    """Raise indices: ``v = dV * minor(g^{-1}) A``."""
    raised = metric_operator_apply(A, m, inverse=True)
    return ChainField(A.lattice, {I: f * m.dv for I, f in raised.items()})


def flat(v: ChainField, m: MetricField) -> FormField:
    """Lower indices: ``A = minor(g) v / dV``; inverse of :func:`sharp`."""
    lowered = FormField(v.lattice, {I: f / m.dv for I, f in v.items()})
    return metric_operator_apply(lowered, m)


def edge_chain(lat, x, a: int) -> ChainField:
    """Unit chain along the edge from node ``x`` to ``x + e_a``."""
    end = tuple((xi + (i == a)) % n for i, (xi, n) in enumerate(zip(x, lat.shape)))
    return ChainField.basis(lat, (a,), end)


def plaquette_chain(lat, x, a: int, b: int) -> ChainField:
    """Unit 2-chain on the plaquette spanned by ``e_a, e_b`` at base ``x``."""
    end = tuple(
        (xi + (i == a) + (i == b)) % n for i, (xi, n) in enumerate(zip(x, lat.shape))
    )
    return ChainField.basis(lat, (a, b), end)


def integrate(A: FormField, S: ChainField) -> complex:
    """Bilinear pairing ``sum_x sum_I A_I(x) v^I(x)`` over increasing tuples.

    Mismatched homogeneous grades integrate to 0 and emit a
    :class:`GradeMismatchWarning`.
    """
    if A.lattice != S.lattice:
        raise ValueError("lattice mismatch")
    ga, gs = A.grades, S.grades
    if ga and gs and ga.isdisjoint(gs):
        warnings.warn(f"grade mismatch {sorted(ga)} vs {sorted(gs)}", GradeMismatchWarning)
        return 0.0
    total = 0.0
    for I, f in A.items():
        v = S.coeffs.get(I)
        if v is not None:
            total = total + np.sum(f * v)
    return complex(total)


def boundary(S: ChainField, m: MetricField | None = None) -> ChainField:
    """Transpose of ``d`` under :func:`integrate`: ``sum_b -forward_b (c^b S)``.

    All metric factors cancel between sharp and flat, so ``m`` is accepted
    for interface symmetry and does not enter the result.
    """
    lat = S.lattice
    out = ChainField(lat, {}, S.value_shape)
    for b in range(lat.dim):
        out = out - apply_diff(annihilator(S, b), forward_diff, b)
    return out


def stokes_check(A: FormField, S: ChainField) -> float:
    """``|int_S dA - int_{dS} A|``."""
    if not A.grades or not S.grades:
        return 0.0
    if {p + 1 for p in A.grades} != S.grades:
        raise ValueError(f"Stokes needs grade(S) = grade(A) + 1, got {A.grades}, {S.grades}")
    return abs(integrate(exterior_derivative(A), S) - integrate(A, boundary(S)))
