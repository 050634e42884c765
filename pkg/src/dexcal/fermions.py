"""Dirac-Kähler operators, pseudo-Clifford chirality and doubling scans.

Spinors are inhomogeneous scalar forms. ``DK_plus = d + d_g^dag`` and
``DK_minus = d - d_g^dag``; on the flat lattice these factor as
``d + d^dag = q_-^a partial_a`` and ``d - d^dag = q_+^a partial_a``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice_forms import FormField, Lattice
from .metric_hodge import (
    MetricField,
    antihermitian_partial,
    clifford_generator,
    codifferential,
    exterior_derivative,
    inner_product,
    partial_operator,
    pseudo_clifford,
)

VARIANTS = ("DK_plus", "DK_minus", "DK_tilde", "naive_symmetric")
ZERO_TOL = 1e-8
INVARIANCE_TOL = 1e-9


def thread_cap() -> int:
    """Worker count from ``DEXCAL_THREADS`` (default: CPU count)."""
    raw = os.environ.get("DEXCAL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"DEXCAL_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class DiracOperator:
    """Linear Dirac-type operator on inhomogeneous forms.

    ``DK_tilde`` is ``gamma_{-sign}^a (partial_a - partial_a^dag)/2`` and
    ``naive_symmetric`` is ``gamma_+^a`` times the symmetric difference.
    """

    variant: str
    metric: MetricField | None = None
    sign: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown Dirac variant {self.variant!r}")
        if self.variant in ("DK_tilde", "naive_symmetric") and self.metric is not None:
            if not self.metric.is_identity:
                raise ValueError(f"{self.variant} is defined on the flat lattice only")

    @property
    def self_adjoint(self) -> bool:
        return self.variant == "DK_plus"

    def __call__(self, psi: FormField) -> FormField:
        m = self.metric
        if self.variant == "DK_plus":
            return exterior_derivative(psi) + codifferential(psi, m)
        if self.variant == "DK_minus":
            return exterior_derivative(psi) - codifferential(psi, m)
        gamma_sign = -self.sign if self.variant == "DK_tilde" else 1
        out = type(psi)(psi.lattice, {}, psi.value_shape)
        for a in range(psi.lattice.dim):
            out = out + clifford_generator(a, gamma_sign)(antihermitian_partial(a)(psi))
        return out


def dirac_apply(op: DiracOperator, psi: FormField) -> FormField:
    return op(psi)


def dirac_action(psi: FormField, op: DiracOperator, w=None) -> complex:
    """``<psi | D psi>_g``."""
    return inner_product(psi, op(psi), w)


def q_assembly(psi: FormField, sign: int) -> FormField:
    """``sum_a q_sign^a partial_a psi``."""
    out = type(psi)(psi.lattice, {}, psi.value_shape)
    for a in range(psi.lattice.dim):
        out = out + pseudo_clifford(a, sign)(partial_operator(a)(psi))
    return out


# chirality


def _half_back_translation(lat: Lattice, f: np.ndarray) -> np.ndarray:
    """``T^{-1/2}`` with ``T = T_{-(e_0 + ... + e_{D-1})}``, per Fourier mode.

    numpy's forward transform uses ``exp(-2 pi i n x / L)``, so ``T`` multiplies
    mode ``n`` by ``exp(i theta)`` with ``theta = sum_a 2 pi n_a / L_a``; each
    angle is taken in ``(-pi, pi]`` and the square root is the principal one.
    """
    theta = np.zeros(lat.shape)
    for a, n in enumerate(lat.shape):
        k = 2 * np.pi * np.fft.fftfreq(n)
        k = np.where(np.isclose(k, -np.pi), np.pi, k)
        shape = [1] * lat.dim
        shape[a] = n
        theta = theta + k.reshape(shape)
    return np.fft.ifftn(np.fft.fftn(f) * np.exp(-0.5j * theta))


def chirality_operator(lat: Lattice, metric: MetricField | None = None):
    """``q~ = i^{D(D-1)/2} T^{-1/2} q_-^0 ... q_-^{D-1}``.

    Anticommutes with ``DK_plus`` and squares to the identity. Requires even
    D and a translation-invariant metric.
    """
    D = lat.dim
    if D % 2:
        raise ValueError("chirality operator needs even D")
    if metric is not None and not metric.is_constant:
        raise ValueError("chirality operator needs a translation-invariant metric")
    phase = 1j ** (D * (D - 1) // 2)
    gens = [pseudo_clifford(a, -1) for a in range(D)]

    def op(psi: FormField) -> FormField:
        out = psi
        for gen in reversed(gens):
            out = gen(out)
        return FormField(
            lat, {I: phase * _half_back_translation(lat, f) for I, f in out.items()}
        )

    return op


def qbar(lat: Lattice):
    """``q_-^0 ... q_-^{D-1}`` without the translation correction."""
    gens = [pseudo_clifford(a, -1) for a in range(lat.dim)]

    def op(psi: FormField) -> FormField:
        out = psi
        for gen in reversed(gens):
            out = gen(out)
        return out

    return op


# dispersion


@dataclass(frozen=True)
class DispersionScan:
    momenta: np.ndarray  # (nk, D) in units of 1/eps, components in (-pi/eps, pi/eps]
    eigenvalues: np.ndarray  # (nk, 2^D) eigenvalues of D^2
    min_abs: np.ndarray  # (nk,)

    @property
    def zero_flags(self) -> np.ndarray:
        return self.min_abs < ZERO_TOL

    @property
    def zero_count(self) -> int:
        return int(np.sum(self.zero_flags))


def _impulse_response(op, lat: Lattice, node) -> list[FormField]:
    return [op(FormField.basis(lat, I, node)) for I in lat.indices()]


def dispersion_scan(op, lat: Lattice, rng=None) -> DispersionScan:
    """Eigenvalues of ``op^2`` on each plane-wave sector.

    The operator is applied to ``dX^I delta_0`` for every multi-index; the
    symbol ``M_JI(k) = sum_z op(dX^I delta_0)_J(z) exp(-i k z)`` follows by FFT.
    Translation invariance is verified against a second, random base node.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    idx = lat.indices()
    n = len(idx)
    base = _impulse_response(op, lat, (0,) * lat.dim)
    node = tuple(int(rng.integers(0, s)) for s in lat.shape)
    moved = _impulse_response(op, lat, node)
    for r0, r1 in zip(base, moved):
        for J in idx:
            diff = np.roll(r0.component(J), node, axis=tuple(range(lat.dim))) - r1.component(J)
            if np.max(np.abs(diff)) > INVARIANCE_TOL:
                raise ValueError("operator is not translation invariant")
    symbol = np.empty(lat.shape + (n, n), dtype=complex)
    for i, resp in enumerate(base):
        for j, J in enumerate(idx):
            symbol[..., j, i] = np.fft.fftn(resp.component(J))
    nodes = list(np.ndindex(*lat.shape))

    def block(x):
        M = symbol[x]
        return np.linalg.eigvals(M @ M)

    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        eig = np.array(list(pool.map(block, nodes)))
    order = np.argsort(eig.real, axis=1, kind="stable")
    eig = np.take_along_axis(eig, order, axis=1)
    freqs = [2 * np.pi * np.fft.fftfreq(s) / lat.spacing for s in lat.shape]
    momenta = np.array([[freqs[a][x[a]] for a in range(lat.dim)] for x in nodes])
    half = np.pi / lat.spacing
    momenta = np.where(np.isclose(momenta, -half), half, momenta)
    return DispersionScan(momenta, eig, np.min(np.abs(eig), axis=1))
