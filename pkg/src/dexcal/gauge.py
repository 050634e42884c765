"""Holonomy 1-forms, field strength ``H^2`` and the lattice Yang-Mills action.

A configuration stores ``H_a(x)``, the parallel transport along the edge
``x -> x + e_a``. The holonomy 1-form is ``H = (1/eps) sum_a dX^a T_{e_a}[H_a]``
so the trivial configuration gives ``H = G (x) Id``. Its square has the
plaquette coefficient ``(H_a(x) H_b(x+e_a) - H_b(x) H_a(x+e_b)) / eps^2`` at
node ``x + e_a + e_b``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .lattice_forms import (
    FormField,
    Lattice,
    annihilator,
    form_product,
    index_shift,
    shift,
)
from .metric_hodge import inner_product

UNITARY_TOL = 1e-10
DRIFT_TOL = 1e-12


@dataclass(frozen=True)
class GaugeGroup:
    kind: str  # "U1" or "SU"
    n: int = 1

    def __post_init__(self):
        if self.kind == "U1" and self.n != 1:
            raise ValueError("U(1) has N = 1")
        if self.kind == "SU" and not 2 <= self.n <= 3:
            raise ValueError("SU(N) supported for N in {2, 3}")
        if self.kind not in ("U1", "SU"):
            raise ValueError(f"unknown group {self.kind!r}")

    @property
    def name(self) -> str:
        return "U1" if self.kind == "U1" else f"SU{self.n}"

    def check(self, m: np.ndarray) -> np.ndarray:
        """Boolean mask of elements failing the group membership test."""
        eye = np.eye(self.n)
        dev = np.abs(m @ np.conj(np.swapaxes(m, -1, -2)) - eye).max(axis=(-1, -2))
        bad = dev > UNITARY_TOL
        if self.kind == "SU":
            bad |= np.abs(np.linalg.det(m) - 1) > UNITARY_TOL
        return bad


U1 = GaugeGroup("U1", 1)
SU2 = GaugeGroup("SU", 2)
SU3 = GaugeGroup("SU", 3)


def group_from_name(name: str) -> GaugeGroup:
    table = {"U1": U1, "SU2": SU2, "SU3": SU3}
    if name not in table:
        raise ValueError(f"unknown group {name!r}")
    return table[name]


def reunitarize(m: np.ndarray, group: GaugeGroup) -> np.ndarray:
    """Polar projection back onto the group."""
    u, _, vh = np.linalg.svd(m)
    out = u @ vh
    if group.kind == "SU":
        det = np.linalg.det(out)
        out = out / (det ** (1.0 / group.n))[..., None, None]
    return out


def random_algebra(group: GaugeGroup, rng: np.random.Generator, size=(), scale=1.0) -> np.ndarray:
    """Hermitian (traceless for SU) matrices with spectral norm <= scale."""
    n = group.n
    z = rng.standard_normal(size + (n, n)) + 1j * rng.standard_normal(size + (n, n))
    h = (z + np.conj(np.swapaxes(z, -1, -2))) / 2
    if group.kind == "SU":
        h = h - np.trace(h, axis1=-2, axis2=-1)[..., None, None] * np.eye(n) / n
    norm = np.linalg.norm(h, ord=2, axis=(-2, -1))
    factor = scale * rng.uniform(0, 1, size) / np.maximum(norm, 1e-300)
    return h * factor[..., None, None]


def exp_algebra(h: np.ndarray, group: GaugeGroup) -> np.ndarray:
    """``exp(i h)`` by scaling and squaring with Pade, then re-projected if drifted."""
    flat = h.reshape((-1,) + h.shape[-2:])
    out = np.array([scipy.linalg.expm(1j * x) for x in flat]).reshape(h.shape)
    if np.any(group.check(out)) or _drift(out) > DRIFT_TOL:
        out = reunitarize(out, group)
    return out


def _drift(m: np.ndarray) -> float:
    eye = np.eye(m.shape[-1])
    return float(np.abs(m @ np.conj(np.swapaxes(m, -1, -2)) - eye).max(initial=0.0))


def random_group_elements(group: GaugeGroup, rng, size=(), scale=1.0) -> np.ndarray:
    return exp_algebra(random_algebra(group, rng, size, scale), group)


class GaugeConfig:
    """Link variables ``links[a][x] = H_a(x)``, shape ``(D,) + shape + (N, N)``."""

    def __init__(self, lat: Lattice, group: GaugeGroup, links):
        links = np.asarray(links, dtype=complex)
        expected = (lat.dim,) + lat.shape + (group.n, group.n)
        if links.shape != expected:
            raise ValueError(f"links have shape {links.shape}, expected {expected}")
        bad = np.argwhere(group.check(links))
        if bad.size:
            a, *x = (int(v) for v in bad[0])
            raise ValueError(f"non-unitary link on axis {a} at node {tuple(x)}")
        self.lattice = lat
        self.group = group
        self.links = links

    @classmethod
    def identity(cls, lat: Lattice, group: GaugeGroup):
        eye = np.broadcast_to(np.eye(group.n, dtype=complex), (lat.dim,) + lat.shape + (group.n,) * 2)
        return cls(lat, group, eye.copy())

    @classmethod
    def random(cls, lat: Lattice, group: GaugeGroup, rng, scale=1.0):
        return cls(lat, group, random_group_elements(group, rng, (lat.dim,) + lat.shape, scale))


def holonomy_form(cfg: GaugeConfig) -> FormField:
    lat = cfg.lattice
    n = cfg.group.n
    coeffs = {(a,): shift(cfg.links[a], lat.unit(a)) / lat.spacing for a in range(lat.dim)}
    return FormField(lat, coeffs, (n, n))


@dataclass(frozen=True)
class FieldStrength:
    form: FormField
    plaquettes: dict  # (a, b) -> base-indexed R - L, shape lattice.shape + (N, N)


def plaquette_paths(cfg: GaugeConfig, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Path holonomies ``R = H_a(x) H_b(x+e_a)`` and ``L = H_b(x) H_a(x+e_b)`` at base x."""
    lat = cfg.lattice
    Ha, Hb = cfg.links[a], cfg.links[b]
    R = Ha @ shift(Hb, index_shift(lat, [a], -1))
    L = Hb @ shift(Ha, index_shift(lat, [b], -1))
    return R, L


def field_strength(cfg: GaugeConfig) -> FieldStrength:
    H = holonomy_form(cfg)
    F = form_product(H, H)
    lat = cfg.lattice
    plaq = {}
    for a in range(lat.dim):
        for b in range(a + 1, lat.dim):
            R, L = plaquette_paths(cfg, a, b)
            plaq[(a, b)] = R - L
    return FieldStrength(F, plaq)


def wilson_action(cfg: GaugeConfig, w=None) -> float:
    """``<H^2|H^2>`` with trace contraction."""
    F = form_product(holonomy_form(cfg), holonomy_form(cfg))
    return float(inner_product(F, F, w).real)


def plaquette_contributions(cfg: GaugeConfig, dv=None) -> dict:
    """Per-plaquette terms of ``<H^2|H^2>`` (diagonal weight ``dv``), base-indexed.

    Read from the coefficients of ``H^2``: ``tr(F_ab^dag F_ab) dV`` at the far
    corner ``x + e_a + e_b``, reported at the base node ``x``. At unit
    spacing this equals ``2N (1 - Re W / N)``.
    """
    lat = cfg.lattice
    dv = np.ones(lat.shape) if dv is None else np.asarray(dv)
    F = field_strength(cfg).form
    out = {}
    for (a, b), f in sorted(F.items()):
        val = np.sum(np.abs(f) ** 2, axis=(-2, -1)) * dv
        out[(a, b)] = shift(val, index_shift(lat, [a, b], -1))
    return out


def wilson_plaquette_formula(cfg: GaugeConfig) -> dict:
    """``2N (1 - Re tr(L^{-1} R) / N)`` per plaquette, base-indexed."""
    n = cfg.group.n
    out = {}
    for a in range(cfg.lattice.dim):
        for b in range(a + 1, cfg.lattice.dim):
            R, L = plaquette_paths(cfg, a, b)
            W = np.trace(np.conj(np.swapaxes(L, -1, -2)) @ R, axis1=-2, axis2=-1)
            out[(a, b)] = 2 * n * (1 - W.real / n)
    return out


def gauge_transform(cfg: GaugeConfig, omega: np.ndarray) -> GaugeConfig:
    """``H_a(x) -> Omega(x) H_a(x) Omega(x + e_a)^{-1}``."""
    lat = cfg.lattice
    links = np.empty_like(cfg.links)
    for a in range(lat.dim):
        ahead = shift(omega, index_shift(lat, [a], -1))
        links[a] = omega @ cfg.links[a] @ np.conj(np.swapaxes(ahead, -1, -2))
    return GaugeConfig(lat, cfg.group, links)


def random_gauge_transform(cfg: GaugeConfig, rng, scale=1.0) -> GaugeConfig:
    omega = random_group_elements(cfg.group, rng, cfg.lattice.shape, scale)
    return gauge_transform(cfg, omega)


# covariant derivative and residuals


def _dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def left_multiply(H: FormField, B: FormField) -> FormField:
    return form_product(H, B)


def right_multiply(B: FormField, H: FormField) -> FormField:
    return form_product(B, H)


def left_multiply_adjoint(H: FormField, C: FormField) -> FormField:
    """Flat adjoint of ``B -> H B`` for a 1-form ``H``."""
    lat = C.lattice
    out = FormField(lat, {}, C.value_shape)
    for (a,), h in H.items():
        removed = annihilator(C, a)
        out = out + removed.map_indexed(
            lambda I, k: _dagger(shift(h, index_shift(lat, I))) @ k
        )
    return out


def right_multiply_adjoint(C: FormField, H: FormField, p: int) -> FormField:
    """Flat adjoint of ``B -> B H`` on grade-``p`` inputs."""
    lat = C.lattice
    sign = -1 if p % 2 else 1
    out = FormField(lat, {}, C.value_shape)
    for (a,), h in H.items():
        back = index_shift(lat, [a], -1)
        removed = annihilator(C, a)
        out = out + sign * removed.map(lambda k: shift(k @ _dagger(h), back))
    return out


def covariant_derivative(H: FormField, B: FormField) -> FormField:
    """``d_H B = H B - (-1)^p B H`` for homogeneous ``B`` of grade ``p``."""
    p = B.grade
    return left_multiply(H, B) - (-1) ** p * right_multiply(B, H)


def covariant_codifferential(H: FormField, C: FormField) -> FormField:
    """Flat adjoint of :func:`covariant_derivative` on grade-``p+1`` inputs."""
    p = C.grade - 1
    return left_multiply_adjoint(H, C) - (-1) ** p * right_multiply_adjoint(C, H, p)


def bianchi_residual(cfg: GaugeConfig) -> float:
    """``max |H H^2 - H^2 H|``."""
    H = holonomy_form(cfg)
    F = form_product(H, H)
    return (form_product(H, F) - form_product(F, H)).max_abs()


def eom_residual(cfg: GaugeConfig) -> float:
    """``|| d_H^dag H^2 ||`` under the flat trace inner product."""
    H = holonomy_form(cfg)
    r = covariant_codifferential(H, form_product(H, H))
    return float(np.sqrt(inner_product(r, r).real))


def fermion_action_experimental(cfg: GaugeConfig, psi: FormField) -> float:
    """``|<psi| eps H psi + (-1)^N psi G>|^2`` for matrix-valued ``psi``.

    The right action of ``G`` is taken as right multiplication by the scalar
    graph operator on each matrix coefficient. Experimental and not part of
    any verified identity.
    """
    from .lattice_forms import graph_operator

    lat = cfg.lattice
    H = holonomy_form(cfg)
    G = graph_operator(lat)
    parity = FormField(lat, {I: (-1) ** len(I) * f for I, f in psi.items()}, psi.value_shape)
    val = inner_product(psi, lat.spacing * form_product(H, psi) + form_product(parity, G))
    return float(abs(val) ** 2)


# serialization


def save_config(cfg: GaugeConfig, path: str | Path) -> None:
    """JSON header line, then CSV rows ``axis, x..., re, im, re, im, ...``."""
    lat = cfg.lattice
    buf = io.StringIO()
    buf.write(
        json.dumps({"group": cfg.group.name, "shape": list(lat.shape), "spacing": lat.spacing})
        + "\n"
    )
    w = csv.writer(buf, lineterminator="\n")
    for a in range(lat.dim):
        for node in np.ndindex(*lat.shape):
            m = cfg.links[(a,) + node].ravel()
            row = [a, *node]
            for z in m:
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)
    Path(path).write_text(buf.getvalue())


def load_config(path: str | Path) -> GaugeConfig:
    text = Path(path).read_text()
    head, _, body = text.partition("\n")
    header = json.loads(head)
    lat = Lattice(tuple(header["shape"]), header.get("spacing", 1.0))
    group = group_from_name(header["group"])
    n = group.n
    links = np.zeros((lat.dim,) + lat.shape + (n, n), dtype=complex)
    seen = np.zeros((lat.dim,) + lat.shape, dtype=bool)
    for row in csv.reader(io.StringIO(body)):
        if not row:
            continue
        idx = tuple(int(v) for v in row[: 1 + lat.dim])
        nums = [float(v) for v in row[1 + lat.dim :]]
        if len(nums) != 2 * n * n:
            raise ValueError(f"row for link {idx} has {len(nums)} numbers, expected {2 * n * n}")
        links[idx] = (np.array(nums[0::2]) + 1j * np.array(nums[1::2])).reshape(n, n)
        seen[idx] = True
    if not seen.all():
        a, *x = (int(v) for v in np.argwhere(~seen)[0])
        raise ValueError(f"missing link on axis {a} at node {tuple(x)}")
    return GaugeConfig(lat, group, links)
