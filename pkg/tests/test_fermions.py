import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dexcal import fermions
from dexcal import lattice_forms as lf
from dexcal import metric_hodge as mh
from dexcal.fermions import DiracOperator
from dexcal.lattice_forms import FormField, Lattice, random_form

seeds = st.integers(0, 2**32 - 1)


def _psi(lat, rng, complex_values=True):
    return random_form(lat, range(lat.dim + 1), rng, complex_values=complex_values)


def test_variant_validation(rng):
    with pytest.raises(ValueError):
        DiracOperator("wilson")
    lat = Lattice((4, 4))
    with pytest.raises(ValueError):
        DiracOperator("DK_tilde", mh.diamond_metric(lat))
    assert DiracOperator("DK_plus").self_adjoint and not DiracOperator("DK_minus").self_adjoint


@given(seed=seeds, kind=st.sampled_from(["flat", "diamond", "diagonal"]))
def test_dk_squares(seed, kind):
    rng = np.random.default_rng(seed)
    lat = Lattice((3, 4))
    m = {
        "flat": mh.flat_metric(lat),
        "diamond": mh.diamond_metric(lat),
        "diagonal": mh.random_diagonal_metric(lat, rng),
    }[kind]
    psi = _psi(lat, rng)
    plus, minus = DiracOperator("DK_plus", m), DiracOperator("DK_minus", m)
    lap = mh.laplace_beltrami(psi, m)
    assert (plus(plus(psi)) - lap).max_abs() <= 1e-12
    assert (minus(minus(psi)) + lap).max_abs() <= 1e-12


@given(seed=seeds)
def test_q_assembly(seed):
    rng = np.random.default_rng(seed)
    lat = Lattice((3, 4, 3), 0.6)
    psi = _psi(lat, rng)
    assert (DiracOperator("DK_plus")(psi) - fermions.q_assembly(psi, -1)).max_abs() <= 1e-12
    assert (DiracOperator("DK_minus")(psi) - fermions.q_assembly(psi, 1)).max_abs() <= 1e-12


def test_dk_on_constant_vanishes():
    lat = Lattice((4, 4))
    for variant in fermions.VARIANTS:
        assert DiracOperator(variant)(FormField.scalar(lat, 2.0)).max_abs() <= 1e-14


def test_dk_tilde_and_naive_definitions(rng):
    lat = Lattice((4, 3))
    psi = _psi(lat, rng)
    for variant, gsign in [("DK_tilde", -1), ("naive_symmetric", 1)]:
        expected = sum(
            (mh.clifford_generator(a, gsign)(mh.antihermitian_partial(a)(psi)) for a in range(2)),
            FormField.zeros(lat),
        )
        assert (DiracOperator(variant)(psi) - expected).max_abs() <= 1e-14
    tilde_minus = DiracOperator("DK_tilde", sign=-1)(psi)
    expected = sum(
        (mh.clifford_generator(a, 1)(mh.antihermitian_partial(a)(psi)) for a in range(2)),
        FormField.zeros(lat),
    )
    assert (tilde_minus - expected).max_abs() <= 1e-14


def test_dirac_action(rng):
    lat = Lattice((4, 4))
    dk = DiracOperator("DK_plus")
    assert fermions.dirac_action(FormField.zeros(lat), dk) == 0
    psi = _psi(lat, rng, complex_values=False)
    assert abs(fermions.dirac_action(psi, dk).imag) <= 1e-10
    phi = _psi(lat, rng)
    psi = _psi(lat, rng)
    lhs = mh.inner_product(psi, dk(phi))
    rhs = np.conj(mh.inner_product(phi, dk(psi)))
    assert abs(lhs - rhs) <= 1e-12


def test_dirac_apply_is_call(rng):
    lat = Lattice((3, 3))
    psi = _psi(lat, rng)
    op = DiracOperator("DK_minus")
    assert (fermions.dirac_apply(op, psi) - op(psi)).max_abs() == 0


# chirality


def test_chirality_square_and_anticommutation(rng):
    lat = Lattice((6, 6))
    q = fermions.chirality_operator(lat)
    dk = DiracOperator("DK_plus")
    for _ in range(3):
        psi = _psi(lat, rng)
        assert (q(q(psi)) - psi).max_abs() <= 1e-10
        assert (dk(q(psi)) + q(dk(psi))).max_abs() <= 1e-10


def test_chirality_four_dimensions(rng):
    lat = Lattice((4, 4, 4, 4))
    q = fermions.chirality_operator(lat)
    psi = _psi(lat, rng)
    assert (q(q(psi)) - psi).max_abs() <= 1e-10
    dk = DiracOperator("DK_plus")
    assert (dk(q(psi)) + q(dk(psi))).max_abs() <= 1e-10


def test_chirality_errors(rng):
    with pytest.raises(ValueError):
        fermions.chirality_operator(Lattice((4, 4, 4)))
    lat = Lattice((4, 4))
    with pytest.raises(ValueError):
        fermions.chirality_operator(lat, mh.random_diagonal_metric(lat, rng))


def test_qbar_square_on_basis_forms():
    lat = Lattice((4, 4))
    qb = fermions.qbar(lat)
    back = lf.index_shift(lat, [0, 1], -1)
    for I in lat.indices():
        psi = FormField.basis(lat, I, (1, 2))
        expected = -psi.map(lambda f: lf.shift(f, back))
        assert (qb(qb(psi)) - expected).max_abs() <= 1e-14


# dispersion


@pytest.mark.parametrize("L", [8, 16])
@pytest.mark.parametrize("D", [1, 2])
def test_zero_counts(D, L):
    lat = Lattice((L,) * D)
    assert fermions.dispersion_scan(DiracOperator("DK_plus"), lat).zero_count == 1
    assert fermions.dispersion_scan(DiracOperator("naive_symmetric"), lat).zero_count == 2**D


def test_dk_tilde_doubles():
    lat = Lattice((8, 8))
    assert fermions.dispersion_scan(DiracOperator("DK_tilde"), lat).zero_count == 4


def test_dk_dispersion_values():
    lat = Lattice((16,), 0.5)
    scan = fermions.dispersion_scan(DiracOperator("DK_plus"), lat)
    pred = 4 * np.sin(scan.momenta[:, 0] * 0.5 / 2) ** 2 / 0.25
    assert np.abs(scan.eigenvalues - pred[:, None]).max() <= 1e-10
    assert np.abs(scan.eigenvalues.imag).max() <= 1e-10


def test_naive_dispersion_values():
    lat = Lattice((16,), 0.5)
    scan = fermions.dispersion_scan(DiracOperator("naive_symmetric"), lat)
    # naive_symmetric is anti-Hermitian, so its square is -sin^2(k eps)/eps^2
    pred = -np.sin(scan.momenta[:, 0] * 0.5) ** 2 / 0.25
    assert np.abs(scan.eigenvalues - pred[:, None]).max() <= 1e-10
    zeros = np.sort(np.abs(scan.momenta[scan.zero_flags, 0]))
    assert np.allclose(zeros, [0, np.pi / 0.5])


def test_dispersion_brute_force_1d():
    lat = Lattice((8,))
    op = DiracOperator("DK_plus")
    M = mh.operator_matrix(op, lat)
    dense = np.sort(np.linalg.eigvals(M @ M).real)
    scan = fermions.dispersion_scan(op, lat)
    assert np.allclose(np.sort(scan.eigenvalues.real.ravel()), dense, atol=1e-10)


def test_dispersion_rejects_position_dependent(rng):
    lat = Lattice((4, 4))
    op = DiracOperator("DK_plus", mh.random_diagonal_metric(lat, rng))
    with pytest.raises(ValueError, match="translation invariant"):
        fermions.dispersion_scan(op, lat)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("DEXCAL_THREADS", "3")
    assert fermions.thread_cap() == 3
    monkeypatch.setenv("DEXCAL_THREADS", "zero")
    with pytest.raises(ValueError):
        fermions.thread_cap()
    monkeypatch.setenv("DEXCAL_THREADS", "1")
    scan = fermions.dispersion_scan(DiracOperator("DK_plus"), Lattice((8,)))
    assert scan.zero_count == 1
