import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dexcal import gauge
from dexcal import lattice_forms as lf
from dexcal import metric_hodge as mh
from dexcal.lattice_forms import Lattice

seeds = st.integers(0, 2**32 - 1)
GROUPS = [gauge.U1, gauge.SU2, gauge.SU3]


def test_group_validation():
    with pytest.raises(ValueError):
        gauge.GaugeGroup("SU", 4)
    with pytest.raises(ValueError):
        gauge.group_from_name("SO3")
    assert gauge.group_from_name("SU2") is gauge.SU2


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_random_elements_are_group_members(group, rng):
    h = gauge.random_algebra(group, rng, (50,))
    assert np.allclose(h, np.conj(np.swapaxes(h, -1, -2)))
    assert np.all(np.linalg.norm(h, ord=2, axis=(-2, -1)) <= 1 + 1e-12)
    m = gauge.exp_algebra(h, group)
    assert not group.check(m).any()


def test_reunitarize_projects_to_group(rng):
    m = gauge.random_group_elements(gauge.SU3, rng, (5,)) + 1e-6 * rng.standard_normal((5, 3, 3))
    assert not gauge.SU3.check(gauge.reunitarize(m, gauge.SU3)).any()


def test_config_rejects_non_unitary_with_location():
    lat = Lattice((3, 3))
    links = np.ones((2, 3, 3, 1, 1), dtype=complex)
    links[1, 2, 0] = 1.5
    with pytest.raises(ValueError, match=r"axis 1 at node \(2, 0\)"):
        gauge.GaugeConfig(lat, gauge.U1, links)


@pytest.mark.parametrize("eps", [1.0, 0.5])
def test_trivial_holonomy_is_graph_operator(eps):
    lat = Lattice((3, 4), eps)
    H = gauge.holonomy_form(gauge.GaugeConfig.identity(lat, gauge.SU2))
    G = lf.graph_operator(lat)
    for I, g in G.items():
        assert np.allclose(H.component(I), g[..., None, None] * np.eye(2))


def test_holonomy_placement():
    lat = Lattice((4, 3))
    links = np.ones((2, 4, 3, 1, 1), dtype=complex)
    links[1] = np.exp(0.7j)
    H = gauge.holonomy_form(gauge.GaugeConfig(lat, gauge.U1, links))
    assert np.allclose(H.component((1,)), np.exp(0.7j)) and np.allclose(H.component((0,)), 1)
    links = np.ones((2, 4, 3, 1, 1), dtype=complex)
    links[0, 1, 2] = 1j
    H = gauge.holonomy_form(gauge.GaugeConfig(lat, gauge.U1, links))
    assert H.component((0,))[2, 2, 0, 0] == 1j


def test_trivial_config_has_zero_curvature():
    cfg = gauge.GaugeConfig.identity(Lattice((3, 3, 3)), gauge.SU3)
    assert gauge.field_strength(cfg).form.max_abs() == 0
    assert gauge.wilson_action(cfg) == 0
    assert gauge.eom_residual(cfg) == 0


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_field_strength_matches_plaquettes(group, rng):
    lat = Lattice((3, 4, 3), 0.5)
    fs = gauge.field_strength(gauge.GaugeConfig.random(lat, group, rng))
    for (a, b), rl in fs.plaquettes.items():
        coeff = fs.form.component((a, b))
        expected = lf.shift(rl, lf.index_shift(lat, [a, b])) / lat.spacing**2
        assert np.abs(coeff - expected).max() <= 1e-12


def test_single_plaquette_su2():
    lat = Lattice((3, 3))
    links = np.broadcast_to(np.eye(2, dtype=complex), (2, 3, 3, 2, 2)).copy()
    theta = 0.9
    links[0, 1, 1] = np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
    cfg = gauge.GaugeConfig(lat, gauge.SU2, links)
    F = gauge.field_strength(cfg)
    R, L = gauge.plaquette_paths(cfg, 0, 1)
    assert np.allclose(F.plaquettes[(0, 1)][1, 1], R[1, 1] - L[1, 1])
    contrib = gauge.plaquette_contributions(cfg)[(0, 1)]
    W = 2 * np.cos(theta)
    assert contrib[1, 1] == pytest.approx(2 * 2 * (1 - W / 2))
    # the link also borders the plaquette based at (1, 0)
    assert np.count_nonzero(np.abs(contrib) > 1e-12) == 2
    assert gauge.wilson_action(cfg) == pytest.approx(contrib.sum())


@given(seed=seeds, group=st.sampled_from(GROUPS))
def test_wilson_equivalence_and_positivity(seed, group):
    rng = np.random.default_rng(seed)
    cfg = gauge.GaugeConfig.random(Lattice((3, 4)), group, rng)
    via_forms = gauge.plaquette_contributions(cfg)
    via_trace = gauge.wilson_plaquette_formula(cfg)
    for key in via_forms:
        assert np.abs(via_forms[key] - via_trace[key]).max() <= 1e-10
    assert gauge.wilson_action(cfg) >= 0


def test_wilson_action_with_weight(rng):
    lat = Lattice((4, 4))
    cfg = gauge.GaugeConfig.random(lat, gauge.SU2, rng)
    w = mh.InnerProductWeight(np.full(lat.shape, 2.5))
    assert gauge.wilson_action(cfg, w) == pytest.approx(2.5 * gauge.wilson_action(cfg))


@given(seed=seeds, group=st.sampled_from(GROUPS))
def test_gauge_invariance(seed, group):
    rng = np.random.default_rng(seed)
    cfg = gauge.GaugeConfig.random(Lattice((4, 3)), group, rng)
    moved = gauge.random_gauge_transform(cfg, rng)
    assert abs(gauge.wilson_action(moved) - gauge.wilson_action(cfg)) <= 1e-10
    assert abs(gauge.eom_residual(moved) - gauge.eom_residual(cfg)) <= 1e-10


@given(seed=seeds, group=st.sampled_from(GROUPS))
def test_bianchi(seed, group):
    cfg = gauge.GaugeConfig.random(Lattice((3, 3, 3)), group, np.random.default_rng(seed))
    assert gauge.bianchi_residual(cfg) <= 1e-12


def test_eom_residual_generic_positive(rng):
    cfg = gauge.GaugeConfig.random(Lattice((4, 4)), gauge.SU2, rng)
    assert gauge.eom_residual(cfg) > 1e-6


@pytest.mark.parametrize("p", [0, 1, 2])
def test_covariant_codifferential_is_adjoint(p, rng):
    lat = Lattice((3, 4, 3))
    cfg = gauge.GaugeConfig.random(lat, gauge.SU2, rng)
    H = gauge.holonomy_form(cfg)
    B = lf.random_form(lat, [p], rng, complex_values=True, value_shape=(2, 2))
    C = lf.random_form(lat, [p + 1], rng, complex_values=True, value_shape=(2, 2))
    lhs = mh.inner_product(gauge.covariant_derivative(H, B), C)
    rhs = mh.inner_product(B, gauge.covariant_codifferential(H, C))
    assert abs(lhs - rhs) <= 1e-11 * max(1, abs(lhs))


def test_u1_continuum_first_order():
    def error(L):
        eps = 1.0 / L
        lat = Lattice((L, L), eps)
        x0, x1 = (g * eps for g in lat.grid())
        A0, A1 = np.sin(2 * np.pi * x1), np.cos(2 * np.pi * x0)
        curl = -2 * np.pi * np.sin(2 * np.pi * x0) - 2 * np.pi * np.cos(2 * np.pi * x1)
        links = np.exp(1j * eps * np.stack([A0, A1]))[..., None, None]
        plaq = gauge.field_strength(gauge.GaugeConfig(lat, gauge.U1, links)).plaquettes[(0, 1)]
        return np.abs(plaq[..., 0, 0] / eps**2 - 1j * curl).max()

    r = error(16) / error(32)
    assert 1.5 <= r <= 2.5


@pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
def test_config_round_trip(group, tmp_path, rng):
    cfg = gauge.GaugeConfig.random(Lattice((3, 4), 0.5), group, rng)
    gauge.save_config(cfg, tmp_path / "c.csv")
    back = gauge.load_config(tmp_path / "c.csv")
    assert back.group == group and back.lattice == cfg.lattice
    assert np.array_equal(back.links, cfg.links)


def test_load_config_reports_missing_link(tmp_path, rng):
    cfg = gauge.GaugeConfig.random(Lattice((3, 3)), gauge.U1, rng)
    path = tmp_path / "c.csv"
    gauge.save_config(cfg, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError, match="missing link on axis 1"):
        gauge.load_config(path)


def test_fermion_action_experimental_runs(rng):
    lat = Lattice((3, 3))
    cfg = gauge.GaugeConfig.random(lat, gauge.SU2, rng)
    psi = lf.random_form(lat, range(3), rng, complex_values=True, value_shape=(2, 2))
    assert gauge.fermion_action_experimental(cfg, psi) >= 0
