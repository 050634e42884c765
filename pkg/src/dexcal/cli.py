"""Batch command line front end.

Commands: verify, spectrum, wilson, wave, graph, hodge-demo. Exit codes are
0 on success, 1 when a check fails and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import chains, fermions, gauge, graph_calculus
from . import lattice_forms as lf
from . import metric_hodge as mh

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    run: Callable[[], float]
    tol: float


# verification suite


def _metrics(lat: lf.Lattice, rng) -> list[tuple[str, mh.MetricField]]:
    out = [("flat", mh.flat_metric(lat))]
    if lat.dim >= 2:
        out.append(("diamond", mh.diamond_metric(lat)))
    out.append(("diagonal", mh.random_diagonal_metric(lat, rng)))
    return out


def _flipped_hodge(A, m):
    """Debug mutation: wrong sign on odd-grade inputs."""
    return sum(
        (mh.hodge_star(A.part(p), m) * (-1 if p % 2 else 1) for p in sorted(A.grades)),
        lf.FormField.zeros(A.lattice),
    )


def _max_over_grades(lat, fn, rng, grades=None):
    worst = 0.0
    for p in range(lat.dim + 1) if grades is None else grades:
        worst = max(worst, fn(p, rng))
    return worst


def build_checks(seed: int, hodge=mh.hodge_star) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks: list[Check] = []
    add = lambda name, fn, tol: checks.append(Check(name, fn, tol))  # noqa: E731

    for D in (1, 2, 3):
        for L in (4, 8) if D < 3 else (4,):
            lat = lf.Lattice((L,) * D)
            tag = f"D={D},L={L}"
            add(f"d_nilpotent[{tag}]", lambda lat=lat: _d_squared(lat, rng), 1e-12)
            add(f"graded_leibniz[{tag}]", lambda lat=lat: _leibniz(lat, rng), 1e-12)
            add(f"boundary_nilpotent[{tag}]", lambda lat=lat: _bd_squared(lat, rng), 1e-12)
            add(f"stokes[{tag}]", lambda lat=lat: _stokes(lat, rng), 1e-12)
        lat = lf.Lattice((4,) * D)
        for mname, m in _metrics(lat, rng):
            tag = f"D={D},{mname}"
            add(f"hodge_d_identity[{tag}]", lambda m=m: _hodge_identity(m, rng, hodge), 1e-12)
            add(f"adjointness[{tag}]", lambda m=m: _adjoint(m, rng), 1e-12)
            add(f"codiff_nilpotent[{tag}]", lambda m=m: _codiff_squared(m, rng), 1e-12)
            add(f"hodge_inverse[{tag}]", lambda m=m: _hodge_inverse(m, rng, hodge), 1e-12)
            add(f"vol_coclosed[{tag}]", lambda m=m: mh.codifferential(mh.volume_form(m), m).max_abs(), 1e-12)
            add(f"sharp_flat[{tag}]", lambda m=m: _sharp_flat(m, rng), 1e-12)

    lat2 = lf.Lattice((4, 4))
    for sign in (1, -1):
        add(f"clifford_same[sign={sign:+d}]", lambda s=sign: _clifford_same(lat2, s), 1e-12)
    add("clifford_mixed", lambda: _clifford_mixed(lat2), 1e-12)
    add("pseudo_clifford", lambda: _pseudo(lat2), 1e-12)
    for sign in (1, -1):
        add(f"lorentz_timelike[sign={sign:+d}]", lambda s=sign: _timelike(lat2, s), 1e-12)
    for a in range(2):
        for b in range(2):
            add(
                f"gamma_coordinate[a={a},b={b}]",
                lambda a=a, b=b: mh.gamma_coordinate_commutator_check(lat2, a, b, 1, rng),
                1e-12,
            )
    add("structure_functions_unit", _structure_unit, 1e-15)

    for group in (gauge.U1, gauge.SU2, gauge.SU3):
        add(f"wilson_equivalence[{group.name}]", lambda g=group: _wilson(g, rng), 1e-10)
        add(f"gauge_invariance[{group.name}]", lambda g=group: _gauge_inv(g, rng), 1e-10)
        add(f"bianchi[{group.name}]", lambda g=group: _bianchi(g, rng), 1e-12)

    for D in (1, 2):
        for L in (8,):
            lat = lf.Lattice((L,) * D)
            add(f"dk_zero_count[D={D},L={L}]", lambda lat=lat: _zero_count(lat, "DK_plus", 1), 0.0)
            add(
                f"naive_zero_count[D={D},L={L}]",
                lambda lat=lat: _zero_count(lat, "naive_symmetric", 2**lat.dim),
                0.0,
            )
            add(f"dk_dispersion[D={D},L={L}]", lambda lat=lat: _dk_dispersion(lat), 1e-10)
    add("chirality[D=2,L=8]", lambda: _chirality(lf.Lattice((8, 8)), rng), 1e-10)
    add("diamond_wave_lightcone[L=16]", lambda: _wave_residual(16, "lightcone", rng).max(), 1e-12)
    add("graph_dims_plaquette", lambda: _graph_dims(PLAQUETTE, [4, 4, 1]), 0.0)
    add("graph_dims_open_tree", lambda: _graph_dims(OPEN_TREE, [7, 6]), 0.0)
    add("graph_dd_zero", _graph_dd, 0.0)
    return checks


def _d_squared(lat, rng):
    A = lf.random_form(lat, range(lat.dim + 1), rng)
    return lf.exterior_derivative(lf.exterior_derivative(A)).max_abs() / max(A.max_abs(), 1.0)


def _leibniz(lat, rng):
    worst = 0.0
    for p in range(lat.dim + 1):
        for q in range(lat.dim + 1 - p):
            A = lf.random_form(lat, [p], rng)
            B = lf.random_form(lat, [q], rng)
            d = lf.exterior_derivative
            lhs = d(lf.form_product(A, B))
            rhs = lf.form_product(d(A), B) + (-1) ** p * lf.form_product(A, d(B))
            worst = max(worst, (lhs - rhs).max_abs())
    return worst


def _bd_squared(lat, rng):
    S = lf.random_form(lat, range(lat.dim + 1), rng, cls=chains.ChainField)
    return chains.boundary(chains.boundary(S)).max_abs() / max(S.max_abs(), 1.0)


def _stokes(lat, rng):
    worst = 0.0
    for p in range(lat.dim):
        A = lf.random_form(lat, [p], rng)
        S = lf.random_form(lat, [p + 1], rng, cls=chains.ChainField)
        worst = max(worst, chains.stokes_check(A, S))
    return worst


def _hodge_identity(m, rng, hodge):
    def one(p, rng):
        A = lf.random_form(m.lattice, [p], rng)
        lhs = hodge(lf.exterior_derivative(A), m)
        rhs = mh.codifferential(hodge(A, m), m) * (-1) ** (p + 1)
        return (lhs - rhs).max_abs()

    return _max_over_grades(m.lattice, one, rng)


def _adjoint(m, rng):
    def one(p, rng):
        A = lf.random_form(m.lattice, [p], rng)
        B = lf.random_form(m.lattice, [p + 1], rng)
        lhs = mh.inner_product(lf.exterior_derivative(A), B, m)
        return abs(lhs - mh.inner_product(A, mh.codifferential(B, m), m))

    return _max_over_grades(m.lattice, one, rng, range(m.lattice.dim))


def _codiff_squared(m, rng):
    A = lf.random_form(m.lattice, range(m.lattice.dim + 1), rng)
    return mh.codifferential(mh.codifferential(A, m), m).max_abs() / max(A.max_abs(), 1.0)


def _hodge_inverse(m, rng, hodge):
    A = lf.random_form(m.lattice, range(m.lattice.dim + 1), rng)
    return (hodge(mh.hodge_star_inverse(A, m), m) - A).max_abs()


def _sharp_flat(m, rng):
    v = lf.random_form(m.lattice, range(m.lattice.dim + 1), rng, cls=chains.ChainField)
    return (chains.sharp(chains.flat(v, m), m) - v).max_abs()


def _clifford_same(lat, sign):
    worst = 0.0
    mats = [mh.operator_matrix(mh.clifford_generator(a, sign), lat) for a in range(lat.dim)]
    eye = np.eye(mats[0].shape[0])
    for a, A in enumerate(mats):
        for b, B in enumerate(mats):
            target = 2 * sign * eye if a == b else 0 * eye
            worst = max(worst, np.abs(A @ B + B @ A - target).max())
    return worst


def _clifford_mixed(lat):
    plus = [mh.operator_matrix(mh.clifford_generator(a, 1), lat) for a in range(lat.dim)]
    minus = [mh.operator_matrix(mh.clifford_generator(a, -1), lat) for a in range(lat.dim)]
    return max(np.abs(P @ M + M @ P).max() for P in plus for M in minus)


def _translation_matrix(lat, y):
    return mh.operator_matrix(lambda psi: psi.map(lambda f: lf.shift(f, y)), lat)


def _pseudo(lat):
    plus = [mh.operator_matrix(mh.pseudo_clifford(a, 1), lat) for a in range(lat.dim)]
    minus = [mh.operator_matrix(mh.pseudo_clifford(a, -1), lat) for a in range(lat.dim)]
    worst = 0.0
    for a in range(lat.dim):
        T = _translation_matrix(lat, lf.index_shift(lat, [a], -1))
        for b in range(lat.dim):
            target = 2 * T if a == b else 0 * T
            worst = max(worst, np.abs(plus[a] @ plus[b] + plus[b] @ plus[a] - target).max())
            worst = max(worst, np.abs(plus[a] @ minus[b] + minus[b] @ plus[a]).max())
    return worst


def _timelike(lat, sign):
    M = mh.operator_matrix(mh.timelike_clifford(lat, sign, mh.diamond_metric(lat)), lat)
    return np.abs(M @ M + M @ M + 2 * sign * np.eye(M.shape[0])).max()


def _structure_unit():
    e = np.broadcast_to(np.eye(3), (4, 3, 3))
    C = lf.structure_functions(e)
    expected = np.zeros((3, 3, 3))
    for mu in range(3):
        expected[mu, mu, mu] = -1.0
    return float(np.abs(C - expected).max())


def _wilson(group, rng):
    cfg = gauge.GaugeConfig.random(lf.Lattice((4, 4)), group, rng)
    pc = gauge.plaquette_contributions(cfg)
    wf = gauge.wilson_plaquette_formula(cfg)
    return max(float(np.abs(pc[k] - wf[k]).max()) for k in pc)


def _gauge_inv(group, rng):
    cfg = gauge.GaugeConfig.random(lf.Lattice((4, 4)), group, rng)
    return abs(gauge.wilson_action(gauge.random_gauge_transform(cfg, rng)) - gauge.wilson_action(cfg))


def _bianchi(group, rng):
    return gauge.bianchi_residual(gauge.GaugeConfig.random(lf.Lattice((4, 4)), group, rng))


def _zero_count(lat, variant, expected):
    scan = fermions.dispersion_scan(fermions.DiracOperator(variant), lat)
    return float(abs(scan.zero_count - expected))


def _dk_dispersion(lat):
    scan = fermions.dispersion_scan(fermions.DiracOperator("DK_plus"), lat)
    eps = lat.spacing
    pred = 4 * np.sum(np.sin(scan.momenta * eps / 2) ** 2, axis=1) / eps**2
    return float(np.abs(scan.eigenvalues - pred[:, None]).max())


def _chirality(lat, rng):
    psi = lf.random_form(lat, range(lat.dim + 1), rng, complex_values=True)
    q = fermions.chirality_operator(lat)
    dk = fermions.DiracOperator("DK_plus")
    return max((q(q(psi)) - psi).max_abs(), (dk(q(psi)) + q(dk(psi))).max_abs())


PLAQUETTE = graph_calculus.DirectedGraph(4, [(0, 1), (1, 3), (0, 2), (2, 3)])
OPEN_TREE = graph_calculus.DirectedGraph(7, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)])


def _graph_dims(g, expected):
    return float(graph_calculus.chain_dimensions(g) != expected)


def _graph_dd():
    worst = 0.0
    for g in (PLAQUETTE, OPEN_TREE, graph_calculus.DirectedGraph(3, [(0, 1), (1, 2), (0, 2)])):
        ds = graph_calculus.coboundary_as_transpose(graph_calculus.chain_spaces(g, 3))
        for a, b in zip(ds, ds[1:]):
            if a.size and b.size:
                worst = max(worst, float(np.abs(b @ a).max()))
    return worst


# diamond wave


def wave_profile(L: int, profile: str, rng) -> np.ndarray:
    x0, x1 = np.indices((L, L))
    if profile == "lightcone":
        fp, fm = rng.standard_normal(L), rng.standard_normal(L)
        return fp[x0] + fm[x1]
    if profile == "generic":
        return np.sin(2 * np.pi * (x0 + x1) / L) + 0.5 * np.cos(2 * np.pi * (x0 - 2 * x1) / L)
    if profile == "zero":
        return np.zeros((L, L))
    raise UsageError(f"unknown profile {profile!r}")


def _wave_residual(L: int, profile: str, rng, spacing: float = 1.0) -> np.ndarray:
    lat = lf.Lattice((L, L), spacing)
    m = mh.diamond_metric(lat)
    f = lf.FormField.scalar(lat, wave_profile(L, profile, rng))
    return np.abs(mh.laplace_beltrami(f, m).component(()))


# command handlers


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    hodge = _flipped_hodge if args.inject_hodge_sign_flip else mh.hodge_star
    checks = build_checks(args.seed, hodge)
    lines = []
    first_fail = None
    for c in checks:
        tol = c.tol if args.tol is None else args.tol
        r = float(c.run())
        ok = r <= tol
        lines.append(f"{'PASS' if ok else 'FAIL'} {c.name} residual={r:.3e} tol={tol:.1e}")
        if not ok and first_fail is None:
            first_fail = c.name
    passed = sum(line.startswith("PASS") for line in lines)
    lines.append(f"{passed}/{len(checks)} checks passed")
    if first_fail:
        lines.append(f"first failure: {first_fail}")
    _emit(args, "\n".join(lines) + "\n")
    if first_fail:
        print(f"check failed: {first_fail}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_spectrum(args) -> int:
    lat = lf.Lattice((args.size,) * args.dim, args.spacing)
    metric = _load_metric(lat, args.metric) if args.metric else None
    variant = {"dk": "DK_plus", "naive": "naive_symmetric"}[args.operator]
    scan = fermions.dispersion_scan(fermions.DiracOperator(variant, metric), lat)
    buf = io.StringIO()
    buf.write(",".join([f"k{a}" for a in range(args.dim)] + ["min_abs_eig", "zero_flag"]) + "\n")
    for k, mn, z in zip(scan.momenta, scan.min_abs, scan.zero_flags):
        buf.write(",".join([f"{v:.17g}" for v in k] + [f"{mn:.17g}", str(int(z))]) + "\n")
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_wilson(args) -> int:
    cfg = gauge.load_config(args.config)
    metric = _load_metric(cfg.lattice, args.metric) if args.metric else None
    S = gauge.wilson_action(cfg, metric)
    dv = metric.dv if metric is not None else None
    values = np.concatenate([v.ravel() for v in gauge.plaquette_contributions(cfg, dv).values()])
    counts, edges = np.histogram(values, bins=args.bins)
    buf = io.StringIO()
    buf.write(f"# action={S:.17g}\n")
    buf.write("bin_lo,bin_hi,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo:.17g},{hi:.17g},{c}\n")
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_wave(args) -> int:
    rng = np.random.default_rng(args.seed)
    L = args.size
    res = _wave_residual(L, args.profile, rng, args.spacing)
    x0, x1 = np.indices((L, L)) * args.spacing
    x = (x0 - x1) / np.sqrt(2)
    t = (x0 + x1) / np.sqrt(2)
    buf = io.StringIO()
    buf.write("x,t,residual\n")
    for xi, ti, ri in zip(x.ravel(), t.ravel(), res.ravel()):
        buf.write(f"{xi:.17g},{ti:.17g},{ri:.17g}\n")
    _emit(args, buf.getvalue())
    tol = 1e-12 if args.tol is None else args.tol
    if args.profile in ("lightcone", "zero") and res.max() > tol:
        print(f"check failed: residual {res.max():.3e} exceeds {tol:.1e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_graph(args) -> int:
    text = Path(args.input).read_text() if args.input != "-" else sys.stdin.read()
    try:
        g = graph_calculus.graph_from_json(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    report = graph_calculus.graph_report(g, args.max_grade)
    _emit(args, json.dumps(report) + "\n")
    return EXIT_OK


def _describe(lat: lf.Lattice, F: lf.FormField) -> list[dict]:
    terms = []
    for I, f in sorted(F.items()):
        for node in zip(*np.nonzero(np.abs(f) > 1e-14)):
            shift = [int(v) if v <= n // 2 else int(v) - n for v, n in zip(node, lat.shape)]
            val = complex(f[node])
            terms.append(
                {
                    "index": [a + 1 for a in I],
                    "coefficient": val.real if val.imag == 0 else [val.real, val.imag],
                    "translation": shift,
                }
            )
    return terms


def cmd_hodge_demo(args) -> int:
    lat = lf.Lattice((args.size,) * 2)
    metric = mh.diamond_metric(lat, args.c) if args.metric == "diamond" else mh.flat_metric(lat, args.c)
    rows = []
    for I in lat.indices():
        basis = lf.FormField.basis(lat, I, (0, 0))
        rows.append(
            {
                "input": [a + 1 for a in I],
                "star": _describe(lat, mh.hodge_star(basis, metric)),
                "metric_operator": _describe(lat, mh.metric_operator_apply(basis, metric)),
                "codifferential": _describe(lat, mh.codifferential(basis, metric)),
            }
        )
    vol = _describe(lat, mh.volume_form(metric).map(lambda f: f * (np.indices(lat.shape).sum(0) == 0)))
    _emit(args, json.dumps({"metric": args.metric, "c": args.c, "volume_at_origin": vol, "basis": rows}, indent=1) + "\n")
    return EXIT_OK


def _load_metric(lat: lf.Lattice, path: str) -> mh.MetricField:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"metric parse error at line {exc.lineno}: {exc.msg}")
    return mh.metric_from_spec(lat, spec)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", default=None, help="write output to this file")
    common.add_argument("--tol", type=float, default=None, help="override check tolerances")

    p = argparse.ArgumentParser(prog="dexcal", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the identity suite")
    v.add_argument("--inject-hodge-sign-flip", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("spectrum", parents=[common], help="Dirac dispersion scan as CSV")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--operator", choices=["dk", "naive"], required=True)
    s.add_argument("--metric", default=None, help="metric JSON file")
    s.add_argument("--spacing", type=float, default=1.0)
    s.set_defaults(func=cmd_spectrum)

    w = sub.add_parser("wilson", parents=[common], help="Wilson action of a gauge config")
    w.add_argument("--config", required=True)
    w.add_argument("--metric", default=None)
    w.add_argument("--bins", type=int, default=10)
    w.set_defaults(func=cmd_wilson)

    wv = sub.add_parser("wave", parents=[common], help="diamond wave-operator residuals")
    wv.add_argument("--size", type=int, default=16)
    wv.add_argument("--profile", choices=["lightcone", "generic", "zero"], default="lightcone")
    wv.add_argument("--spacing", type=float, default=1.0)
    wv.set_defaults(func=cmd_wave)

    g = sub.add_parser("graph", parents=[common], help="chain dimensions of a directed graph")
    g.add_argument("input", help="graph JSON file, or - for stdin")
    g.add_argument("--max-grade", type=int, default=3)
    g.set_defaults(func=cmd_graph)

    h = sub.add_parser("hodge-demo", parents=[common], help="1+1 Hodge and metric tables")
    h.add_argument("--metric", choices=["flat", "diamond"], default="diamond")
    h.add_argument("--size", type=int, default=4)
    h.add_argument("--c", type=float, default=1.0, help="volume constant")
    h.set_defaults(func=cmd_hodge_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
