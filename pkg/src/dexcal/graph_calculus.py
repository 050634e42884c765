"""Path, chain and cochain calculus on finite directed graphs.

A p-path is a node sequence ``(i0, ..., ip)`` whose consecutive pairs are
edges. The boundary deletes nodes with alternating signs and drops every
resulting sequence that is not a path. Chains ``C_p = ker(bd^2 on P_p)``
are computed exactly over the rationals for small spaces. Cochains are the
duals of the chain bases, and ``d`` is the transpose of the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.linalg
import sympy

EXACT_LIMIT = 200
RANK_TOL = 1e-9

Path = tuple[int, ...]


@dataclass(frozen=True)
class DirectedGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, node_count: int, edges: Iterable[Iterable[int]] = ()):
        pairs = [tuple(int(v) for v in e) for e in edges]
        for e in pairs:
            if len(e) != 2:
                raise ValueError(f"edge {e} must have two endpoints")
            i, j = e
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise ValueError(f"edge {e} out of range for {node_count} nodes")
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate edges")
        if node_count < 0:
            raise ValueError("node_count must be non-negative")
        object.__setattr__(self, "node_count", int(node_count))
        object.__setattr__(self, "edges", frozenset(pairs))

    @cached_property
    def successors(self) -> dict[int, list[int]]:
        out = {i: [] for i in range(self.node_count)}
        for i, j in sorted(self.edges):
            out[i].append(j)
        return out

    def relabel(self, perm: Iterable[int]) -> "DirectedGraph":
        perm = list(perm)
        return DirectedGraph(self.node_count, [(perm[i], perm[j]) for i, j in self.edges])


def graph_from_json(text: str) -> DirectedGraph:
    """Parse ``{"nodes": N, "edges": [[i, j], ...]}``.

    Malformed JSON raises ``json.JSONDecodeError`` carrying the line number.
    """
    obj = json.loads(text)
    if not isinstance(obj, dict) or "nodes" not in obj:
        raise ValueError('graph JSON needs an object with a "nodes" field')
    return DirectedGraph(int(obj["nodes"]), obj.get("edges", []))


@dataclass(frozen=True)
class PathSpace:
    grade: int
    basis: tuple[Path, ...]

    def index(self) -> dict[Path, int]:
        return {p: k for k, p in enumerate(self.basis)}

    def __len__(self):
        return len(self.basis)


def build_path_spaces(g: DirectedGraph, max_grade: int) -> list[PathSpace]:
    """Lexicographically ordered path bases for grades ``0..max_grade``."""
    if max_grade < 0:
        raise ValueError("max_grade must be non-negative")
    current = [(i,) for i in range(g.node_count)]
    spaces = [PathSpace(0, tuple(current))]
    for p in range(1, max_grade + 1):
        current = [path + (j,) for path in current for j in g.successors[path[-1]]]
        spaces.append(PathSpace(p, tuple(sorted(current))))
    return spaces


def boundary_matrix(paths_p: PathSpace, paths_pm1: PathSpace) -> np.ndarray:
    """Integer matrix of the boundary ``P_p -> P_{p-1}``."""
    if paths_p.grade != paths_pm1.grade + 1:
        raise ValueError(f"grades {paths_p.grade} and {paths_pm1.grade} do not differ by one")
    rows = paths_pm1.index()
    B = np.zeros((len(paths_pm1), len(paths_p)), dtype=np.int64)
    for col, path in enumerate(paths_p.basis):
        for k in range(len(path)):
            face = path[:k] + path[k + 1 :]
            r = rows.get(face)
            if r is not None:
                B[r, col] += (-1) ** k
    return B


def _rref_rows(M: sympy.Matrix) -> sympy.Matrix:
    return M.rref()[0] if M.rows else M


def _kernel(M: np.ndarray) -> np.ndarray:
    """Column basis of ``ker M`` in reduced echelon form (rows of the RREF)."""
    n = M.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if n <= EXACT_LIMIT:
        vecs = sympy.Matrix(M.tolist()).nullspace() if M.shape[0] else sympy.eye(n).columnspace()
        if not vecs:
            return np.zeros((n, 0))
        K = _rref_rows(sympy.Matrix.hstack(*vecs).T)
        return np.array(K.tolist(), dtype=float).T
    K = scipy.linalg.null_space(M.astype(float), rcond=RANK_TOL) if M.shape[0] else np.eye(n)
    if K.shape[1] == 0:
        return K
    # canonical echelon form for determinism
    _, _, piv = scipy.linalg.qr(K.T, pivoting=True)
    return np.linalg.solve(K.T[:, piv[: K.shape[1]]], K.T).T


@dataclass(frozen=True)
class ChainBasis:
    grade: int
    paths: PathSpace
    matrix: np.ndarray  # columns span C_p in path coordinates

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ChainComplex:
    graph: DirectedGraph
    paths: list[PathSpace]
    boundaries: list[np.ndarray]  # boundaries[p]: P_p -> P_{p-1}, p >= 1
    chains: list[ChainBasis]

    @property
    def dims(self) -> list[int]:
        return [c.dim for c in self.chains]


def chain_spaces(g: DirectedGraph, max_grade: int) -> ChainComplex:
    paths = build_path_spaces(g, max_grade)
    bds = [np.zeros((0, len(paths[0])), dtype=np.int64)]
    for p in range(1, max_grade + 1):
        bds.append(boundary_matrix(paths[p], paths[p - 1]))
    chains = []
    for p in range(max_grade + 1):
        if p < 2:
            K = np.eye(len(paths[p]))
        else:
            K = _kernel(bds[p - 1] @ bds[p])
        chains.append(ChainBasis(p, paths[p], K))
    return ChainComplex(g, paths, bds, chains)


def chain_dimensions(g: DirectedGraph, max_grade: int = 3) -> list[int]:
    """``dim C_p`` for ``p = 0..max_grade`` with trailing zeros removed (at least one entry)."""
    dims = chain_spaces(g, max_grade).dims
    while len(dims) > 1 and dims[-1] == 0:
        dims.pop()
    return dims


def classify_edges(g: DirectedGraph) -> dict[str, bool]:
    E = g.edges
    has_opposite = any((j, i) in E for i, j in E)
    has_intermediate = any(
        (i, j) in E for i, k in E for j in g.successors[k] if j != i
    )
    return {"has_intermediate": has_intermediate, "has_opposite": has_opposite}


def _coords(K: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Coordinates of the columns of ``V`` in the column basis ``K``."""
    if K.shape[1] == 0:
        return np.zeros((0, V.shape[1]))
    X, *_ = np.linalg.lstsq(K, V, rcond=None)
    return X


def chain_boundary_matrices(cx: ChainComplex) -> list[np.ndarray]:
    """``bd: C_{p+1} -> C_p`` in chain-basis coordinates, indexed by p."""
    out = []
    for p in range(len(cx.chains) - 1):
        image = cx.boundaries[p + 1] @ cx.chains[p + 1].matrix
        X = _coords(cx.chains[p].matrix, image)
        out.append(np.rint(X) if np.allclose(X, np.rint(X), atol=1e-12) else X)
    return out


def coboundary_as_transpose(cx: ChainComplex) -> list[np.ndarray]:
    """``d_p: C_p^* -> C_{p+1}^*`` on the dual cochain bases, ``d_p = bd^T``."""
    return [X.T for X in chain_boundary_matrices(cx)]


def path_coboundary(cx: ChainComplex, p: int) -> np.ndarray:
    """``d`` on path functionals restricted to ``C_{p+1}``: ``(d a)(c) = a(bd c)``."""
    return cx.chains[p + 1].matrix.T @ cx.boundaries[p + 1].T


# graph operator


def graph_operator_matrix(cx: ChainComplex, p: int) -> np.ndarray:
    """Left multiplication by ``G`` on path functionals ``P_p^* -> P_{p+1}^*``.

    ``(G a)(k, i0, ..., ip) = a(i0, ..., ip)`` for every edge ``(k, i0)``.
    """
    src = cx.paths[p].index()
    dst = cx.paths[p + 1]
    M = np.zeros((len(dst), len(src)), dtype=np.int64)
    for r, path in enumerate(dst.basis):
        M[r, src[path[1:]]] = 1
    return M


def function_multiplication(cx: ChainComplex, p: int, f: np.ndarray, side: str) -> np.ndarray:
    """Multiplication of p-path functionals by a node function on the left or right."""
    basis = cx.paths[p].basis
    node = 0 if side == "left" else -1
    return np.diag([f[path[node]] for path in basis])


def cup_product(cx: ChainComplex, S: np.ndarray, p: int, T: np.ndarray, q: int) -> np.ndarray:
    """Concatenation ``(S cup T)(i0..i_{p+q}) = S(i0..ip) T(ip..i_{p+q})``.

    The result is orthogonally projected onto the span of ``C_{p+q}`` in
    path coordinates. No normalization prefactor is applied.
    """
    src_p, src_q = cx.paths[p].index(), cx.paths[q].index()
    target = cx.paths[p + q].basis
    out = np.zeros(len(target), dtype=np.result_type(S, T, float))
    for r, path in enumerate(target):
        out[r] = S[src_p[path[: p + 1]]] * T[src_q[path[p:]]]
    K = cx.chains[p + q].matrix
    if K.shape[1] == 0:
        return np.zeros_like(out)
    return K @ np.linalg.solve(K.T @ K, K.T @ out)


def same_endpoint_sum(cx: ChainComplex, i: int, j: int) -> np.ndarray:
    """Path functional ``sum_k delta_{i k j}`` on ``P_2``."""
    v = np.zeros(len(cx.paths[2]))
    for r, path in enumerate(cx.paths[2].basis):
        if path[0] == i and path[2] == j:
            v[r] = 1.0
    return v


def graph_report(g: DirectedGraph, max_grade: int = 3) -> dict:
    return {"dims": chain_dimensions(g, max_grade), **classify_edges(g)}
