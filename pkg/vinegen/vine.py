"""Regular vines: structure selection, sequential fitting, density and sampling.

Variables are numbered from 0. Tree ``m`` (1-based level) holds ``d - m``
edges; an edge of the first tree joins two variables, an edge of a higher
tree joins two edges of the tree below it. Conditional pseudo-observations
are kept in a dictionary keyed by ``(variable, conditioning set)``.
"""

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from vinegen.bicop import (
    GRID_SIZE,
    INDEPENDENCE,
    PDF_FLOOR,
    BicopFamily,
    BivariateCopula,
    fit_bicop,
)
from vinegen.concordance import kendall_tau
from vinegen.errors import BundleFormatError, DomainError, StructureError
from vinegen.marginals import PIT_EPS
from vinegen.workers import ordered_map

__all__ = [
    "RVineStructure",
    "StructureReport",
    "VineEdge",
    "VineModel",
    "default_trunc_level",
    "fit_vine",
    "kendall_tau",
    "select_structure",
    "validate_structure",
]

MAX_DEFAULT_TRUNC = 5
_NO_CONDITIONING: frozenset[int] = frozenset()
# (variable, conditioning set) -> pseudo-observations of that variable given the set
Pseudo = Dict[tuple[int, frozenset[int]], np.ndarray]


@dataclass(frozen=True)
class VineEdge:
    nodes: tuple[int, int]
    conditioned: tuple[int, int]
    conditioning: tuple[int, ...] = ()

    @property
    def full(self) -> frozenset[int]:
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    @property
    def given(self) -> frozenset[int]:
        return frozenset(self.conditioning)

    def label(self) -> str:
        j, k = self.conditioned
        if not self.conditioning:
            return f"{j}-{k}"
        return f"{j}-{k}|{','.join(str(c) for c in self.conditioning)}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "conditioned": list(self.conditioned),
            "conditioning": list(self.conditioning),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "VineEdge":
        return cls(
            nodes=tuple(int(i) for i in payload["nodes"]),
            conditioned=tuple(int(i) for i in payload["conditioned"]),
            conditioning=tuple(int(i) for i in payload["conditioning"]),
        )


def _first_tree_edge(j: int, k: int) -> VineEdge:
    a, b = sorted((j, k))
    return VineEdge(nodes=(a, b), conditioned=(a, b))


def _join(lower: Sequence[VineEdge], a: int, b: int) -> VineEdge:
    """Edge joining lower-tree edges ``a`` and ``b``; the shared part is conditioned on."""
    full_a, full_b = lower[a].full, lower[b].full
    conditioned = sorted(full_a ^ full_b)
    if len(conditioned) != 2:
        raise StructureError(
            f"Edges {lower[a].label()} and {lower[b].label()} cannot be joined"
        )
    return VineEdge(
        nodes=(min(a, b), max(a, b)),
        conditioned=(conditioned[0], conditioned[1]),
        conditioning=tuple(sorted(full_a & full_b)),
    )


@dataclass(frozen=True)
class RVineStructure:
    d: int
    trees: tuple[tuple[VineEdge, ...], ...]

    @classmethod
    def from_sets(
        cls, d: int, trees: Sequence[Sequence[tuple[int, int, Sequence[int]]]]
    ) -> "RVineStructure":
        built: List[tuple[VineEdge, ...]] = []
        for level, triples in enumerate(trees, start=1):
            edges = []
            for j, k, given in triples:
                conditioned = tuple(sorted((int(j), int(k))))
                conditioning = tuple(sorted(int(g) for g in given))
                if level == 1:
                    nodes = conditioned
                else:
                    lower = built[-1]
                    base = frozenset(conditioning)
                    nodes = tuple(
                        sorted(
                            _find_edge(lower, base | {v}, level - 1)
                            for v in conditioned
                        )
                    )
                edges.append(
                    VineEdge(nodes=nodes, conditioned=conditioned, conditioning=conditioning)
                )
            built.append(tuple(edges))
        return cls(d=d, trees=tuple(built))

    @property
    def edge_count(self) -> int:
        return sum(len(tree) for tree in self.trees)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "trees": [[edge.to_dict() for edge in tree] for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RVineStructure":
        return cls(
            d=int(payload["d"]),
            trees=tuple(
                tuple(VineEdge.from_dict(edge) for edge in tree)
                for tree in payload["trees"]
            ),
        )


def _find_edge(tree: Sequence[VineEdge], full: frozenset[int], level: int) -> int:
    for idx, edge in enumerate(tree):
        if edge.full == full:
            return idx
    raise StructureError(
        f"No edge over {sorted(full)} in tree {level}; proximity condition violated"
    )


@dataclass(frozen=True)
class StructureReport:
    ok: bool
    tree: Optional[int] = None
    edge: Optional[int] = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


class _DisjointSet:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, item: int) -> int:
        while self.parent[item] != item:
            self.parent[item] = self.parent[self.parent[item]]
            item = self.parent[item]
        return item

    def union(self, a: int, b: int) -> bool:
        root_a, root_b = self.find(a), self.find(b)
        if root_a == root_b:
            return False
        self.parent[root_b] = root_a
        return True


def validate_structure(s: RVineStructure) -> StructureReport:
    """Check node sets, tree-ness and proximity; report the first violation.

    Trees are reported by level (1-based), edges by position in their tree.
    """
    if s.d < 2:
        return StructureReport(False, message=f"dimension must be at least 2, got {s.d}")
    if len(s.trees) != s.d - 1:
        return StructureReport(
            False, message=f"expected {s.d - 1} trees, found {len(s.trees)}"
        )
    for level, tree in enumerate(s.trees, start=1):
        lower = s.trees[level - 2] if level > 1 else None
        node_count = s.d if lower is None else len(lower)
        forest = _DisjointSet(node_count)
        for idx, edge in enumerate(tree):
            a, b = edge.nodes
            if not (0 <= a < node_count and 0 <= b < node_count) or a == b:
                return StructureReport(
                    False, level, idx, f"edge joins invalid nodes {edge.nodes}"
                )
            if not forest.union(a, b):
                return StructureReport(
                    False, level, idx, f"edge {edge.label()} closes a cycle"
                )
        if len(tree) != s.d - level:
            return StructureReport(
                False,
                level,
                None,
                f"tree has {len(tree)} edges, expected {s.d - level}",
            )
        for idx, edge in enumerate(tree):
            if lower is None:
                expected = _first_tree_edge(*edge.nodes)
            else:
                a, b = edge.nodes
                if not set(lower[a].nodes) & set(lower[b].nodes):
                    return StructureReport(
                        False,
                        level,
                        idx,
                        f"proximity violated: {lower[a].label()} and "
                        f"{lower[b].label()} share no node",
                    )
                expected = _join(lower, a, b)
            if (
                tuple(sorted(edge.conditioned)) != expected.conditioned
                or tuple(sorted(edge.conditioning)) != expected.conditioning
                or len(edge.conditioning) != level - 1
                or set(edge.conditioned) & set(edge.conditioning)
            ):
                return StructureReport(
                    False,
                    level,
                    idx,
                    f"edge {edge.label()} inconsistent with its nodes "
                    f"(expected {expected.label()})",
                )
    return StructureReport(True)


def _maximum_spanning_tree(
    node_count: int, candidates: Sequence[VineEdge], weights: Sequence[float]
) -> List[int]:
    """Prim's algorithm; ties go to the lexicographically smallest node pair."""
    in_tree = {0}
    chosen: List[int] = []
    while len(in_tree) < node_count:
        best: Optional[tuple[tuple[float, int, int], int]] = None
        for idx, edge in enumerate(candidates):
            a, b = edge.nodes
            if (a in in_tree) == (b in in_tree):
                continue
            key = (-weights[idx], a, b)
            if best is None or key < best[0]:
                best = (key, idx)
        if best is None:
            raise StructureError("Candidate graph is disconnected")
        chosen.append(best[1])
        in_tree.update(candidates[best[1]].nodes)
    return chosen


def _inputs(cond: Pseudo, edge: VineEdge) -> tuple[np.ndarray, np.ndarray]:
    j, k = edge.conditioned
    given = edge.given
    return cond[(j, given)], cond[(k, given)]


def _emit(cond: Pseudo, edge: VineEdge, copula: BivariateCopula) -> None:
    """Store u_{j|D+k} and u_{k|D+j} computed with the edge's h-functions."""
    j, k = edge.conditioned
    x_j, x_k = _inputs(cond, edge)
    given = edge.given
    cond[(j, given | {k})] = np.clip(copula.hfunc(x_j, x_k, which=2), PIT_EPS, 1.0 - PIT_EPS)
    cond[(k, given | {j})] = np.clip(copula.hfunc(x_k, x_j, which=1), PIT_EPS, 1.0 - PIT_EPS)


def _check_unit_matrix(u: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise DomainError(f"Expected an (n, d) array, got shape {u.shape}")
    if d is not None and u.shape[1] != d:
        raise DomainError(f"Expected {d} columns, got {u.shape[1]}")
    if not np.all((u > 0.0) & (u < 1.0)):
        raise DomainError("Copula data must lie strictly inside the unit cube")
    return u


def default_trunc_level(d: int) -> int:
    return max(1, min(MAX_DEFAULT_TRUNC, d - 1))


@dataclass(frozen=True, eq=False)
class VineModel:
    structure: RVineStructure
    copulas: tuple[tuple[BivariateCopula, ...], ...]
    trunc_level: int

    @property
    def d(self) -> int:
        return self.structure.d

    def _pairs(self, level: int):
        return zip(self.structure.trees[level - 1], self.copulas[level - 1])

    @cached_property
    def sampling_plan(self) -> List[tuple[int, List[tuple[int, int]]]]:
        """Sampling order with, per variable, its chain of (level, edge index).

        Variables are peeled off the top tree one at a time: a variable in
        the conditioned set of the single top edge is removed together with
        the chain of edges leading down to the first tree, leaving a vine on
        one variable fewer. Sampling runs in the reverse peel order.
        """
        trees = self.structure.trees
        d = self.d
        alive = [set(range(len(tree))) for tree in trees]
        peeled: List[tuple[int, List[tuple[int, int]]]] = []
        for step in range(d - 1):
            top = d - 1 - step
            if len(alive[top - 1]) != 1:
                raise StructureError(f"Tree {top} does not reduce to a single edge")
            top_idx = next(iter(alive[top - 1]))
            current = trees[top - 1][top_idx]
            var = current.conditioned[1]
            chain = [(top, top_idx)]
            for level in range(top - 1, 0, -1):
                parents = [
                    p for p in current.nodes if var in trees[level - 1][p].conditioned
                ]
                if len(parents) != 1 or parents[0] not in alive[level - 1]:
                    raise StructureError(
                        f"Variable {var} has no unique chain through tree {level}"
                    )
                chain.append((level, parents[0]))
                current = trees[level - 1][parents[0]]
            for level, idx in chain:
                alive[level - 1].discard(idx)
            peeled.append((var, chain[::-1]))
        (first,) = set(range(d)) - {var for var, _ in peeled}
        return [(first, [])] + peeled[::-1]

    def _propagate(self, u: np.ndarray, levels: int) -> Pseudo:
        cond = {(v, _NO_CONDITIONING): u[:, v] for v in range(self.d)}
        for level in range(1, levels + 1):
            for edge, copula in self._pairs(level):
                _emit(cond, edge, copula)
        return cond

    def log_density(self, u: np.ndarray) -> np.ndarray | float:
        single = np.ndim(u) == 1
        u = _check_unit_matrix(np.atleast_2d(u), self.d)
        total = np.zeros(u.shape[0])
        cond = {(v, _NO_CONDITIONING): u[:, v] for v in range(self.d)}
        for level in range(1, self.trunc_level + 1):
            for edge, copula in self._pairs(level):
                if not copula.is_independence:
                    x_j, x_k = _inputs(cond, edge)
                    total += np.log(np.maximum(copula.pdf(x_j, x_k), PDF_FLOOR))
                if level < self.trunc_level:
                    _emit(cond, edge, copula)
        return float(total[0]) if single else total

    def loglik(self, u: np.ndarray) -> float:
        return float(np.sum(self.log_density(u)))

    def rosenblatt_residuals(self, u: np.ndarray) -> np.ndarray:
        """Forward Rosenblatt transform; rows drawn from the model map to iid uniforms."""
        u = _check_unit_matrix(u, self.d)
        cond = self._propagate(u, self.trunc_level - 1)
        w = np.empty_like(u)
        trees = self.structure.trees
        for var, chain in self.sampling_plan:
            p = u[:, var]
            for level, idx in chain:
                if level > self.trunc_level:
                    break
                edge = trees[level - 1][idx]
                copula = self.copulas[level - 1][idx]
                if copula.is_independence:
                    continue
                partner, which = _partner(edge, var)
                p = np.clip(
                    copula.hfunc(p, cond[(partner, edge.given)], which),
                    PIT_EPS,
                    1.0 - PIT_EPS,
                )
            w[:, var] = p
        return w

    def inverse_rosenblatt(self, w: np.ndarray) -> np.ndarray:
        w = _check_unit_matrix(w, self.d)
        u = np.empty_like(w)
        cond: Pseudo = {}
        trees = self.structure.trees
        for var, chain in self.sampling_plan:
            p = w[:, var]
            for level, idx in reversed(chain):
                if level > self.trunc_level:
                    continue
                edge = trees[level - 1][idx]
                copula = self.copulas[level - 1][idx]
                if not copula.is_independence:
                    partner, which = _partner(edge, var)
                    p = np.clip(
                        copula.hinv(p, cond[(partner, edge.given)], which),
                        PIT_EPS,
                        1.0 - PIT_EPS,
                    )
                cond[(var, edge.given)] = p
            u[:, var] = p
            cond[(var, _NO_CONDITIONING)] = p
            self._emit_available(cond)
        return u

    def _emit_available(self, cond: Pseudo) -> None:
        for level in range(1, self.trunc_level):
            for edge, copula in self._pairs(level):
                j, k = edge.conditioned
                given = edge.given
                if (j, given | {k}) in cond and (k, given | {j}) in cond:
                    continue
                if (j, given) in cond and (k, given) in cond:
                    _emit(cond, edge, copula)

    def sample(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        started = time.perf_counter()
        rng = np.random.default_rng(seed)
        w = np.clip(rng.random((n, self.d)), PIT_EPS, 1.0 - PIT_EPS)
        u = self.inverse_rosenblatt(w) if n else np.empty((0, self.d))
        logging.debug(
            "Sampled %s rows from %s-dimensional vine (trunc=%s) in %.3fs",
            n,
            self.d,
            self.trunc_level,
            time.perf_counter() - started,
        )
        return u

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "trunc_level": self.trunc_level,
            "structure": self.structure.to_dict(),
            "copulas": [[c.to_dict() for c in level] for level in self.copulas],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "VineModel":
        try:
            structure = RVineStructure.from_dict(payload["structure"])
            copulas = tuple(
                tuple(BivariateCopula.from_dict(c) for c in level)
                for level in payload["copulas"]
            )
            trunc = int(payload["trunc_level"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"Invalid vine payload: {exc}") from exc
        report = validate_structure(structure)
        if not report:
            raise BundleFormatError(f"Invalid vine structure: {report.message}")
        if [len(t) for t in structure.trees] != [len(level) for level in copulas]:
            raise BundleFormatError("Vine payload has a copula count mismatch")
        return cls(structure=structure, copulas=copulas, trunc_level=trunc)


def _partner(edge: VineEdge, var: int) -> tuple[int, int]:
    j, k = edge.conditioned
    if var == j:
        return k, 2
    return j, 1


def fit_vine(
    u: np.ndarray,
    family: BicopFamily | str = BicopFamily.TLL,
    trunc_level: Optional[int] = None,
    grid_size: int = GRID_SIZE,
    bandwidth_mult: float = 1.0,
    threads: int = 1,
) -> VineModel:
    """Select and fit a regular vine tree by tree.

    Each tree is the maximum spanning tree of |Kendall's tau| over the edges
    allowed by the proximity condition, computed on pseudo-observations of
    the trees already fitted. Trees above the truncation level get
    independence copulas and are chosen with zero weights.
    """
    u = _check_unit_matrix(u)
    n, d = u.shape
    if d < 2:
        raise DomainError(f"A vine needs at least 2 variables, got {d}")
    trunc = default_trunc_level(d) if trunc_level is None else int(trunc_level)
    if not 1 <= trunc <= d - 1:
        raise DomainError(f"Truncation level must be in [1, {d - 1}], got {trunc}")
    family = BicopFamily.parse(family)
    started = time.perf_counter()

    cond = {(v, _NO_CONDITIONING): u[:, v] for v in range(d)}
    trees: List[tuple[VineEdge, ...]] = []
    copulas: List[tuple[BivariateCopula, ...]] = []
    for level in range(1, d):
        if level == 1:
            candidates = [_first_tree_edge(j, k) for j, k in combinations(range(d), 2)]
        else:
            lower = trees[-1]
            candidates = [
                _join(lower, a, b)
                for a, b in combinations(range(len(lower)), 2)
                if set(lower[a].nodes) & set(lower[b].nodes)
            ]
        fitted = level <= trunc
        if fitted:
            weights = ordered_map(
                lambda edge: abs(kendall_tau(*_inputs(cond, edge))), candidates, threads
            )
        else:
            weights = [0.0] * len(candidates)
        chosen = _maximum_spanning_tree(d - level + 1, candidates, weights)
        edges = tuple(sorted((candidates[i] for i in chosen), key=lambda e: e.nodes))
        if fitted:
            level_copulas = tuple(
                ordered_map(
                    lambda edge: fit_bicop(
                        np.column_stack(_inputs(cond, edge)),
                        family,
                        grid_size,
                        bandwidth_mult,
                    ),
                    edges,
                    threads,
                )
            )
            if level < trunc:
                for edge, copula in zip(edges, level_copulas):
                    _emit(cond, edge, copula)
            logging.debug(
                "Tree %s: %s",
                level,
                ", ".join(f"{e.label()} {c!r}" for e, c in zip(edges, level_copulas)),
            )
        else:
            level_copulas = tuple(INDEPENDENCE for _ in edges)
        trees.append(edges)
        copulas.append(level_copulas)

    model = VineModel(
        structure=RVineStructure(d=d, trees=tuple(trees)),
        copulas=tuple(copulas),
        trunc_level=trunc,
    )
    logging.info(
        "Fitted %s vine on n=%s d=%s trunc=%s in %.2fs",
        family.value,
        n,
        d,
        trunc,
        time.perf_counter() - started,
    )
    return model


def select_structure(
    u: np.ndarray,
    family: BicopFamily | str = BicopFamily.TLL,
    threads: int = 1,
) -> RVineStructure:
    u = _check_unit_matrix(u)
    return fit_vine(u, family, trunc_level=u.shape[1] - 1, threads=threads).structure
