"""Streaming edge partitioning with hub-restricted replication.

Each edge is placed in one partition (or discarded) in a single pass. Only hub
nodes may end up in more than one partition; every other node keeps a single
home partition for its whole life. Placement follows the greedy score

    C(i, j, p) = h(i, p) + h(j, p) + lam * (maxsize - |p|) / (eps + maxsize - minsize)

with h(x, p) = 2 - theta(x) when x already lives in p and 0 otherwise, where
theta(i) = Cent(i) / (Cent(i) + Cent(j)).
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .centrality import (CentralityTable, HubSet, compute_centrality, degree_centrality,
                         hubs_from_nodes, select_hubs)
from .errors import InvalidParams, UnsortedStream
from .graph_io import ChronoSplit, EdgeStream

DISCARDED = -1

# per-edge dispatch codes recorded in PartitionAssignment.cases
CASE_ONE_HUB = 1
CASE_BOTH_HUBS = 2
CASE_NO_HUB = 3
CASE_BOTH_NEW = 4
CASE_ONE_NEW = 5


@dataclass(frozen=True, eq=False)
class PartitionerConfig:
    num_parts: int
    hub_set: HubSet
    centrality: CentralityTable
    lam: float = 1.0
    epsilon: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.num_parts < 1:
            raise InvalidParams(f"num_parts must be >= 1, got {self.num_parts}")
        if not self.lam > 0 or not self.epsilon > 0:
            raise InvalidParams(f"lambda and epsilon must be > 0, got {self.lam}, {self.epsilon}")


@dataclass
class PartitionState:
    """Mutable streaming state: edge counts per partition and A(i) sets."""

    sizes: np.ndarray
    assigned: np.ndarray

    @classmethod
    def empty(cls, node_count: int, num_parts: int) -> "PartitionState":
        return cls(np.zeros(num_parts, dtype=np.int64),
                   np.zeros((node_count, num_parts), dtype=np.bool_))

    @property
    def maxsize(self) -> int:
        return int(self.sizes.max())

    @property
    def minsize(self) -> int:
        return int(self.sizes.min())

    def parts_of(self, node) -> set:
        return set(np.flatnonzero(self.assigned[node]).tolist())


@dataclass(frozen=True, eq=False)
class PartitionAssignment:
    """Result of one partitioning pass.

    ``edge_part[e]`` is the partition of edge ``e`` or ``DISCARDED``.
    ``a_sets`` is A(i) as built during streaming; ``node_parts`` is the final
    membership where every shared node belongs to all partitions.
    """

    edge_part: np.ndarray
    a_sets: np.ndarray
    node_parts: np.ndarray
    shared: np.ndarray
    num_parts: int
    cases: np.ndarray
    hub_mask: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def discard_count(self) -> int:
        return int(np.count_nonzero(self.edge_part == DISCARDED))

    @property
    def node_count(self) -> int:
        return self.node_parts.shape[0]

    def parts_of(self, node) -> set:
        return set(np.flatnonzero(self.node_parts[node]).tolist())

    def a_set(self, node) -> set:
        return set(np.flatnonzero(self.a_sets[node]).tolist())

    def edge_sizes(self) -> np.ndarray:
        kept = self.edge_part[self.edge_part != DISCARDED]
        return np.bincount(kept, minlength=self.num_parts)

    def node_sizes(self) -> np.ndarray:
        return self.node_parts.sum(axis=0).astype(np.int64)

    def partition_nodes(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.node_parts[:, p])

    def to_json(self) -> dict:
        node_parts = {}
        for node in np.flatnonzero(self.node_parts.any(axis=1)).tolist():
            node_parts[str(node)] = np.flatnonzero(self.node_parts[node]).tolist()
        return {
            "config": self.config,
            "edge_part": self.edge_part.tolist(),
            "node_parts": node_parts,
            "shared": self.shared.tolist(),
            "discards": self.discard_count,
        }

    @classmethod
    def from_json(cls, doc: dict, node_count: Optional[int] = None) -> "PartitionAssignment":
        """Rebuild from :meth:`to_json` output. A-sets and cases are not stored;
        ``a_sets`` is reconstructed as ``node_parts`` and ``cases`` as zeros."""
        config = doc.get("config", {})
        num_parts = int(config.get("parts", 0)) or 1
        ids = [int(n) for n in doc["node_parts"]]
        for parts in doc["node_parts"].values():
            if parts:
                num_parts = max(num_parts, max(parts) + 1)
        n = max([node_count or 0, (max(ids) + 1) if ids else 0])
        node_parts = np.zeros((n, num_parts), dtype=np.bool_)
        for node, parts in doc["node_parts"].items():
            node_parts[int(node), parts] = True
        edge_part = np.asarray(doc["edge_part"], dtype=np.int64)
        shared = np.asarray(sorted(int(x) for x in doc["shared"]), dtype=np.int64)
        hub_mask = np.zeros(n, dtype=np.bool_)
        hub_mask[shared] = True
        return cls(edge_part=edge_part, a_sets=node_parts.copy(), node_parts=node_parts,
                   shared=shared, num_parts=num_parts,
                   cases=np.zeros(len(edge_part), dtype=np.int8), hub_mask=hub_mask,
                   config=config)


@_accel.jit
def _theta(ci, cj):
    tot = ci + cj
    if tot == 0.0:
        return 0.5, 0.5
    return ci / tot, cj / tot


@_accel.jit
def _score(i, j, p, th_i, th_j, assigned, sizes, lam, eps):
    maxs = sizes.max()
    mins = sizes.min()
    rep = 0.0
    if assigned[i, p]:
        rep += 1.0 + (1.0 - th_i)
    if assigned[j, p]:
        rep += 1.0 + (1.0 - th_j)
    return rep + lam * (maxs - sizes[p]) / (eps + maxs - mins)


@_accel.jit
def _best_partition(i, j, th_i, th_j, assigned, sizes, lam, eps, order):
    best = -1
    best_score = -np.inf
    for q in range(order.shape[0]):
        p = order[q]
        sc = _score(i, j, p, th_i, th_j, assigned, sizes, lam, eps)
        if sc > best_score:
            best_score = sc
            best = p
    return best


@_accel.jit
def _place(x, p, is_hub, assigned, n_assigned, home):
    if assigned[x, p]:
        return
    if n_assigned[x] > 0 and not is_hub[x]:
        # unreachable by construction of the dispatch
        raise RuntimeError("non-hub node would gain a second partition")
    assigned[x, p] = True
    n_assigned[x] += 1
    if home[x] < 0:
        home[x] = p


@_accel.jit
def _sep_kernel(src, dst, cent, is_hub, num_parts, lam, eps, order):
    n_edges = src.shape[0]
    node_count = cent.shape[0]
    edge_part = np.full(n_edges, -1, dtype=np.int64)
    cases = np.zeros(n_edges, dtype=np.int8)
    assigned = np.zeros((node_count, num_parts), dtype=np.bool_)
    n_assigned = np.zeros(node_count, dtype=np.int64)
    home = np.full(node_count, -1, dtype=np.int64)
    sizes = np.zeros(num_parts, dtype=np.int64)
    for e in range(n_edges):
        i = src[e]
        j = dst[e]
        ai = n_assigned[i] > 0
        aj = n_assigned[j] > 0
        hi = is_hub[i]
        hj = is_hub[j]
        th_i, th_j = _theta(cent[i], cent[j])
        p = -1
        if ai and aj:
            if hi and hj:
                cases[e] = 2
                p = _best_partition(i, j, th_i, th_j, assigned, sizes, lam, eps, order)
            elif hi:
                cases[e] = 1
                p = home[j]
            elif hj:
                cases[e] = 1
                p = home[i]
            else:
                cases[e] = 3
                if home[i] == home[j]:
                    p = home[i]
        else:
            if ai or aj:
                cases[e] = 5
            else:
                cases[e] = 4
            if ai and not hi:
                p = home[i]
            elif aj and not hj:
                p = home[j]
            else:
                p = _best_partition(i, j, th_i, th_j, assigned, sizes, lam, eps, order)
        if p < 0:
            continue
        edge_part[e] = p
        sizes[p] += 1
        _place(i, p, is_hub, assigned, n_assigned, home)
        _place(j, p, is_hub, assigned, n_assigned, home)
    return edge_part, cases, assigned, sizes


@_accel.jit
def _random_kernel(src, dst, draws, node_count, num_parts):
    n_edges = src.shape[0]
    edge_part = np.full(n_edges, -1, dtype=np.int64)
    home = np.full(node_count, -1, dtype=np.int64)
    for e in range(n_edges):
        i = src[e]
        j = dst[e]
        if home[i] < 0 and home[j] < 0:
            home[i] = draws[e]
            home[j] = draws[e]
        elif home[i] < 0:
            home[i] = draws[e]
        elif home[j] < 0:
            home[j] = draws[e]
        if home[i] == home[j]:
            edge_part[e] = home[i]
    return edge_part, home


def score(i: int, j: int, p: int, st: PartitionState, cfg: PartitionerConfig) -> float:
    """Greedy placement score of edge (i, j) in partition ``p``.

    theta is taken as 0.5 for both endpoints when their centralities sum to 0.
    """
    if not 0 <= p < cfg.num_parts:
        raise InvalidParams(f"partition {p} out of range for {cfg.num_parts} parts")
    cent = cfg.centrality.cent
    th_i, th_j = _theta(float(cent[i]), float(cent[j]))
    return float(_score(i, j, p, th_i, th_j, st.assigned, st.sizes, float(cfg.lam), float(cfg.epsilon)))


def make_config(s: EdgeStream, num_parts: int, k: float = 0.05, beta: float = 0.5,
                lam: float = 1.0, epsilon: float = 1.0, centrality: str = "decay",
                normalize_ts: bool = True, hub_base: str = "active") -> PartitionerConfig:
    """Centrality table, hub set and scoring parameters for ``s``."""
    if centrality == "decay":
        table = compute_centrality(s, beta=beta, normalize_ts=normalize_ts)
    elif centrality == "degree":
        table = degree_centrality(s)
    else:
        raise InvalidParams(f"unknown centrality {centrality!r}")
    hubs = select_hubs(table, k, base=hub_base)
    meta = {"k": k, "beta": beta if centrality == "decay" else None, "centrality": centrality,
            "normalize_ts": normalize_ts, "hub_base": hub_base}
    return PartitionerConfig(num_parts=num_parts, hub_set=hubs, centrality=table,
                             lam=lam, epsilon=epsilon, meta=meta)


def _check_sorted(s: EdgeStream):
    if not s.is_sorted():
        raise UnsortedStream("edge stream must be sorted by timestamp")


def _finish(s, edge_part, cases, a_sets, num_parts, hub_mask, config):
    counts = a_sets.sum(axis=1)
    shared = np.flatnonzero(counts > 1).astype(np.int64)
    node_parts = a_sets.copy()
    node_parts[shared] = True
    for arr in (edge_part, cases, a_sets, node_parts, shared):
        arr.setflags(write=False)
    return PartitionAssignment(edge_part=edge_part, a_sets=a_sets, node_parts=node_parts,
                               shared=shared, num_parts=num_parts, cases=cases,
                               hub_mask=hub_mask, config=config)


def _run_sep(s: EdgeStream, cfg: PartitionerConfig, hub_mask: np.ndarray, mode: str,
             tie_order=None, **extra) -> PartitionAssignment:
    _check_sorted(s)
    if len(cfg.centrality.cent) != s.node_count or len(hub_mask) != s.node_count:
        raise InvalidParams("centrality/hub tables must cover the stream's node_count")
    order = (np.arange(cfg.num_parts, dtype=np.int64) if tie_order is None
             else np.asarray(tie_order, dtype=np.int64))
    edge_part, cases, assigned, _ = _sep_kernel(
        s.src, s.dst, np.ascontiguousarray(cfg.centrality.cent, dtype=np.float64),
        np.ascontiguousarray(hub_mask, dtype=np.bool_), int(cfg.num_parts),
        float(cfg.lam), float(cfg.epsilon), order)
    config = {"mode": mode, "parts": cfg.num_parts, "lambda": cfg.lam, "epsilon": cfg.epsilon,
              "hubs": int(hub_mask.sum()), **cfg.meta, **extra}
    return _finish(s, edge_part, cases, assigned, cfg.num_parts, hub_mask.copy(), config)


def partition_stream(s: EdgeStream, cfg: PartitionerConfig, tie_order=None) -> PartitionAssignment:
    """One chronological pass assigning each edge to a partition or discarding it.

    With both endpoints already placed: an edge between a hub and a non-hub
    follows the non-hub's home partition; an edge between two hubs goes to the
    best-scoring partition; an edge between two non-hubs is kept only when
    they share a home, and discarded otherwise. When an endpoint is still
    unplaced the edge goes to the best-scoring partition, except that a placed
    non-hub pins the edge to its own home.

    ``tie_order`` sets the scan order used to break score ties (default:
    lowest partition id first).
    """
    return _run_sep(s, cfg, np.asarray(cfg.hub_set.mask), "sep", tie_order)


def partition_unrestricted(s: EdgeStream, cfg: PartitionerConfig) -> PartitionAssignment:
    """Same pass with every active node treated as a hub; never discards."""
    active = np.zeros(s.node_count, dtype=np.bool_)
    active[s.src] = True
    active[s.dst] = True
    return _run_sep(s, cfg, active, "unrestricted", k=1.0)


def partition_random(s: EdgeStream, num_parts: int, seed: int) -> PartitionAssignment:
    """Random baseline: a node joins a uniformly drawn partition on first sight.

    An edge whose endpoints are both new shares one draw. An edge is kept
    when its endpoints end up in the same partition and discarded otherwise.
    """
    _check_sorted(s)
    if num_parts < 1:
        raise InvalidParams(f"num_parts must be >= 1, got {num_parts}")
    draws = np.random.default_rng(seed).integers(0, num_parts, size=len(s), dtype=np.int64)
    edge_part, home = _random_kernel(s.src, s.dst, draws, s.node_count, num_parts)
    a_sets = np.zeros((s.node_count, num_parts), dtype=np.bool_)
    placed = np.flatnonzero(home >= 0)
    a_sets[placed, home[placed]] = True
    cases = np.zeros(len(s), dtype=np.int8)
    config = {"mode": "random", "parts": num_parts, "seed": seed, "k": 0.0, "hubs": 0}
    return _finish(s, edge_part, cases, a_sets, num_parts,
                   np.zeros(s.node_count, dtype=np.bool_), config)


@dataclass(frozen=True)
class EvalRouting:
    """Validation/test edge indices routed to each partition."""

    val: list
    test: list
    unroutable: dict


def _route(stream: EdgeStream, pa: PartitionAssignment):
    n = pa.node_count
    src, dst = stream.src, stream.dst
    known = (src < n) & (dst < n)
    both = np.zeros((len(stream), pa.num_parts), dtype=np.bool_)
    idx = np.flatnonzero(known)
    both[idx] = pa.node_parts[src[idx]] & pa.node_parts[dst[idx]]
    routed = [np.flatnonzero(both[:, p]) for p in range(pa.num_parts)]
    unroutable = int(np.count_nonzero(~both.any(axis=1)))
    return routed, unroutable


def assign_eval_edges(split: ChronoSplit, pa: PartitionAssignment) -> EvalRouting:
    """Send each val/test edge to every partition holding both endpoints.

    Edges with an endpoint outside every partition, or whose endpoints never
    share one, are counted as unroutable.
    """
    val, val_bad = _route(split.val, pa)
    test, test_bad = _route(split.test, pa)
    return EvalRouting(val=val, test=test, unroutable={"val": val_bad, "test": test_bad})


def explicit_config(s: EdgeStream, num_parts: int, hubs, lam: float = 1.0, epsilon: float = 1.0,
                    beta: float = 0.5, normalize_ts: bool = True) -> PartitionerConfig:
    """Config with a caller-chosen hub list and decay centrality."""
    table = compute_centrality(s, beta=beta, normalize_ts=normalize_ts)
    hub_set = hubs_from_nodes(hubs, s.node_count)
    return PartitionerConfig(num_parts=num_parts, hub_set=hub_set, centrality=table,
                             lam=lam, epsilon=epsilon,
                             meta={"beta": beta, "centrality": "decay", "normalize_ts": normalize_ts})
