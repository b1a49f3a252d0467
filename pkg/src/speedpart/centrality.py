"""Exponential time-decay node centrality and top-k hub selection."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel
from .errors import BetaOutOfRange, InvalidParams
from .graph_io import EdgeStream, _FLOOR_TOL


@dataclass(frozen=True, eq=False)
class CentralityTable:
    """Per-node centrality, indexed by node id.

    ``beta`` is ``None`` for the degree variant. ``t_max`` is on the scale the
    decay was applied to (1.0 after normalization).
    """

    cent: np.ndarray
    beta: Optional[float]
    t_max: float

    def __len__(self):
        return len(self.cent)

    def __getitem__(self, node):
        return float(self.cent[node])

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.cent > 0)


@dataclass(frozen=True, eq=False)
class HubSet:
    hubs: frozenset
    k: float
    mask: np.ndarray

    def __contains__(self, node):
        return node in self.hubs

    def __len__(self):
        return len(self.hubs)


@_accel.jit
def _decay_kernel(src, dst, ts, beta, t_max, node_count):
    cent = np.zeros(node_count, dtype=np.float64)
    for e in range(src.shape[0]):
        w = math.exp(beta * (ts[e] - t_max))
        cent[src[e]] += w
        cent[dst[e]] += w
    return cent


def _decay_numpy(src, dst, ts, beta, t_max, node_count):
    w = np.exp(beta * (ts - t_max))
    # interleave so per-node summation order matches the streaming loop
    nodes = np.column_stack((src, dst)).ravel()
    return np.bincount(nodes, weights=np.repeat(w, 2), minlength=node_count)


def normalized_times(s: EdgeStream) -> np.ndarray:
    """Rescale timestamps to [0, 1]; left unchanged when all are equal."""
    lo, hi = s.t_min, s.t_max
    if hi == lo:
        return np.array(s.ts, dtype=np.float64)
    return (s.ts - lo) / (hi - lo)


def compute_centrality(s: EdgeStream, beta: float = 0.5, normalize_ts: bool = True) -> CentralityTable:
    """Cent(i) = sum over i's incident edges of exp(beta * (t - t_max)).

    Each endpoint role contributes one term, so a self-loop adds two. With
    ``normalize_ts`` the decay runs on timestamps rescaled to [0, 1].
    """
    if not 0.0 < beta < 1.0:
        raise BetaOutOfRange(f"beta must lie in (0, 1), got {beta}")
    ts = normalized_times(s) if normalize_ts else s.ts
    t_max = float(ts.max()) if len(ts) else 0.0
    kernel = _decay_kernel if _accel.USE_JIT else _decay_numpy
    cent = kernel(s.src, s.dst, np.ascontiguousarray(ts, dtype=np.float64), beta, t_max, s.node_count)
    return CentralityTable(cent=cent, beta=beta, t_max=t_max)


def degree_centrality(s: EdgeStream) -> CentralityTable:
    """Centrality equal to node degree (the beta -> 0 limit)."""
    return CentralityTable(cent=s.degrees().astype(np.float64), beta=None, t_max=s.t_max)


def hub_count(c: CentralityTable, k: float, base: str = "active") -> int:
    if base == "active":
        n = int(np.count_nonzero(c.cent > 0))
    elif base == "all":
        n = len(c.cent)
    else:
        raise InvalidParams(f"hub base must be 'active' or 'all', got {base!r}")
    return int(math.floor(k * n + _FLOOR_TOL))


def select_hubs(c: CentralityTable, k: float, base: str = "active") -> HubSet:
    """Top floor(k * |V|) nodes by centrality, smaller id first on ties.

    ``base="active"`` counts only nodes with nonzero centrality; ``"all"``
    uses every declared node.
    """
    if not 0.0 <= k <= 1.0:
        raise InvalidParams(f"k must lie in [0, 1], got {k}")
    count = hub_count(c, k, base)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(len(c.cent)), -c.cent))
    chosen = order[:count]
    mask = np.zeros(len(c.cent), dtype=np.bool_)
    mask[chosen] = True
    mask.setflags(write=False)
    return HubSet(hubs=frozenset(int(i) for i in chosen), k=k, mask=mask)


def hubs_from_nodes(nodes, node_count: int, k: float = float("nan")) -> HubSet:
    """Build a HubSet from an explicit node list (tests, baselines)."""
    mask = np.zeros(node_count, dtype=np.bool_)
    nodes = [int(n) for n in nodes]
    mask[nodes] = True
    mask.setflags(write=False)
    return HubSet(hubs=frozenset(nodes), k=k, mask=mask)
