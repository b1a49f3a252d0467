"""Deterministic multi-worker simulation of partitioned memory-based training.

Each worker owns one induced sub-graph and a node memory store. Workers advance
in lockstep, one mini-batch per global step; a worker that runs out of batches
resets its memory and starts another traversal, backing its memory up at the
end of every traversal. The epoch ends once every worker has completed a full
traversal, memories are rolled back to their latest backup, and shared nodes
are reconciled across workers.

Learned message and update functions are replaced by a fixed, seeded surrogate
so every run is exactly reproducible.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _accel
from .errors import IndivisibleParts, InvalidParams, NonChronological
from .graph_io import EdgeStream
from .partitioner import PartitionAssignment

MAX_TIMESTAMP = "max_timestamp"
AVERAGE = "average"
_STRATEGY_ALIASES = {"max_timestamp": MAX_TIMESTAMP, "max-ts": MAX_TIMESTAMP,
                     "average": AVERAGE, "avg": AVERAGE}

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def sync_strategy(name: str) -> str:
    try:
        return _STRATEGY_ALIASES[name]
    except KeyError:
        raise InvalidParams(f"unknown sync strategy {name!r}") from None


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """Fixed message/update parameters.

    message(x, y, dt) = tanh(W @ [s_x, s_y, cos(omega * dt)])
    update(s_x, m)    = (1 - gamma) * s_x + gamma * m
    """

    W: np.ndarray
    omega: np.ndarray
    gamma: float

    @classmethod
    def from_seed(cls, d: int, seed: int, gamma: float = 0.5) -> "SurrogateModel":
        if d < 1:
            raise InvalidParams(f"memory dimension must be >= 1, got {d}")
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((d, 3 * d)) / math.sqrt(3 * d)
        # log-spaced frequencies spanning 1 .. 1e-4, jittered by the seed
        exponents = np.sort(rng.uniform(0.0, 4.0, size=d))
        omega = 10.0 ** (-exponents)
        return cls(W=np.ascontiguousarray(W), omega=np.ascontiguousarray(omega), gamma=float(gamma))

    @property
    def d(self) -> int:
        return self.W.shape[0]


@dataclass(eq=False)
class MemoryStore:
    """Node memory of one worker.

    Dense over ``node_count`` ids; ``present`` marks the worker's own nodes.
    Rows of absent nodes stay zero and are excluded from the digest.
    """

    state: np.ndarray
    last_ts: np.ndarray
    present: np.ndarray

    @classmethod
    def zeros(cls, node_count: int, d: int, present=None) -> "MemoryStore":
        if present is None:
            present = np.ones(node_count, dtype=np.bool_)
        return cls(np.zeros((node_count, d), dtype=np.float64),
                   np.zeros(node_count, dtype=np.float64),
                   np.asarray(present, dtype=np.bool_).copy())

    @property
    def d(self) -> int:
        return self.state.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return np.flatnonzero(self.present)

    def copy(self) -> "MemoryStore":
        return MemoryStore(self.state.copy(), self.last_ts.copy(), self.present.copy())

    def load(self, other: "MemoryStore") -> None:
        self.state[...] = other.state
        self.last_ts[...] = other.last_ts
        self.present[...] = other.present

    def reset(self) -> None:
        self.state[...] = 0.0
        self.last_ts[...] = 0.0

    def byte_image(self) -> bytes:
        nodes = self.nodes
        return (np.ascontiguousarray(self.state[nodes], dtype="<f8").tobytes()
                + np.ascontiguousarray(self.last_ts[nodes], dtype="<f8").tobytes())

    def digest(self) -> str:
        return f"{fnv1a64(self.byte_image()):016x}"


@_accel.jit
def _fnv1a_kernel(data):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for k in range(data.shape[0]):
        h = (h ^ np.uint64(data[k])) * prime
    return h


def _fnv1a_py(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    if _accel.USE_JIT:
        return int(_fnv1a_kernel(np.frombuffer(data, dtype=np.uint8)))
    return _fnv1a_py(data)


@_accel.jit
def _message(x, y, t, state, last_ts, W, omega, out, phi, buf_x, buf_y):
    d = state.shape[1]
    dt = t - last_ts[x]
    for c in range(d):
        phi[c] = math.cos(omega[c] * dt)
    for r in range(d):
        acc = 0.0
        for c in range(d):
            acc += W[r, c] * buf_x[c]
        for c in range(d):
            acc += W[r, d + c] * buf_y[c]
        for c in range(d):
            acc += W[r, 2 * d + c] * phi[c]
        out[r] = math.tanh(acc)


@_accel.jit
def _replay_kernel(state, last_ts, src, dst, ts, start, stop, W, omega, gamma):
    """Apply edges ``start:stop`` in order; return -1 or the first stale edge."""
    d = state.shape[1]
    sx = np.empty(d)
    sy = np.empty(d)
    mx = np.empty(d)
    my = np.empty(d)
    phi = np.empty(d)
    for e in range(start, stop):
        i = src[e]
        j = dst[e]
        t = ts[e]
        if t < last_ts[i] or t < last_ts[j]:
            return e
        for c in range(d):
            sx[c] = state[i, c]
            sy[c] = state[j, c]
        _message(i, j, t, state, last_ts, W, omega, mx, phi, sx, sy)
        if i != j:
            _message(j, i, t, state, last_ts, W, omega, my, phi, sy, sx)
        for c in range(d):
            state[i, c] = (1.0 - gamma) * sx[c] + gamma * mx[c]
        last_ts[i] = t
        if i != j:
            for c in range(d):
                state[j, c] = (1.0 - gamma) * sy[c] + gamma * my[c]
            last_ts[j] = t
    return -1


def replay(mem: MemoryStore, s: EdgeStream, model: SurrogateModel, start: int = 0,
           stop: Optional[int] = None) -> MemoryStore:
    """Apply ``s[start:stop]`` to ``mem`` in place, one edge at a time."""
    stop = len(s) if stop is None else stop
    if mem.d != model.d:
        raise InvalidParams(f"store dimension {mem.d} != model dimension {model.d}")
    bad = _replay_kernel(mem.state, mem.last_ts, s.src, s.dst, s.ts, start, stop,
                         model.W, model.omega, model.gamma)
    if bad >= 0:
        e = s[bad]
        raise NonChronological(f"edge {bad} {tuple(e)} is older than an endpoint's last update")
    return mem


def model_update(mem: MemoryStore, e, model: SurrogateModel) -> MemoryStore:
    """Apply one interaction ``e = (src, dst, ts)`` to ``mem`` in place.

    Both endpoints' messages are built from pre-event states; a self-loop
    updates its node once. Time deltas for never-updated nodes are taken
    from 0.
    """
    src, dst, t = int(e[0]), int(e[1]), float(e[2])
    for x in (src, dst):
        if not mem.present[x]:
            raise InvalidParams(f"node {x} is not held by this store")
    one = EdgeStream.from_arrays([src], [dst], [t], node_count=mem.state.shape[0], assume_sorted=True)
    return replay(mem, one, model)


@dataclass(frozen=True, eq=False)
class SubGraph:
    nodes: np.ndarray
    edge_index: np.ndarray
    edges: EdgeStream

    def __len__(self):
        return len(self.edges)


def _membership(node_parts, node_count: int, num_parts: int) -> np.ndarray:
    if isinstance(node_parts, np.ndarray):
        member = np.zeros((node_count, num_parts), dtype=np.bool_)
        rows = min(node_count, node_parts.shape[0])
        member[:rows] = node_parts[:rows, :num_parts]
        return member
    member = np.zeros((node_count, num_parts), dtype=np.bool_)
    for node, parts in dict(node_parts).items():
        if int(node) < node_count:
            member[int(node), list(parts)] = True
    return member


def induce_subgraphs(s: EdgeStream, node_parts, num_parts: int) -> list:
    """Induced sub-graph per partition: every edge with both endpoints inside.

    ``node_parts`` is a bool (node x partition) matrix or a mapping from node
    id to an iterable of partition ids.
    """
    member = _membership(node_parts, s.node_count, num_parts)
    out = []
    for p in range(num_parts):
        idx = np.flatnonzero(member[s.src, p] & member[s.dst, p])
        out.append(SubGraph(nodes=np.flatnonzero(member[:, p]), edge_index=idx, edges=s.select(idx)))
    return out


def shuffle_groups(num_small: int, num_workers: int, epoch_seed: Optional[int]) -> list:
    """Seeded permutation of small parts cut into ``num_workers`` equal groups.

    ``epoch_seed=None`` keeps the identity order (fixed consecutive grouping).
    """
    if num_workers < 1 or num_small % num_workers:
        raise IndivisibleParts(f"{num_small} parts cannot be split evenly over {num_workers} workers")
    if epoch_seed is None:
        perm = np.arange(num_small)
    else:
        perm = np.random.default_rng(epoch_seed).permutation(num_small)
    size = num_small // num_workers
    return [tuple(sorted(perm[g * size:(g + 1) * size].tolist())) for g in range(num_workers)]


def combine(small: np.ndarray, groups: list) -> np.ndarray:
    out = np.zeros((small.shape[0], len(groups)), dtype=np.bool_)
    for g, members in enumerate(groups):
        out[:, g] = small[:, list(members)].any(axis=1)
    return out


def shuffle_combine(small, num_workers: int, epoch_seed: Optional[int]) -> list:
    """Union the small node sets into ``num_workers`` combined sets.

    ``small`` is a list of node collections (sets or bool masks). Returns a
    list of Python sets.
    """
    groups = shuffle_groups(len(small), num_workers, epoch_seed)
    sets = [set(np.flatnonzero(p).tolist()) if isinstance(p, np.ndarray) and p.dtype == np.bool_
            else set(int(x) for x in p) for p in small]
    return [set().union(*(sets[m] for m in members)) for members in groups]


def recovered_edges(s: EdgeStream, small: np.ndarray, combined: np.ndarray) -> int:
    """Edges inside some combined sub-graph but inside no small one."""
    in_small = (small[s.src] & small[s.dst]).any(axis=1)
    in_comb = (combined[s.src] & combined[s.dst]).any(axis=1)
    return int(np.count_nonzero(in_comb & ~in_small))


def sync_shared(mems: list, shared, strategy: str = MAX_TIMESTAMP) -> int:
    """Reconcile shared-node memories across workers in place.

    ``max_timestamp`` copies the (state, last_ts) with the largest last_ts
    (lowest worker index on ties) to every worker. ``average`` sets the state
    to the element-wise mean and last_ts to the maximum; nodes whose copies
    already agree are left untouched. Returns how many nodes disagreed.
    """
    strategy = sync_strategy(strategy)
    shared = np.asarray(shared, dtype=np.int64)
    if len(mems) < 2 or len(shared) == 0:
        return 0
    for w, mem in enumerate(mems):
        if not mem.present[shared].all():
            raise InvalidParams(f"worker {w} does not hold every shared node")
    states = np.stack([m.state[shared] for m in mems])
    stamps = np.stack([m.last_ts[shared] for m in mems])
    agree = (states == states[0]).all(axis=(0, 2)) & (stamps == stamps[0]).all(axis=0)
    todo = np.flatnonzero(~agree)
    if len(todo) == 0:
        return 0
    nodes = shared[todo]
    if strategy == MAX_TIMESTAMP:
        winner = np.argmax(stamps[:, todo], axis=0)
        new_state = states[winner, todo]
        new_ts = stamps[winner, todo]
    else:
        new_state = states[:, todo].mean(axis=0)
        new_ts = stamps[:, todo].max(axis=0)
    for mem in mems:
        mem.state[nodes] = new_state
        mem.last_ts[nodes] = new_ts
    return len(todo)


@dataclass(frozen=True)
class SimConfig:
    num_workers: int = 4
    num_small_parts: int = 4
    shuffle: bool = False
    sync_strategy: str = MAX_TIMESTAMP
    batch_size: int = 200
    epochs: int = 1
    d: int = 8
    model_seed: int = 0
    seed: int = 0
    gamma: float = 0.5

    def __post_init__(self):
        if self.num_workers < 1:
            raise InvalidParams("num_workers must be >= 1")
        if self.num_small_parts < self.num_workers:
            raise InvalidParams("num_small_parts must be >= num_workers")
        if self.num_small_parts % self.num_workers:
            raise IndivisibleParts(
                f"{self.num_small_parts} small parts cannot be split over {self.num_workers} workers")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidParams("batch_size must be >= 1 and epochs >= 0")
        object.__setattr__(self, "sync_strategy", sync_strategy(self.sync_strategy))


def run_epoch(subgraphs: list, mems: list, cfg: SimConfig, model: SurrogateModel,
              shared=(), log: Optional[Callable] = None) -> dict:
    """Lockstep loop-within-epoch traversal; updates ``mems`` in place.

    ``log(step, worker, batch, event)`` is called for every ``reset``,
    ``batch`` and ``backup`` event (batch numbers are 1-based).
    """
    n = len(subgraphs)
    if len(mems) != n:
        raise InvalidParams(f"{len(mems)} stores for {n} sub-graphs")
    bs = cfg.batch_size
    n_batches = [-(-len(g) // bs) for g in subgraphs]
    backups = [None] * n
    loops = [0] * n
    ran = [0] * n
    for w in range(n):
        if n_batches[w] == 0:
            mems[w].reset()
            backups[w] = mems[w].copy()
            loops[w] = 1
    steps = 0
    total = max(n_batches) if n else 0
    for step in range(total):
        for w in range(n):
            nb = n_batches[w]
            if nb == 0:
                continue
            b = step % nb
            if b == 0:
                mems[w].reset()
                if log:
                    log(step, w, 1, "reset")
            edges = subgraphs[w].edges
            replay(mems[w], edges, model, b * bs, min((b + 1) * bs, len(edges)))
            ran[w] += 1
            if log:
                log(step, w, b + 1, "batch")
            if b == nb - 1:
                backups[w] = mems[w].copy()
                loops[w] += 1
                if log:
                    log(step, w, b + 1, "backup")
        steps = step + 1
        if all(count >= 1 for count in loops):
            break
    for w in range(n):
        mems[w].load(backups[w])
    synced = sync_shared(mems, shared, cfg.sync_strategy)
    return {
        "batches": ran,
        "loops": loops,
        "steps": steps,
        "sync_events": synced,
        "digests": [m.digest() for m in mems],
    }


@dataclass
class SimReport:
    config: dict
    epochs: list = field(default_factory=list)
    memories: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"config": self.config, "epochs": self.epochs}


def _stores(node_count: int, d: int, member: np.ndarray) -> list:
    return [MemoryStore.zeros(node_count, d, member[:, w]) for w in range(member.shape[1])]


def simulate(s: EdgeStream, pa: PartitionAssignment, cfg: SimConfig,
             mems: Optional[list] = None) -> SimReport:
    """Run ``cfg.epochs`` epochs over the partitioned stream.

    The assignment must have ``cfg.num_small_parts`` partitions. With
    ``shuffle`` the small parts are regrouped each epoch with seed
    ``cfg.seed + epoch``; otherwise consecutive parts are grouped. Each
    epoch reports how many edges the grouping recovered relative to the
    small-part sub-graphs.
    """
    if pa.num_parts != cfg.num_small_parts:
        raise InvalidParams(f"assignment has {pa.num_parts} partitions, config expects {cfg.num_small_parts}")
    node_count = max(s.node_count, pa.node_count)
    small = _membership(pa.node_parts, node_count, pa.num_parts)
    stream = s if s.node_count == node_count else EdgeStream(s.src, s.dst, s.ts, node_count)
    model = SurrogateModel.from_seed(cfg.d, cfg.model_seed, cfg.gamma)
    config = asdict(cfg)
    if mems is None:
        groups = shuffle_groups(pa.num_parts, cfg.num_workers, None)
        mems = _stores(node_count, cfg.d, combine(small, groups))
    report = SimReport(config=config, memories=mems)
    for epoch in range(cfg.epochs):
        seed = cfg.seed + epoch if cfg.shuffle else None
        groups = shuffle_groups(pa.num_parts, cfg.num_workers, seed)
        member = combine(small, groups)
        subgraphs = induce_subgraphs(stream, member, cfg.num_workers)
        mems = _stores(node_count, cfg.d, member)
        section = run_epoch(subgraphs, mems, cfg, model, shared=pa.shared)
        section = {"groups": [list(g) for g in groups],
                   "recovered": recovered_edges(stream, small, member), **section}
        report.epochs.append(section)
        report.memories = mems
    return report
