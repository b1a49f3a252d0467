"""Temporal edge streams: CSV ingestion, chronological splits, synthetic graphs."""
import csv
import io
import math
import sys
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InvalidFractions, InvalidParams, ParseError

HEADER = ("src", "dst", "ts")

# guards floor(f * n) against products like 0.29 * 100 = 28.999999999999996
_FLOOR_TOL = 1e-9


def _floor_frac(frac: float, n: int) -> int:
    return int(math.floor(frac * n + _FLOOR_TOL))


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    ts: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EdgeStream:
    """Time-ordered interaction events stored column-wise.

    ``src``/``dst`` are int64 node ids and ``ts`` float64 timestamps; the
    arrays are read-only. ``node_count`` is one past the largest id the stream
    may reference.
    """

    src: np.ndarray
    dst: np.ndarray
    ts: np.ndarray
    node_count: int

    @classmethod
    def from_arrays(cls, src, dst, ts, node_count=None, assume_sorted=False):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        ts = np.asarray(ts, dtype=np.float64).ravel()
        if not (src.shape == dst.shape == ts.shape):
            raise InvalidParams("src, dst and ts must have equal length")
        if len(ts) and (src.min() < 0 or dst.min() < 0):
            raise InvalidParams("node ids must be non-negative")
        if len(ts) and (not np.all(np.isfinite(ts)) or ts.min() < 0):
            raise InvalidParams("timestamps must be finite and non-negative")
        seen = int(max(src.max(), dst.max())) + 1 if len(ts) else 0
        if node_count is None:
            node_count = seen
        elif node_count < seen:
            raise InvalidParams(f"node id {seen - 1} >= declared node_count {node_count}")
        if not assume_sorted:
            order = np.argsort(ts, kind="stable")
            src, dst, ts = src[order], dst[order], ts[order]
        else:
            src, dst, ts = src.copy(), dst.copy(), ts.copy()
        return cls(_frozen(src), _frozen(dst), _frozen(ts), int(node_count))

    @classmethod
    def from_edges(cls, edges, node_count=None, assume_sorted=False):
        edges = list(edges)
        if not edges:
            return cls.from_arrays([], [], [], node_count=node_count or 0)
        src, dst, ts = zip(*edges)
        return cls.from_arrays(src, dst, ts, node_count=node_count, assume_sorted=assume_sorted)

    def __len__(self) -> int:
        return len(self.ts)

    def __iter__(self) -> Iterator[TemporalEdge]:
        for s, d, t in zip(self.src.tolist(), self.dst.tolist(), self.ts.tolist()):
            yield TemporalEdge(s, d, t)

    def __getitem__(self, idx) -> TemporalEdge:
        return TemporalEdge(int(self.src[idx]), int(self.dst[idx]), float(self.ts[idx]))

    @property
    def t_max(self) -> float:
        return float(self.ts.max()) if len(self.ts) else 0.0

    @property
    def t_min(self) -> float:
        return float(self.ts.min()) if len(self.ts) else 0.0

    def is_sorted(self) -> bool:
        return bool(np.all(self.ts[1:] >= self.ts[:-1]))

    def select(self, index) -> "EdgeStream":
        """Sub-stream at ``index`` (slice, mask or index array), order kept."""
        return EdgeStream(
            _frozen(self.src[index].copy()),
            _frozen(self.dst[index].copy()),
            _frozen(self.ts[index].copy()),
            self.node_count,
        )

    def degrees(self) -> np.ndarray:
        """Incident-edge count per node; a self-loop counts twice."""
        return (np.bincount(self.src, minlength=self.node_count)
                + np.bincount(self.dst, minlength=self.node_count))

    def active_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.degrees())


@dataclass(frozen=True)
class ChronoSplit:
    train: EdgeStream
    val: EdgeStream
    test: EdgeStream
    fractions: tuple


def _open_text(path):
    if hasattr(path, "read"):
        return path, False
    if str(path) == "-":
        return sys.stdin, False
    return open(path, newline="", encoding="utf-8"), True


def load_edges(path, assume_sorted: bool = False) -> EdgeStream:
    """Read a ``src,dst,ts`` CSV (header required, extra columns ignored).

    ``path`` may be a filesystem path, ``"-"`` for stdin, or an open text
    file. Rows are stable-sorted by timestamp unless ``assume_sorted``.
    Data rows are numbered from 1 in :class:`ParseError`; the header is row 0.
    """
    fh, owned = _open_text(path)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return EdgeStream.from_arrays([], [], [], node_count=0)
        names = [h.strip().lower() for h in header]
        try:
            cols = [names.index(name) for name in HEADER]
        except ValueError:
            raise ParseError(0, f"header must contain {','.join(HEADER)}, got {header!r}") from None
        width = max(cols) + 1
        src, dst, ts = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) < width:
                raise ParseError(row_no, f"expected at least {width} fields, got {len(row)}")
            try:
                s = int(row[cols[0]])
                d = int(row[cols[1]])
                t = float(row[cols[2]])
            except ValueError:
                raise ParseError(row_no, f"cannot parse {row!r}") from None
            if s < 0 or d < 0:
                raise ParseError(row_no, "negative node id")
            if not math.isfinite(t) or t < 0:
                raise ParseError(row_no, f"timestamp must be finite and >= 0, got {t}")
            src.append(s)
            dst.append(d)
            ts.append(t)
    finally:
        if owned:
            fh.close()
    return EdgeStream.from_arrays(src, dst, ts, assume_sorted=assume_sorted)


def write_edges(stream: EdgeStream, path) -> None:
    """Write ``stream`` as CSV; ``repr`` keeps timestamps bit-exact on reload."""
    if hasattr(path, "write"):
        _write_rows(stream, path)
    elif str(path) == "-":
        _write_rows(stream, sys.stdout)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_rows(stream, fh)


def _write_rows(stream, fh):
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for s, d, t in zip(stream.src.tolist(), stream.dst.tolist(), stream.ts.tolist()):
        buf.write(f"{s},{d},{t!r}\n")
    fh.write(buf.getvalue())


def chrono_split(s: EdgeStream, f_train: float, f_val: float) -> ChronoSplit:
    """Split by position in time order: floor(f_train*n), floor(f_val*n), rest."""
    if not (0.0 < f_train < 1.0) or f_val < 0.0 or f_train + f_val > 1.0 + _FLOOR_TOL:
        raise InvalidFractions(f"need 0 < f_train < 1, f_val >= 0, sum <= 1; got {f_train}, {f_val}")
    n = len(s)
    n_train = _floor_frac(f_train, n)
    n_val = min(_floor_frac(f_val, n), n - n_train)
    f_test = max(0.0, 1.0 - f_train - f_val)
    return ChronoSplit(
        train=s.select(slice(0, n_train)),
        val=s.select(slice(n_train, n_train + n_val)),
        test=s.select(slice(n_train + n_val, n)),
        fractions=(f_train, f_val, f_test),
    )


def _powerlaw_degrees(nodes: int, stubs: int, alpha: float) -> np.ndarray:
    """Degree sequence following d(rank) ~ (nodes / rank)^(1/(alpha-1)).

    Largest-remainder apportionment of ``stubs`` so the sum is exact; every
    node gets at least one stub when there are enough, and the top degree is
    capped at half the stubs so a loop-free pairing exists.
    """
    ranks = np.arange(1, nodes + 1, dtype=np.float64)
    weight = (nodes / ranks) ** (1.0 / (alpha - 1.0))
    quota = stubs * weight / weight.sum()
    deg = np.floor(quota).astype(np.int64)
    if stubs >= nodes:
        deg = np.maximum(deg, 1)
    diff = stubs - int(deg.sum())
    if diff > 0:
        # stable argsort keeps rank order among equal remainders
        order = np.argsort(-(quota - np.floor(quota)), kind="stable")
        deg[order[:diff]] += 1
    while diff < 0:
        # min-degree padding overshot; take back from the top ranks
        floor_ = 1 if stubs >= nodes else 0
        for r in range(nodes):
            if diff == 0:
                break
            if deg[r] > floor_:
                deg[r] -= 1
                diff += 1
    half = stubs // 2
    r = 0
    while deg[0] > half:
        r = r % (nodes - 1) + 1
        deg[0] -= 1
        deg[r] += 1
    return deg


def gen_powerlaw(nodes: int, edges: int, alpha: float, seed: int) -> EdgeStream:
    """Synthetic heavy-tailed temporal graph.

    Node ranks receive a power-law degree sequence with exponent ``alpha``;
    stubs are paired uniformly at random (so a node attracts new interactions
    in proportion to its target degree) and self-loops are rewired away by
    swapping with another pair. Ranks map to ids through a seeded permutation
    and the i-th edge gets timestamp i (1-based).
    """
    if nodes < 2 or edges < 1 or not alpha > 1.0:
        raise InvalidParams(f"need nodes >= 2, edges >= 1, alpha > 1; got {nodes}, {edges}, {alpha}")
    rng = np.random.default_rng(seed)
    deg = _powerlaw_degrees(nodes, 2 * edges, alpha)
    ids = rng.permutation(nodes).astype(np.int64)
    stubs = np.repeat(ids, deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(edges, 2)
    _rewire_self_loops(pairs, rng)
    ts = np.arange(1, edges + 1, dtype=np.float64)
    return EdgeStream.from_arrays(pairs[:, 0], pairs[:, 1], ts, node_count=nodes, assume_sorted=True)


def _rewire_self_loops(pairs: np.ndarray, rng, max_rounds: int = 8) -> None:
    # (a,a) + (b,c) -> (a,b) + (a,c) whenever a not in {b,c}
    n = len(pairs)
    for _ in range(max_rounds):
        loops = np.flatnonzero(pairs[:, 0] == pairs[:, 1])
        if len(loops) == 0 or n < 2:
            return
        for i in loops:
            a = pairs[i, 0]
            if pairs[i, 1] != a:
                continue
            start = int(rng.integers(n))
            for step in range(n):
                j = (start + step) % n
                b, c = pairs[j]
                if j != i and b != a and c != a:
                    pairs[i, 1] = b
                    pairs[j, 0] = a
                    pairs[j, 1] = c
                    break


def maybe_split(s: EdgeStream, partition_on: str, f_train: float, f_val: float) -> tuple:
    """Return ``(stream_to_partition, split_or_None)`` for a partitioning run."""
    if partition_on == "all":
        return s, None
    split = chrono_split(s, f_train, f_val)
    return split.train, split

