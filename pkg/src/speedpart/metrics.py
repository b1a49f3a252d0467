"""Partition quality (replication factor, edge cut, balance) and bound checks."""
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import BoundViolation, InvalidAlpha, InvalidParams, MismatchedInput
from .graph_io import EdgeStream, _FLOOR_TOL, gen_powerlaw
from .partitioner import PartitionAssignment, make_config, partition_stream

_BOUND_TOL = 1e-12


@dataclass(frozen=True)
class QualityReport:
    rf: float
    ec: float
    edge_sizes: list
    node_sizes: list
    edge_std: float
    node_std: float
    avg_node_portion: float
    rf_bound: float
    ec_bound: Optional[float]
    edges: int
    active_nodes: int
    discards: int
    shared: int

    def to_json(self) -> dict:
        return asdict(self)


def rf_bound(k: float, num_parts: int) -> float:
    """Worst-case replication factor: k * |P| + (1 - k)."""
    if not 0.0 <= k <= 1.0 or num_parts < 1:
        raise InvalidParams(f"need 0 <= k <= 1 and num_parts >= 1, got {k}, {num_parts}")
    return k * num_parts + (1.0 - k)


def ec_bound(nodes: int, edges: int, k: float, m: float, alpha: float) -> float:
    """Worst-case edge-cut fraction on a power-law graph, clamped to 1.

    Sums m * (k + q / nodes) ** (1 / (1 - alpha)) for q = 0 .. floor(nodes * (1 - k)) - 1,
    an estimate of the degrees of all non-hub nodes, and divides by ``edges``.
    k = 0 makes the first term infinite and the bound vacuous (1.0).
    """
    if not alpha > 1.0:
        raise InvalidAlpha(f"alpha must exceed 1, got {alpha}")
    if not 0.0 <= k <= 1.0:
        raise InvalidParams(f"k must lie in [0, 1], got {k}")
    n_terms = int(math.floor(nodes * (1.0 - k) + _FLOOR_TOL))
    if n_terms <= 0 or edges <= 0:
        return 0.0
    if k == 0.0:
        return 1.0
    q = np.arange(n_terms, dtype=np.float64)
    total = float(np.sum(m * (k + q / nodes) ** (1.0 / (1.0 - alpha))))
    return min(1.0, total / edges)


def quality(pa: PartitionAssignment, s: EdgeStream, k: Optional[float] = None,
            strict: bool = False, alpha: Optional[float] = None) -> QualityReport:
    """Quality statistics of ``pa`` over the stream it was built from.

    RF counts a node once per partition it belongs to (shared nodes belong to
    all of them) and divides by the number of active nodes, or by
    ``node_count`` when ``strict``. EC is the discarded fraction. Standard
    deviations are population deviations across partitions. ``ec_bound`` is
    filled in when ``alpha`` is given, using the stream's minimum degree.
    """
    if len(pa.edge_part) != len(s):
        raise MismatchedInput(f"assignment covers {len(pa.edge_part)} edges, stream has {len(s)}")
    if k is None:
        k = float(pa.config.get("k", 0.0))
    deg = s.degrees()
    active = int(np.count_nonzero(deg))
    n = min(pa.node_count, s.node_count)
    replicas = int(pa.node_parts[:n].sum())
    denom = s.node_count if strict else active
    rf = replicas / denom if denom else 0.0
    discards = pa.discard_count
    ec = discards / len(s) if len(s) else 0.0
    edge_sizes = pa.edge_sizes()
    node_sizes = pa.node_sizes()
    portion = float(node_sizes.mean() / denom) if denom else 0.0
    ecb = None
    if alpha is not None and active:
        ecb = ec_bound(active, len(s), k, float(deg[deg > 0].min()), alpha)
    return QualityReport(
        rf=rf, ec=ec,
        edge_sizes=edge_sizes.tolist(), node_sizes=node_sizes.tolist(),
        edge_std=float(np.std(edge_sizes)), node_std=float(np.std(node_sizes)),
        avg_node_portion=portion,
        rf_bound=rf_bound(k, pa.num_parts), ec_bound=ecb,
        edges=len(s), active_nodes=active, discards=discards, shared=len(pa.shared),
    )


def format_table(rows) -> str:
    """Human-readable table of ``(label, QualityReport)`` rows."""
    lines = [f"{'run':<16}{'Total Cut %':>12}{'edge Std.':>12}{'Avg. Portion %':>16}{'node Std.':>12}{'RF':>8}"]
    for label, r in rows:
        lines.append(f"{label:<16}{100 * r.ec:>12.1f}{r.edge_std:>12.3g}"
                     f"{100 * r.avg_node_portion:>16.1f}{r.node_std:>12.3g}{r.rf:>8.3f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class VerifyConfig:
    parts: tuple = (2, 4, 8)
    ks: tuple = (0.0, 0.01, 0.05, 0.10)
    alphas: tuple = (2.2, 2.5, 3.0)
    edge_range: tuple = (1000, 50000)
    avg_degrees: tuple = (4, 8, 16)
    beta: float = 0.5
    lam: float = 1.0
    epsilon: float = 1.0


def _trial_stream(trial: int, seed: int, vc: VerifyConfig):
    rng = np.random.default_rng([seed, trial])
    lo, hi = vc.edge_range
    edges = int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))
    avg_deg = int(vc.avg_degrees[int(rng.integers(len(vc.avg_degrees)))])
    nodes = max(2, (2 * edges) // avg_deg)
    alpha = vc.alphas[trial % len(vc.alphas)]
    gen_seed = int(rng.integers(2**31))
    return gen_powerlaw(nodes, edges, alpha, gen_seed), dict(
        trial=trial, nodes=nodes, edges=edges, alpha=alpha, gen_seed=gen_seed)


def verify_bounds(trials: int, seed: int, vc: Optional[VerifyConfig] = None,
                  raise_on_violation: bool = True) -> dict:
    """Check the RF and EC bounds on ``trials`` synthetic power-law streams.

    Every trial runs the time-decay partitioner across the parts x k grid
    (RF bound) and the degree-centrality partitioner on the same grid (EC
    bound with m = observed minimum degree and the generator's alpha). Also
    counts k-grid steps where RF drops or EC rises. Raises
    :class:`BoundViolation` listing repro configs unless disabled.
    """
    if trials < 1:
        raise InvalidParams(f"trials must be >= 1, got {trials}")
    vc = vc or VerifyConfig()
    violations = []
    runs = 0
    max_rf_ratio = 0.0
    max_ec_ratio = 0.0
    rf_drops = 0
    ec_rises = 0
    for t in range(trials):
        s, info = _trial_stream(t, seed, vc)
        deg = s.degrees()
        active = int(np.count_nonzero(deg))
        m = float(deg[deg > 0].min())
        for parts in vc.parts:
            prev = {}
            for k in vc.ks:
                bound = rf_bound(k, parts)
                ecb = ec_bound(active, len(s), k, m, info["alpha"])
                for mode in ("decay", "degree"):
                    cfg = make_config(s, parts, k=k, beta=vc.beta, lam=vc.lam,
                                      epsilon=vc.epsilon, centrality=mode)
                    q = quality(partition_stream(s, cfg), s, k=k)
                    runs += 1
                    repro = dict(info, parts=parts, k=k, centrality=mode, seed=seed)
                    max_rf_ratio = max(max_rf_ratio, q.rf / bound)
                    if q.rf > bound + _BOUND_TOL:
                        violations.append(dict(repro, kind="rf", measured=q.rf, bound=bound))
                    if mode == "degree":
                        if ecb > 0:
                            max_ec_ratio = max(max_ec_ratio, q.ec / ecb)
                        if q.ec > ecb + _BOUND_TOL:
                            violations.append(dict(repro, kind="ec", measured=q.ec, bound=ecb, m=m))
                    if mode in prev:
                        rf_prev, ec_prev = prev[mode]
                        rf_drops += q.rf < rf_prev - _BOUND_TOL
                        ec_rises += q.ec > ec_prev + _BOUND_TOL
                    prev[mode] = (q.rf, q.ec)
    report = {
        "config": {"trials": trials, "seed": seed, **asdict(vc)},
        "runs": runs,
        "rf_violations": sum(v["kind"] == "rf" for v in violations),
        "ec_violations": sum(v["kind"] == "ec" for v in violations),
        "max_rf_ratio": max_rf_ratio,
        "max_ec_ratio": max_ec_ratio,
        "rf_monotone_breaks": int(rf_drops),
        "ec_monotone_breaks": int(ec_rises),
        "violations": violations,
    }
    if violations and raise_on_violation:
        raise BoundViolation(violations, report)
    return report

