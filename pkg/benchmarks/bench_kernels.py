"""Time the numba kernels against their pure Python / numpy fallbacks.

    python benchmarks/bench_kernels.py [--edges 20000] [--repeat 3]

Compiled kernels are warmed up once before timing. The fallback columns call
the same kernel source uncompiled (``py_func``) or, for centrality, the
vectorized numpy variant that ``SPEEDPART_DISABLE_JIT=1`` selects.
"""
import argparse
import time

import numpy as np

from speedpart import _accel
from speedpart.centrality import _decay_kernel, _decay_numpy, normalized_times
from speedpart.graph_io import gen_powerlaw
from speedpart.pac_sim import SurrogateModel, _fnv1a_kernel, _fnv1a_py, _replay_kernel
from speedpart.partitioner import _sep_kernel, make_config


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(s, d):
    ts = normalized_times(s)
    cfg = make_config(s, 4, k=0.05)
    sep_args = (s.src, s.dst, cfg.centrality.cent, np.asarray(cfg.hub_set.mask), 4, 1.0, 1.0,
                np.arange(4, dtype=np.int64))
    model = SurrogateModel.from_seed(d, 0)

    def replay_with(kernel):
        state = np.zeros((s.node_count, d))
        last = np.zeros(s.node_count)
        kernel(state, last, s.src, s.dst, s.ts, 0, len(s), model.W, model.omega, model.gamma)

    blob = np.random.default_rng(0).integers(0, 256, s.node_count * d * 8, dtype=np.uint8)
    py = _accel.py_func
    return [
        ("centrality", lambda: _decay_kernel(s.src, s.dst, ts, 0.5, 1.0, s.node_count),
         lambda: _decay_numpy(s.src, s.dst, ts, 0.5, 1.0, s.node_count)),
        ("sep pass", lambda: _sep_kernel(*sep_args), lambda: py(_sep_kernel)(*sep_args)),
        ("memory replay", lambda: replay_with(_replay_kernel), lambda: replay_with(py(_replay_kernel))),
        ("fnv1a digest", lambda: _fnv1a_kernel(blob), lambda: _fnv1a_py(blob.tobytes())),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--edges", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=4000)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    if not _accel.USE_JIT:
        raise SystemExit("numba is unavailable or disabled; nothing to compare")
    s = gen_powerlaw(a.nodes, a.edges, 2.5, seed=0)
    print(f"{len(s)} edges, {s.node_count} nodes, d={a.dim}")
    print(f"{'kernel':<16}{'numba s':>10}{'fallback s':>12}{'speedup':>10}")
    for name, fast, slow in cases(s, a.dim):
        fast()  # compile
        tf = best_of(fast, a.repeat)
        ts = best_of(slow, a.repeat)
        print(f"{name:<16}{tf:>10.4f}{ts:>12.4f}{ts / tf:>9.1f}x")


if __name__ == "__main__":
    main()
