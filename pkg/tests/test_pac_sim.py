import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import deleted_edges, fnv1a64, ref_replay
from speedpart.errors import IndivisibleParts, InvalidParams, NonChronological
from speedpart.graph_io import EdgeStream, gen_powerlaw
from speedpart.pac_sim import (AVERAGE, MAX_TIMESTAMP, MemoryStore, SimConfig, SubGraph,
                               SurrogateModel, combine, induce_subgraphs, model_update,
                               recovered_edges, replay, run_epoch, shuffle_combine, shuffle_groups,
                               simulate, sync_shared)
from speedpart.partitioner import explicit_config, make_config, partition_stream


def _random_stream(rng, n_edges, n_nodes):
    ts = np.sort(rng.integers(1, 10 * n_edges, n_edges)).astype(float)
    return EdgeStream.from_arrays(rng.integers(0, n_nodes, n_edges), rng.integers(0, n_nodes, n_edges),
                                  ts, node_count=n_nodes)


def _bits(a):
    return np.asarray(a, dtype=np.float64).tobytes()


def test_induce_single_partition_is_whole_stream():
    s = _random_stream(np.random.default_rng(0), 50, 10)
    (g,) = induce_subgraphs(s, np.ones((10, 1), dtype=bool), 1)
    assert g.edge_index.tolist() == list(range(50))


def test_induce_drops_cross_edge():
    s = EdgeStream.from_edges([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)])
    a, b = induce_subgraphs(s, {0: [0], 1: [0], 2: [1], 3: [1]}, 2)
    assert a.edge_index.tolist() == [0] and b.edge_index.tolist() == [2]


def test_induce_classifies_every_edge():
    rng = np.random.default_rng(3)
    s = _random_stream(rng, 200, 30)
    home = rng.integers(0, 4, 30)
    node_parts = {n: [int(home[n])] for n in range(30)}
    subs = induce_subgraphs(s, node_parts, 4)
    inside = sorted(i for g in subs for i in g.edge_index.tolist())
    cross = [e for e, (a, b, _) in enumerate(s) if home[a] != home[b]]
    assert sorted(inside + cross) == list(range(200))
    for g in subs:
        assert np.all(np.diff(g.edges.ts) >= 0)


def test_shuffle_groups_shape_and_errors():
    groups = shuffle_groups(8, 4, epoch_seed=5)
    assert sorted(itertools.chain(*groups)) == list(range(8))
    assert all(len(g) == 2 for g in groups)
    assert shuffle_groups(8, 4, None) == [(0, 1), (2, 3), (4, 5), (6, 7)]
    assert shuffle_groups(8, 4, 5) == groups
    with pytest.raises(IndivisibleParts):
        shuffle_groups(6, 4, 0)


def test_shuffle_combine_one_per_worker_is_permutation():
    small = [{0, 1}, {2}, {3, 4}]
    out = shuffle_combine(small, 3, epoch_seed=1)
    assert sorted(map(sorted, out)) == sorted(map(sorted, small))


def test_cogrouping_counts_over_50_seeds():
    # brute force: enumerate each seed's grouping and count pair co-occurrence
    counts = {}
    for seed in range(50):
        perm = np.random.default_rng(seed).permutation(8).tolist()
        for g in range(4):
            a, b = sorted(perm[2 * g:2 * g + 2])
            counts[(a, b)] = counts.get((a, b), 0) + 1
    seen = {}
    small = [{p} for p in range(8)]
    for seed in range(50):
        for group in shuffle_combine(small, 4, seed):
            pair = tuple(sorted(group))
            seen[pair] = seen.get(pair, 0) + 1
    assert seen == counts
    assert sum(seen.values()) == 200
    # each of 28 pairs has chance 1/7 per epoch; 50 epochs make a miss unlikely but possible
    assert len(seen) >= 24


def test_model_update_gamma_zero():
    model = SurrogateModel.from_seed(4, 0, gamma=0.0)
    mem = MemoryStore.zeros(3, 4)
    model_update(mem, (0, 1, 2.5), model)
    assert not mem.state.any()
    assert mem.last_ts.tolist() == [2.5, 2.5, 0.0]


def test_model_update_self_loop_once():
    model = SurrogateModel.from_seed(4, 0)
    mem = MemoryStore.zeros(1, 4)
    model_update(mem, (0, 0, 1.0), model)
    state, _ = ref_replay([(0, 0, 1.0)], model.W, model.omega, 0.5, 1, 4)
    assert _bits(mem.state) == _bits(state)
    twice = MemoryStore.zeros(1, 4)
    replay(twice, EdgeStream.from_edges([(0, 0, 1.0), (0, 0, 1.0)]), model)
    assert _bits(twice.state) != _bits(mem.state)


def test_model_update_rejects_stale_edge():
    model = SurrogateModel.from_seed(4, 0)
    mem = MemoryStore.zeros(2, 4)
    model_update(mem, (0, 1, 5.0), model)
    with pytest.raises(NonChronological):
        model_update(mem, (1, 0, 4.0), model)


def test_replay_matches_oracle_20_edges():
    rng = np.random.default_rng(12)
    s = _random_stream(rng, 20, 6)
    model = SurrogateModel.from_seed(8, 3)
    mem = replay(MemoryStore.zeros(6, 8), s, model)
    state, last = ref_replay(list(s), model.W, model.omega, model.gamma, 6, 8)
    assert _bits(mem.state) == _bits(state) and _bits(mem.last_ts) == _bits(last)


def test_digest_layout():
    mem = MemoryStore.zeros(3, 2, present=[True, False, True])
    mem.state[0] = [1.0, 2.0]
    mem.last_ts[2] = 7.0
    raw = np.array([1.0, 2.0, 0.0, 0.0, 0.0, 7.0], dtype="<f8").tobytes()
    assert mem.byte_image() == raw
    assert mem.digest() == f"{fnv1a64(raw):016x}"


def _chain(n, offset=0.0):
    return EdgeStream.from_arrays(np.arange(n) % 5, (np.arange(n) + 1) % 5,
                                  offset + np.arange(1, n + 1, dtype=float), node_count=5)


def _subgraph(s):
    return SubGraph(nodes=np.arange(s.node_count), edge_index=np.arange(len(s)), edges=s)


def test_run_epoch_three_and_five_batches():
    model = SurrogateModel.from_seed(4, 0)
    cfg = SimConfig(num_workers=2, num_small_parts=2, batch_size=2, d=4)
    subs = [_subgraph(_chain(6)), _subgraph(_chain(10))]
    mems = [MemoryStore.zeros(5, 4), MemoryStore.zeros(5, 4)]
    events = []
    out = run_epoch(subs, mems, cfg, model, log=lambda *ev: events.append(ev))
    assert out["steps"] == 5
    w0 = [(step, b) for step, w, b, ev in events if w == 0 and ev == "batch"]
    assert [b for _, b in w0] == [1, 2, 3, 1, 2]
    assert [step for step, w, _, ev in events if w == 0 and ev == "backup"] == [2]
    assert [step for step, w, _, ev in events if w == 0 and ev == "reset"] == [0, 3]
    assert out["loops"] == [1, 1] and out["batches"] == [5, 5]
    # worker 0 is rolled back to the end of its first traversal
    first_loop = replay(MemoryStore.zeros(5, 4), subs[0].edges, model)
    assert mems[0].digest() == first_loop.digest()
    assert mems[1].digest() == replay(MemoryStore.zeros(5, 4), subs[1].edges, model).digest()


@given(st.lists(st.integers(0, 40), min_size=1, max_size=5), st.integers(1, 7))
@settings(max_examples=60, deadline=None)
def test_run_epoch_length(sizes, bs):
    model = SurrogateModel.from_seed(2, 0)
    cfg = SimConfig(num_workers=1, num_small_parts=1, batch_size=bs, d=2)
    subs = [_subgraph(_chain(n)) for n in sizes]
    mems = [MemoryStore.zeros(5, 2) for _ in sizes]
    out = run_epoch(subs, mems, cfg, model)
    assert out["steps"] == max(-(-n // bs) for n in sizes)
    for g, m in zip(subs, mems):
        assert m.digest() == replay(MemoryStore.zeros(5, 2), g.edges, model).digest()


def test_run_epoch_empty_worker():
    model = SurrogateModel.from_seed(2, 0)
    cfg = SimConfig(num_workers=2, num_small_parts=2, batch_size=3, d=2)
    subs = [_subgraph(_chain(0)), _subgraph(_chain(7))]
    mems = [MemoryStore.zeros(5, 2), MemoryStore.zeros(5, 2)]
    mems[0].state[:] = 1.0
    out = run_epoch(subs, mems, cfg, model)
    assert out["steps"] == 3 and out["batches"] == [0, 3] and out["loops"] == [1, 1]
    assert not mems[0].state.any()


def test_run_epoch_identical_workers_agree():
    model = SurrogateModel.from_seed(3, 1)
    cfg = SimConfig(num_workers=3, num_small_parts=3, batch_size=4, d=3)
    subs = [_subgraph(_chain(11))] * 3
    mems = [MemoryStore.zeros(5, 3) for _ in range(3)]
    out = run_epoch(subs, mems, cfg, model)
    assert len(set(out["digests"])) == 1


def _random_stores(rng, workers=3, nodes=6, d=3):
    mems = []
    for _ in range(workers):
        m = MemoryStore.zeros(nodes, d)
        m.state[:] = rng.standard_normal((nodes, d))
        m.last_ts[:] = rng.integers(0, 4, nodes)
        mems.append(m)
    return mems


def test_sync_max_ts_unique_winner():
    mems = [MemoryStore.zeros(3, 2) for _ in range(3)]
    mems[2].state[1] = [4.0, 5.0]
    mems[2].last_ts[1] = 9.0
    assert sync_shared(mems, [1], "max-ts") == 1
    for m in mems:
        assert m.state[1].tolist() == [4.0, 5.0] and m.last_ts[1] == 9.0


def test_sync_average_two_workers():
    mems = [MemoryStore.zeros(2, 2) for _ in range(2)]
    mems[0].state[0] = [1.0, 3.0]
    mems[1].state[0] = [3.0, 5.0]
    mems[1].last_ts[0] = 2.0
    sync_shared(mems, [0], AVERAGE)
    for m in mems:
        assert m.state[0].tolist() == [2.0, 4.0] and m.last_ts[0] == 2.0


def test_sync_identical_is_noop():
    rng = np.random.default_rng(0)
    base = _random_stores(rng, workers=1)[0]
    for strategy in (MAX_TIMESTAMP, AVERAGE):
        mems = [base.copy() for _ in range(3)]
        assert sync_shared(mems, range(6), strategy) == 0
        assert all(m.digest() == base.digest() for m in mems)


@pytest.mark.parametrize("seed", range(50))
def test_sync_properties_random_stores(seed):
    rng = np.random.default_rng(seed)
    mems = _random_stores(rng)
    shared = sorted(rng.choice(6, size=3, replace=False).tolist())
    pre_max = np.max([m.last_ts[shared] for m in mems], axis=0)
    untouched = [m.state[[n for n in range(6) if n not in shared]].copy() for m in mems]
    sync_shared(mems, shared, MAX_TIMESTAMP)
    for m, rest in zip(mems, untouched):
        assert np.array_equal(m.last_ts[shared], pre_max)
        assert np.array_equal(m.state[shared], mems[0].state[shared])
        assert np.array_equal(m.state[[n for n in range(6) if n not in shared]], rest)
    once = [m.digest() for m in mems]
    assert sync_shared(mems, shared, MAX_TIMESTAMP) == 0
    assert [m.digest() for m in mems] == once

    mems = _random_stores(rng)
    sync_shared(mems, shared, AVERAGE)
    once = [m.digest() for m in mems]
    sync_shared(mems, shared, AVERAGE)
    assert [m.digest() for m in mems] == once


def test_sync_requires_presence():
    mems = [MemoryStore.zeros(3, 2), MemoryStore.zeros(3, 2, present=[True, False, True])]
    with pytest.raises(InvalidParams):
        sync_shared(mems, [1])


def test_simulate_single_worker_equals_sequential_replay():
    rng = np.random.default_rng(1)
    s = _random_stream(rng, 300, 40)
    pa = partition_stream(s, make_config(s, 1, k=0.0))
    cfg = SimConfig(num_workers=1, num_small_parts=1, batch_size=37, d=6, model_seed=4)
    rep = simulate(s, pa, cfg)
    model = SurrogateModel.from_seed(6, 4)
    state, last = ref_replay(list(s), model.W, model.omega, model.gamma, 40, 6)
    assert _bits(rep.memories[0].state) == _bits(state)
    assert _bits(rep.memories[0].last_ts) == _bits(last)


def test_simulate_no_shuffle_one_part_per_worker_recovers_nothing(pl_stream):
    pa = partition_stream(pl_stream, make_config(pl_stream, 4, k=0.05))
    rep = simulate(pl_stream, pa, SimConfig(num_workers=4, num_small_parts=4, epochs=2, batch_size=500))
    assert [e["recovered"] for e in rep.epochs] == [0, 0]


def _toy_small_parts():
    # 8 small parts of 3 nodes each, plus cross edges between parts
    rng = np.random.default_rng(8)
    edges = []
    t = 1.0
    for p in range(8):
        a, b, c = 3 * p, 3 * p + 1, 3 * p + 2
        for i, j in ((a, b), (b, c), (a, c)):
            edges.append((i, j, t))
            t += 1
    for _ in range(40):
        i, j = rng.integers(0, 24, 2)
        edges.append((int(i), int(j), t))
        t += 1
    return edges, [set(range(3 * p, 3 * p + 3)) for p in range(8)]


def test_simulate_recovered_matches_deleted_edge_sets():
    edges, small_sets = _toy_small_parts()
    s = EdgeStream.from_edges(edges)
    pa = partition_stream(s, make_config(s, 8, k=0.0))
    # overwrite with the known small parts through the JSON form
    doc = pa.to_json()
    doc["node_parts"] = {str(n): [p] for p, nodes in enumerate(small_sets) for n in nodes}
    doc["shared"] = []
    from speedpart.partitioner import PartitionAssignment
    pa = PartitionAssignment.from_json(doc, node_count=24)
    de = deleted_edges(edges, small_sets)
    for seed in range(20):
        cfg = SimConfig(num_workers=4, num_small_parts=8, shuffle=True, seed=seed, batch_size=16, d=2)
        (epoch,) = simulate(s, pa, cfg).epochs
        perm = np.random.default_rng(seed).permutation(8).tolist()
        pairs = [tuple(sorted(perm[2 * g:2 * g + 2])) for g in range(4)]
        expected = sum(len(de[pair]) for pair in pairs)
        assert epoch["recovered"] == expected
        assert [tuple(g) for g in epoch["groups"]] == pairs


def test_recovered_edges_direct():
    s = EdgeStream.from_edges([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (0, 3, 4.0)])
    small = np.zeros((4, 4), dtype=bool)
    small[np.arange(4), np.arange(4)] = True
    assert recovered_edges(s, small, combine(small, [(0, 1), (2, 3)])) == 2
    assert recovered_edges(s, small, combine(small, [(0, 3), (1, 2)])) == 2
    assert recovered_edges(s, small, combine(small, [(0, 1, 2, 3)])) == 4


def test_simulate_zero_epochs(pl_stream):
    pa = partition_stream(pl_stream, make_config(pl_stream, 2, k=0.05))
    rep = simulate(pl_stream, pa, SimConfig(num_workers=2, num_small_parts=2, epochs=0))
    assert rep.epochs == []
    assert all(not m.state.any() for m in rep.memories)


def test_simulate_deterministic_and_shared_agree(pl_stream):
    pa = partition_stream(pl_stream, make_config(pl_stream, 4, k=0.05))
    cfg = SimConfig(num_workers=2, num_small_parts=4, shuffle=True, epochs=2, batch_size=1000, seed=3)
    a, b = simulate(pl_stream, pa, cfg), simulate(pl_stream, pa, cfg)
    assert a.to_json() == b.to_json()
    shared = pa.shared
    assert len(shared) > 0
    assert np.array_equal(a.memories[0].state[shared], a.memories[1].state[shared])


def test_simulate_part_count_mismatch(pl_stream):
    pa = partition_stream(pl_stream, make_config(pl_stream, 4, k=0.05))
    with pytest.raises(InvalidParams):
        simulate(pl_stream, pa, SimConfig(num_workers=2, num_small_parts=2))


def test_simconfig_validation():
    with pytest.raises(IndivisibleParts):
        SimConfig(num_workers=3, num_small_parts=4)
    with pytest.raises(InvalidParams):
        SimConfig(batch_size=0)
    with pytest.raises(InvalidParams):
        SimConfig(sync_strategy="median")
