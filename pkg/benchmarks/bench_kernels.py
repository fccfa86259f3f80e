"""Timing comparison of the compiled and pure-numpy kernel paths.

The package binds the jitted kernels when numba is importable and the
CLUSTERLM_NUMBA environment flag is not 0/false/off; this script times
both implementations side by side on synthetic count matrices, plus one
end-to-end clustering run on whichever path is currently bound.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--seed N]
"""

import argparse
import random
import time

import numpy as np

from clusterlm import _kernels
from clusterlm.cluster import ClusterParams, run_tree
from clusterlm.ctxtree import build_suffix_tree
from clusterlm.events import ContextSpec, EventTable, Slot

# (n_states, n_categories): spans tiny unit-test shapes to the shape a
# large-vocabulary run would use
SHAPES = [(10, 8), (50, 30), (200, 100), (1000, 200)]


def make_case(rng: np.random.Generator, n_states: int, n_cats: int):
    joint = rng.integers(0, 50, size=(n_states, n_cats)).astype(np.float64)
    joint[rng.random(joint.shape) < 0.6] = 0.0
    state_totals = joint.sum(axis=1)
    cat_totals = joint.sum(axis=0)
    g_cur = int(rng.integers(n_cats))
    s_cur = int(rng.integers(n_states))
    word_profile = np.minimum(rng.integers(0, 20, n_states).astype(np.float64),
                              joint[:, g_cur])
    group_profile = np.minimum(rng.integers(0, 20, n_cats).astype(np.float64),
                               joint[s_cur, :])
    return joint, state_totals, cat_totals, g_cur, s_cur, word_profile, group_profile


def time_call(fn, args, repeats: int, inner: int) -> float:
    """Best-of-repeats microseconds per call."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best * 1e6


def bench_kernels(repeats: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    kernels = [
        ("criterion", _kernels.criterion_value_np, _kernels.criterion_value_jit,
         lambda c: (c[0], c[1], c[2])),
        ("word deltas", _kernels.word_move_deltas_np, _kernels.word_move_deltas_jit,
         lambda c: (c[0], c[2], c[5], c[3], float(c[5].sum()))),
        ("group deltas", _kernels.group_move_deltas_np, _kernels.group_move_deltas_jit,
         lambda c: (c[0], c[1], c[6], c[4], float(c[6].sum()))),
    ]
    print(f"{'kernel':<14}{'shape':<12}{'numpy us':>10}{'jit us':>10}{'speedup':>9}")
    for n_states, n_cats in SHAPES:
        case = make_case(rng, n_states, n_cats)
        inner = max(20, 40_000 // (n_states * n_cats // 10 + 1))
        for name, np_fn, jit_fn, pick in kernels:
            args = pick(case)
            jit_fn(*args)  # compile outside the timed region
            t_np = time_call(np_fn, args, repeats, inner)
            t_jit = time_call(jit_fn, args, repeats, inner)
            shape = f"{n_states}x{n_cats}"
            print(f"{name:<14}{shape:<12}{t_np:>10.2f}{t_jit:>10.2f}"
                  f"{t_np / t_jit:>8.1f}x")


def bench_run(seed: int) -> None:
    rng = random.Random(seed)
    n_words, depth = 120, 2
    counts = {}
    while len(counts) < 2500:
        ctx = tuple(rng.randrange(n_words) for _ in range(depth))
        counts.setdefault(ctx, {})[rng.randrange(n_words)] = rng.randint(1, 30)
    from clusterlm.corpus import FeatureMapper

    mapper = FeatureMapper(name="w", kind="identity",
                           table=np.arange(n_words, dtype=np.int32),
                           arity=n_words,
                           value_names=[f"w{i}" for i in range(n_words)])
    spec = ContextSpec((Slot(-2, mapper), Slot(-1, mapper)))
    table = EventTable.from_counts(spec, n_words, counts)
    params = ClusterParams(n_categories=30, n_states=60, min_count=2)
    tree = build_suffix_tree(table)
    run_tree(table, tree, params)  # warm
    t0 = time.perf_counter()
    cl = run_tree(table, tree, params)
    dt = time.perf_counter() - t0
    path = "numba" if _kernels.USING_NUMBA else "numpy"
    print(f"\nfull tree run ({table.n_contexts} contexts, {n_words} words, "
          f"{path} path): {dt:.2f}s, criterion {cl.criterion():.1f}")
    print("set CLUSTERLM_NUMBA=0 to rerun this section on the numpy path")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats per kernel")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _kernels._HAVE_NUMBA:
        print("note: numba is not installed; the jit columns time the "
              "plain-python fallback\n")
    bench_kernels(args.repeats, args.seed)
    bench_run(args.seed)


if __name__ == "__main__":
    main()
