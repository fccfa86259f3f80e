"""Hot numeric kernels for the exchange clustering inner loop.

Everything here operates on dense integer count arrays: the joint table
N(state, category), its two marginals, and an element's count profile
over the counterpart axis.  The criterion is

    F = sum f(N(s,g)) - sum f(N(s)) - sum f(N(g)),   f(x) = x ln x

and a move delta is F(after) - F(before) assembled from the cells the
move touches, evaluated for every candidate target cluster at once.

Kernels are numba-jitted when numba is importable; setting
``CLUSTERLM_NUMBA=0`` in the environment forces the pure-numpy fallback
(the two paths agree to float rounding, see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


USING_NUMBA = _HAVE_NUMBA and os.environ.get("CLUSTERLM_NUMBA", "1").lower() not in (
    "0",
    "false",
    "off",
)


# ---------------------------------------------------------------------------
# pure-numpy path
# ---------------------------------------------------------------------------


def _xlogx_arr(a: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape, dtype=np.float64)
    mask = a > 0
    vals = a[mask].astype(np.float64)
    out[mask] = vals * np.log(vals)
    return out


def _xlogx_scalar(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def criterion_value_np(joint, state_totals, cat_totals) -> float:
    return float(
        _xlogx_arr(joint).sum() - _xlogx_arr(state_totals).sum() - _xlogx_arr(cat_totals).sum()
    )


def word_move_deltas_np(joint, cat_totals, profile, g_cur, n_elem):
    """Criterion deltas for moving one word to every category.

    ``profile[s]`` is the word's event count within state ``s`` and
    sums to ``n_elem``.  Entry ``g_cur`` of the result is exactly 0.
    """
    nz = np.nonzero(profile)[0]
    p = profile[nz].astype(np.float64)[:, None]
    rows = joint[nz, :].astype(np.float64)
    deltas = (_xlogx_arr(rows + p) - _xlogx_arr(rows)).sum(axis=0)

    jg = joint[nz, g_cur].astype(np.float64)
    src_joint = float((_xlogx_arr(jg - p[:, 0]) - _xlogx_arr(jg)).sum())

    m = cat_totals.astype(np.float64)
    gain = _xlogx_arr(m + float(n_elem)) - _xlogx_arr(m)
    src_margin = _xlogx_scalar(float(cat_totals[g_cur]) - n_elem) - _xlogx_scalar(
        float(cat_totals[g_cur])
    )
    out = deltas + src_joint - gain - src_margin
    out[g_cur] = 0.0
    return out


def group_move_deltas_np(joint, state_totals, profile, s_cur, n_elem):
    """Criterion deltas for moving a coherent context group to every
    state.  ``profile[g]`` is the group's event count within category
    ``g``."""
    nz = np.nonzero(profile)[0]
    q = profile[nz].astype(np.float64)[None, :]
    cols = joint[:, nz].astype(np.float64)
    deltas = (_xlogx_arr(cols + q) - _xlogx_arr(cols)).sum(axis=1)

    js = joint[s_cur, nz].astype(np.float64)
    src_joint = float((_xlogx_arr(js - q[0, :]) - _xlogx_arr(js)).sum())

    m = state_totals.astype(np.float64)
    gain = _xlogx_arr(m + float(n_elem)) - _xlogx_arr(m)
    src_margin = _xlogx_scalar(float(state_totals[s_cur]) - n_elem) - _xlogx_scalar(
        float(state_totals[s_cur])
    )
    out = deltas + src_joint - gain - src_margin
    out[s_cur] = 0.0
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit(cache=True)
def _f(x):
    xf = np.float64(x)
    if xf > 0.0:
        return xf * np.log(xf)
    return 0.0


@njit(cache=True)
def criterion_value_jit(joint, state_totals, cat_totals):
    n_s, n_g = joint.shape
    acc = 0.0
    for s in range(n_s):
        for g in range(n_g):
            acc += _f(joint[s, g])
    for s in range(n_s):
        acc -= _f(state_totals[s])
    for g in range(n_g):
        acc -= _f(cat_totals[g])
    return acc


@njit(cache=True)
def word_move_deltas_jit(joint, cat_totals, profile, g_cur, n_elem):
    n_s, n_g = joint.shape
    deltas = np.zeros(n_g, dtype=np.float64)
    src_joint = 0.0
    for s in range(n_s):
        p = profile[s]
        if p == 0:
            continue
        row = joint[s]
        for t in range(n_g):
            a = row[t]
            deltas[t] += _f(a + p) - _f(a)
        a = row[g_cur]
        src_joint += _f(a - p) - _f(a)
    src_margin = _f(cat_totals[g_cur] - n_elem) - _f(cat_totals[g_cur])
    for t in range(n_g):
        m = cat_totals[t]
        deltas[t] += src_joint - (_f(m + n_elem) - _f(m)) - src_margin
    deltas[g_cur] = 0.0
    return deltas


@njit(cache=True)
def group_move_deltas_jit(joint, state_totals, profile, s_cur, n_elem):
    n_s, n_g = joint.shape
    nz = np.nonzero(profile)[0]
    deltas = np.zeros(n_s, dtype=np.float64)
    src_joint = 0.0
    row = joint[s_cur]
    for j in range(nz.size):
        a = row[nz[j]]
        q = profile[nz[j]]
        src_joint += _f(a - q) - _f(a)
    src_margin = _f(state_totals[s_cur] - n_elem) - _f(state_totals[s_cur])
    for t in range(n_s):
        acc = 0.0
        row_t = joint[t]
        for j in range(nz.size):
            a = row_t[nz[j]]
            q = profile[nz[j]]
            acc += _f(a + q) - _f(a)
        deltas[t] = acc + src_joint - (_f(state_totals[t] + n_elem) - _f(state_totals[t])) - src_margin
    deltas[s_cur] = 0.0
    return deltas


if USING_NUMBA:
    criterion_value = criterion_value_jit
    word_move_deltas = word_move_deltas_jit
    group_move_deltas = group_move_deltas_jit
else:
    criterion_value = criterion_value_np
    word_move_deltas = word_move_deltas_np
    group_move_deltas = group_move_deltas_np
