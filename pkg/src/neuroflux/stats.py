"""Wilcoxon signed-rank test and its cell-wise application to matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from .core import PValueMatrix
from .errors import AllZeroDifferences, LengthMismatch

EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    W: float
    p: float
    n: int
    mode: str


def _signed_ranks(a, b, zero_method):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise LengthMismatch(f"paired samples must be equal-length 1-D, got {a.shape}, {b.shape}")
    d = a - b
    if np.all(d == 0):
        raise AllZeroDifferences("all paired differences are zero")
    if zero_method == "wilcox":
        d = d[d != 0]
        r = rankdata(np.abs(d))
    elif zero_method == "pratt":
        r = rankdata(np.abs(d))
        r, d = r[d != 0], d[d != 0]
    else:
        raise ValueError(f"unknown zero_method {zero_method!r}")
    return d, r


def exact_null_counts(ranks):
    """Counts of sign patterns per value of ``2 * W``.

    Average ranks are multiples of 1/2, so doubled ranks are integers and the
    2**n patterns fold into a subset-sum table.
    """
    twice = np.rint(2 * np.asarray(ranks)).astype(int)
    counts = np.zeros(int(twice.sum()) + 1)
    counts[0] = 1.0
    for r in twice:
        counts[r:] = counts[r:] + counts[:-r]
    return counts


def _exact_p(w, ranks):
    counts = exact_null_counts(ranks)
    total = counts.sum()
    k = int(np.rint(2 * w))
    lower = counts[:k + 1].sum() / total
    upper = counts[k:].sum() / total
    return min(1.0, 2.0 * min(lower, upper))


def _approx_p(w, ranks):
    mu = ranks.sum() / 2.0
    # Var of sum of +/- r with fair signs; equals the tie-corrected formula.
    sd = np.sqrt(np.sum(ranks ** 2) / 4.0)
    dev = abs(w - mu) - 0.5
    if dev <= 0 or sd == 0:
        return 1.0
    return float(min(1.0, 2.0 * norm.sf(dev / sd)))


def wilcoxon_signed_rank(a, b, mode="AUTO", zero_method="wilcox"):
    """Two-sided Wilcoxon signed-rank test of ``a - b``.

    Parameters
    ----------
    a, b : array_like
        Paired samples.
    mode : {"EXACT", "APPROX", "AUTO"}
        Exact null distribution, normal approximation (continuity and tie
        corrected), or exact when at most 25 nonzero differences remain.
    zero_method : {"wilcox", "pratt"}
        Discard zero differences before ranking, or rank them and then drop.

    Returns
    -------
    WilcoxonResult
        ``W`` is the sum of ranks of positive differences.
    """
    d, r = _signed_ranks(a, b, zero_method)
    n = d.size
    w = float(r[d > 0].sum())
    mode = str(mode).upper()
    if mode == "AUTO":
        mode = "EXACT" if n <= EXACT_MAX_N else "APPROX"
    if mode == "EXACT":
        p = _exact_p(w, r)
    elif mode == "APPROX":
        p = _approx_p(w, r)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return WilcoxonResult(w, p, n, mode)


def holm(p):
    """Holm step-down adjusted p-values (same order as input)."""
    p = np.asarray(p, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.maximum.accumulate((m - np.arange(m)) * p[order])
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def pairwise_matrix_test(A, B, mode="AUTO", correction=None, zero_method="wilcox"):
    """Test every cell of paired per-subject matrices.

    Parameters
    ----------
    A, B : sequence of ConnectivityMatrix or arrays
        One matrix per subject for each condition.
    correction : {None, "holm"}
        Multiple-comparison adjustment over the tested cells.

    Returns
    -------
    PValueMatrix
        Cells whose differences are all zero get ``p = 1``, ``W = 0``,
        ``n_effective = 0`` and ``degenerate = True``. For symmetric metrics
        the upper triangle is tested and mirrored.
    """
    A, B = list(A), list(B)
    if len(A) != len(B):
        raise LengthMismatch(f"{len(A)} subjects in A but {len(B)} in B")
    if not A:
        raise LengthMismatch("no subjects")
    metric = getattr(A[0], "metric", None)
    if metric is not None and getattr(B[0], "metric", None) != metric:
        from .errors import MetricMismatch
        raise MetricMismatch("conditions hold different metrics")
    directed = getattr(A[0], "directed", True)
    labels = getattr(A[0], "labels", None)
    a = np.stack([np.asarray(getattr(m, "values", m), dtype=float) for m in A])
    b = np.stack([np.asarray(getattr(m, "values", m), dtype=float) for m in B])
    n = a.shape[1]
    p = np.ones((n, n))
    W = np.zeros((n, n))
    n_eff = np.zeros((n, n), dtype=int)
    deg = np.zeros((n, n), dtype=bool)
    cells = [(i, j) for i in range(n) for j in range(n) if directed or j >= i]
    tested = []
    for i, j in cells:
        try:
            res = wilcoxon_signed_rank(a[:, i, j], b[:, i, j], mode, zero_method)
        except AllZeroDifferences:
            deg[i, j] = True
            continue
        p[i, j], W[i, j], n_eff[i, j] = res.p, res.W, res.n
        tested.append((i, j))
    if correction == "holm" and tested:
        idx = tuple(np.array(tested).T)
        p[idx] = holm(p[idx])
    elif correction not in (None, "none", "holm"):
        raise ValueError(f"unknown correction {correction!r}")
    if not directed:
        for arr in (p, W, n_eff, deg):
            low = np.tril_indices(n, -1)
            arr[low] = arr.T[low]
    return PValueMatrix(p, W, n_eff, metric, deg, labels)


def significance_mask(pm, alpha=0.05):
    """``p < alpha`` elementwise (strict), as 0/1 integers."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    p = getattr(pm, "p", pm)
    return (np.asarray(p) < alpha).astype(int)
