"""Edit-distance kernels used by entity linking and fuzzy column matching.

This is the one hot numeric loop in the package: linking scans every
question span against every cell value, so a single evaluation run makes
hundreds of thousands of distance calls.  The kernel is JIT-compiled with
numba when available; setting ``STEPSQL_NO_NUMBA=1`` (or running without
numba installed) selects a vectorized pure-numpy fallback.  Both paths
compute the same bounded Levenshtein distance; ``benchmarks/bench_matching.py``
compares them.
"""

from __future__ import annotations

import os
import re

import numpy as np

_NO_LIMIT = 1 << 30


def _codepoints(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def _levenshtein_kernel(a, b, limit):  # pragma: no cover - compiled/njit body
    n = b.shape[0]
    prev = np.empty(n + 1, dtype=np.int64)
    cur = np.empty(n + 1, dtype=np.int64)
    for j in range(n + 1):
        prev[j] = j
    for i in range(a.shape[0]):
        cur[0] = i + 1
        row_min = cur[0]
        ai = a[i]
        for j in range(n):
            cost = 0 if ai == b[j] else 1
            best = prev[j] + cost
            if prev[j + 1] + 1 < best:
                best = prev[j + 1] + 1
            if cur[j] + 1 < best:
                best = cur[j] + 1
            cur[j + 1] = best
            if best < row_min:
                row_min = best
        if row_min > limit:
            return limit + 1
        prev, cur = cur, prev
    d = prev[n]
    return d if d <= limit else limit + 1


def _levenshtein_numpy(a: np.ndarray, b: np.ndarray, limit: int) -> int:
    n = b.shape[0]
    prev = np.arange(n + 1, dtype=np.int64)
    idx = np.arange(n + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        # candidate cost without the in-row deletion chain
        t = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i]))
        # cur[j] = min(t[j-1], cur[j-1] + 1) via a running-min transform:
        # d[j] = cur[j] - j is the prefix minimum of (t[j-1] - j) seeded with i+1
        shifted = np.empty(n + 1, dtype=np.int64)
        shifted[0] = i + 1
        shifted[1:] = t - idx[1:]
        cur = np.minimum.accumulate(shifted) + idx
        if cur.min() > limit:
            return limit + 1
        prev = cur
    d = int(prev[n])
    return d if d <= limit else limit + 1


def _build_numba_kernel():
    from numba import njit

    return njit(cache=True)(_levenshtein_kernel)


_DISABLED = os.environ.get("STEPSQL_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

if not _DISABLED:
    try:
        _kernel = _build_numba_kernel()
        BACKEND = "numba"
    except ImportError:
        _kernel = _levenshtein_numpy
        BACKEND = "numpy"
else:
    _kernel = _levenshtein_numpy
    BACKEND = "numpy"


def backend_name() -> str:
    """Name of the active kernel implementation (``numba`` or ``numpy``)."""
    return BACKEND


def edit_distance(a: str, b: str, limit: int | None = None) -> int:
    """Levenshtein distance between ``a`` and ``b``.

    With ``limit`` set, any distance above it is reported as ``limit + 1``
    (the exact value is still returned when it is ``<= limit``).
    Comparison is codepoint-exact; callers fold case before calling.
    """
    lim = _NO_LIMIT if limit is None else int(limit)
    if lim < 0:
        raise ValueError("limit must be non-negative")
    la, lb = len(a), len(b)
    if abs(la - lb) > lim:
        return lim + 1
    if la == 0:
        return lb
    if lb == 0:
        return la
    if a == b:
        return 0
    return int(_kernel(_codepoints(a), _codepoints(b), lim))


def within_distance(a: str, b: str, max_distance: int) -> bool:
    """True when edit_distance(a, b) <= max_distance."""
    return edit_distance(a, b, limit=max_distance) <= max_distance


_NUMERAL_RE = re.compile(r"-?(?:\d+\.?\d*|\.\d+)\Z")

MIN_FUZZY_SPAN_LEN = 4


def guarded_distance(
    span: str, value: str, limit: int, min_fuzzy_len: int = MIN_FUZZY_SPAN_LEN
) -> int | None:
    """Edit distance with the matching guards shared by linking, tagging,
    and filling: numeric spans and numeric values match exactly only, and a
    fuzzy (nonzero-distance) match needs at least ``min_fuzzy_len``
    characters of span.  Returns None when the guards reject the pair or
    the distance exceeds ``limit``.  Case is folded here.
    """
    folded_span = span.casefold()
    folded_value = value.casefold()
    if _NUMERAL_RE.fullmatch(folded_span) or _NUMERAL_RE.fullmatch(folded_value):
        return 0 if folded_span == folded_value else None
    if len(span) < min_fuzzy_len:
        return 0 if folded_span == folded_value else None
    d = edit_distance(folded_span, folded_value, limit=limit)
    return d if d <= limit else None
