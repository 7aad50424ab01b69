"""Static 2-D orthogonal range-sum index (merge-sort tree)."""
from __future__ import annotations

import numpy as np


class RangeSumTree:
    """Weighted range sums over points stored in a fixed order.

    Points keep their storage order (the *index* axis). A query asks for the
    total weight of points whose storage index lies in ``[ilo, ihi)`` and whose
    value lies in the closed interval ``[vlo, vhi]``. Queries are vectorized
    and cost ``O(log^2 n)`` each.

    Parameters
    ----------
    values : ndarray, shape (n,)
        Secondary coordinate of each point, in storage order.
    weights : ndarray, shape (n,)
        Non-negative weights.

    Notes
    -----
    Each tree level stores, per block, the value ranks sorted inside the block
    together with prefix sums of the weights. Keys are encoded as
    ``block * (n + 1) + rank`` so one ``searchsorted`` call serves a whole
    batch of queries on a level.
    """

    def __init__(self, values, weights):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        n = len(values)
        size = 1
        while size < n:
            size *= 2
        self.n = n
        self.size = size
        order = np.argsort(values, kind="stable")
        self.sorted_values = values[order]
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        padded_rank = np.full(size, n, dtype=np.int64)
        padded_rank[:n] = rank
        padded_w = np.zeros(size)
        padded_w[:n] = weights
        self._keys = []
        self._cumw = []
        block = 1
        while block <= size:
            nb = size // block
            r2 = padded_rank.reshape(nb, block)
            o = np.argsort(r2, axis=1, kind="stable")
            srt = np.take_along_axis(r2, o, axis=1)
            ws = np.take_along_axis(padded_w.reshape(nb, block), o, axis=1)
            self._keys.append((np.arange(nb, dtype=np.int64)[:, None] * (n + 1) + srt).ravel())
            self._cumw.append(np.concatenate([[0.0], np.cumsum(ws.ravel())]))
            block *= 2

    def query(self, ilo, ihi, vlo, vhi) -> np.ndarray:
        """Total weight with index in ``[ilo, ihi)`` and value in ``[vlo, vhi]``."""
        vlo = np.atleast_1d(np.asarray(vlo, dtype=float))
        vhi = np.atleast_1d(np.asarray(vhi, dtype=float))
        a = np.searchsorted(self.sorted_values, vlo, side="left")
        b = np.searchsorted(self.sorted_values, vhi, side="right")
        a, b = np.broadcast_arrays(a, b)
        lo = np.clip(np.broadcast_to(ilo, a.shape), 0, self.size).astype(np.int64)
        hi = np.clip(np.broadcast_to(ihi, a.shape), 0, self.size).astype(np.int64)
        out = np.zeros(a.shape)
        stride = self.n + 1
        for key, cumw in zip(self._keys, self._cumw):
            active = lo < hi
            if not active.any():
                break
            m = active & (lo & 1 == 1)
            if m.any():
                bid = lo[m]
                p1 = np.searchsorted(key, bid * stride + a[m])
                p2 = np.searchsorted(key, bid * stride + b[m])
                out[m] += cumw[p2] - cumw[p1]
                lo[m] += 1
            m = active & (hi & 1 == 1)
            if m.any():
                hi[m] -= 1
                bid = hi[m]
                p1 = np.searchsorted(key, bid * stride + a[m])
                p2 = np.searchsorted(key, bid * stride + b[m])
                out[m] += cumw[p2] - cumw[p1]
            lo //= 2
            hi //= 2
        return out
