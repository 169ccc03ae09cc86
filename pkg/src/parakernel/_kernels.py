"""Hot inner loops, with a numba path and a pure-numpy path.

Both paths compute the same thing; ``_jit.HAVE_NUMBA`` picks one at import.
The numpy versions are always importable so the benchmark can compare them.
"""
import numpy as np
from scipy import sparse

from ._jit import HAVE_NUMBA, njit

_CHUNK = 4096


def _mul_rows_py(P, Q, ia, ib, ic, ncoef):
    B = P.shape[0]
    out = np.zeros((B, ncoef))
    npairs = ia.shape[0]
    for b in range(B):
        for p in range(npairs):
            pa = P[b, ia[p]]
            if pa != 0.0:
                out[b, ic[p]] += pa * Q[b, ib[p]]
    return out


_mul_rows_jit = njit(cache=True)(_mul_rows_py) if HAVE_NUMBA else None


def _scatter_matrix(ic, ncoef):
    npairs = ic.shape[0]
    return sparse.csr_matrix(
        (np.ones(npairs), (np.arange(npairs), ic)), shape=(npairs, ncoef)
    )


def mul_rows_numpy(P, Q, ia, ib, ic, ncoef, scatter=None):
    """Row-wise truncated polynomial product using dense gathers + a sparse scatter."""
    if scatter is None:
        scatter = _scatter_matrix(ic, ncoef)
    B = P.shape[0]
    out = np.empty((B, ncoef))
    for lo in range(0, B, _CHUNK):
        hi = min(lo + _CHUNK, B)
        prod = P[lo:hi, ia] * Q[lo:hi, ib]
        out[lo:hi] = (scatter.T @ prod.T).T
    return out


def mul_rows_numba(P, Q, ia, ib, ic, ncoef):
    if _mul_rows_jit is None:
        raise RuntimeError("numba backend is disabled")
    return _mul_rows_jit(
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(Q, dtype=np.float64),
        ia, ib, ic, ncoef,
    )


def mul_rows(P, Q, ia, ib, ic, ncoef, scatter=None):
    """Truncated product of two batches of coefficient rows, shape (B, ncoef)."""
    if HAVE_NUMBA:
        return mul_rows_numba(P, Q, ia, ib, ic, ncoef)
    return mul_rows_numpy(P, Q, ia, ib, ic, ncoef, scatter)


def _dropped_py(P, Q, degs, cap):
    B = P.shape[0]
    maxdeg = cap
    for i in range(degs.shape[0]):
        if degs[i] > maxdeg:
            maxdeg = degs[i]
    out = np.zeros(B, dtype=np.int64)
    hp = np.zeros(maxdeg + 1, dtype=np.int64)
    hq = np.zeros(maxdeg + 1, dtype=np.int64)
    for b in range(B):
        hp[:] = 0
        hq[:] = 0
        for i in range(degs.shape[0]):
            if P[b, i] != 0.0:
                hp[degs[i]] += 1
            if Q[b, i] != 0.0:
                hq[degs[i]] += 1
        count = 0
        for i in range(maxdeg + 1):
            if hp[i] == 0:
                continue
            for j in range(maxdeg + 1):
                if i + j > cap:
                    count += hp[i] * hq[j]
        out[b] = count
    return out


_dropped_jit = njit(cache=True)(_dropped_py) if HAVE_NUMBA else None


def dropped_numpy(P, Q, degs, cap):
    """Vectorized count: degree histograms of the nonzero entries, then a masked outer sum."""
    size = max(int(degs.max()), cap) + 1
    onehot = np.zeros((degs.shape[0], size))
    onehot[np.arange(degs.shape[0]), degs] = 1.0
    hp = (P != 0.0) @ onehot
    hq = (Q != 0.0) @ onehot
    over = np.add.outer(np.arange(size), np.arange(size)) > cap
    return np.einsum("bi,ij,bj->b", hp, over, hq).round().astype(np.int64)


def dropped_products(P, Q, degs, cap):
    """Number of nonzero monomial products per row that exceed the degree cap."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if HAVE_NUMBA:
        return _dropped_jit(P, Q, degs, cap)
    return dropped_numpy(P, Q, degs, cap)
