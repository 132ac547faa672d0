"""Compiled inner loops for CSR operators, smoothers and setup.

Everything here works on raw ``(indptr, indices, data)`` arrays so that the
public wrappers in :mod:`flexmg.sparse`, :mod:`flexmg.amg` and
:mod:`flexmg.engine` stay thin.
"""
import numba as nb
import numpy as np

_jit = {"nogil": True, "cache": True}


@nb.njit(**_jit)
def csr_matvec(indptr, indices, data, x, y):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        y[i] = s


@nb.njit(**_jit)
def csr_residual(indptr, indices, data, x, f, r):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        r[i] = f[i] - s


@nb.njit(**_jit)
def csr_transpose(nrows, ncols, indptr, indices, data):
    nnz = indptr[nrows]
    t_ptr = np.zeros(ncols + 1, dtype=np.int64)
    for k in range(nnz):
        t_ptr[indices[k] + 1] += 1
    for j in range(ncols):
        t_ptr[j + 1] += t_ptr[j]
    fill = t_ptr[:-1].copy()
    t_ind = np.empty(nnz, dtype=np.int64)
    t_dat = np.empty(nnz, dtype=np.float64)
    # Row-major scan of the source keeps each output row sorted.
    for i in range(nrows):
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            dst = fill[j]
            t_ind[dst] = i
            t_dat[dst] = data[k]
            fill[j] += 1
    return t_ptr, t_ind, t_dat


@nb.njit(**_jit)
def csr_matmat(nrows, ncols, a_ptr, a_ind, a_dat, b_ptr, b_ind, b_dat):
    """Gustavson product; structural entries are kept even if they sum to 0."""
    marker = np.full(ncols, -1, dtype=np.int64)
    c_ptr = np.zeros(nrows + 1, dtype=np.int64)
    for i in range(nrows):
        cnt = 0
        for ka in range(a_ptr[i], a_ptr[i + 1]):
            j = a_ind[ka]
            for kb in range(b_ptr[j], b_ptr[j + 1]):
                col = b_ind[kb]
                if marker[col] != i:
                    marker[col] = i
                    cnt += 1
        c_ptr[i + 1] = c_ptr[i] + cnt
    nnz = c_ptr[nrows]
    c_ind = np.empty(nnz, dtype=np.int64)
    c_dat = np.empty(nnz, dtype=np.float64)
    acc = np.zeros(ncols, dtype=np.float64)
    marker[:] = -1
    for i in range(nrows):
        start = c_ptr[i]
        pos = start
        for ka in range(a_ptr[i], a_ptr[i + 1]):
            j = a_ind[ka]
            av = a_dat[ka]
            for kb in range(b_ptr[j], b_ptr[j + 1]):
                col = b_ind[kb]
                if marker[col] != i:
                    marker[col] = i
                    c_ind[pos] = col
                    acc[col] = av * b_dat[kb]
                    pos += 1
                else:
                    acc[col] += av * b_dat[kb]
        row = np.sort(c_ind[start:pos])
        for p in range(pos - start):
            c_ind[start + p] = row[p]
            c_dat[start + p] = acc[row[p]]
    return c_ptr, c_ind, c_dat


@nb.njit(**_jit)
def csr_diagonal(indptr, indices, data):
    n = indptr.shape[0] - 1
    d = np.zeros(n)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] == i:
                d[i] = data[k]
    return d


# --------------------------------------------------------------------------
# Smoothers. ``x`` is updated in place.
# --------------------------------------------------------------------------

@nb.njit(**_jit)
def jacobi_sweep(indptr, indices, data, diag, x, f, omega, work):
    n = x.shape[0]
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        work[i] = omega * (f[i] - s) / diag[i]
    for i in range(n):
        x[i] += work[i]


@nb.njit(**_jit)
def gs_forward_sweep(indptr, indices, data, diag, x, f, omega):
    n = x.shape[0]
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        x[i] += omega * (f[i] - s) / diag[i]


@nb.njit(**_jit)
def gs_backward_sweep(indptr, indices, data, diag, x, f, omega):
    n = x.shape[0]
    for i in range(n - 1, -1, -1):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        x[i] += omega * (f[i] - s) / diag[i]


# --------------------------------------------------------------------------
# Setup phase
# --------------------------------------------------------------------------

@nb.njit(**_jit)
def strength_rows(indptr, indices, data, theta):
    n = indptr.shape[0] - 1
    keep = np.zeros(indptr[n], dtype=np.bool_)
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        rmax = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] > rmax:
                rmax = -data[k]
        if rmax <= 0.0:
            continue
        cut = theta * rmax
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] >= cut:
                keep[k] = True
                counts[i + 1] += 1
    for i in range(n):
        counts[i + 1] += counts[i]
    s_ind = np.empty(counts[n], dtype=np.int64)
    pos = 0
    for k in range(indptr[n]):
        if keep[k]:
            s_ind[pos] = indices[k]
            pos += 1
    return counts, s_ind


@nb.njit(**_jit)
def pmis_split(s_ptr, s_ind, g_ptr, g_ind, weights):
    """Parallel-MIS rounds on the symmetrized graph ``g``.

    Returns labels 1 (C) / 0 (F).
    """
    n = g_ptr.shape[0] - 1
    UNDECIDED, F, C = -1, 0, 1
    label = np.full(n, UNDECIDED, dtype=np.int64)
    remaining = 0
    for i in range(n):
        if g_ptr[i + 1] == g_ptr[i]:
            label[i] = F
        else:
            remaining += 1
    new_c = np.zeros(n, dtype=np.bool_)
    while remaining > 0:
        new_c[:] = False
        for i in range(n):
            if label[i] != UNDECIDED:
                continue
            wins = True
            for k in range(g_ptr[i], g_ptr[i + 1]):
                j = g_ind[k]
                if label[j] == UNDECIDED and weights[j] >= weights[i]:
                    if weights[j] > weights[i] or j < i:
                        wins = False
                        break
            if wins:
                new_c[i] = True
        for i in range(n):
            if new_c[i]:
                label[i] = C
                remaining -= 1
        for i in range(n):
            if new_c[i]:
                for k in range(g_ptr[i], g_ptr[i + 1]):
                    j = g_ind[k]
                    if label[j] == UNDECIDED:
                        label[j] = F
                        remaining -= 1
    # Second pass: an F point that strongly depends on others but on no C
    # point is promoted (only reachable when the strength graph is not
    # symmetric).
    for i in range(n):
        if label[i] != F or s_ptr[i + 1] == s_ptr[i]:
            continue
        has_c = False
        for k in range(s_ptr[i], s_ptr[i + 1]):
            if label[s_ind[k]] == C:
                has_c = True
                break
        if not has_c:
            label[i] = C
    return label


@nb.njit(**_jit)
def direct_interp(a_ptr, a_ind, a_dat, s_ptr, s_ind, label, coarse_index):
    """Returns (indptr, indices, data, n_degenerate) of the prolongator."""
    n = a_ptr.shape[0] - 1
    is_strong = np.zeros(n, dtype=np.int64) - 1
    p_ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if label[i] == 1:
            p_ptr[i + 1] = 1
            continue
        cnt = 0
        for k in range(s_ptr[i], s_ptr[i + 1]):
            if label[s_ind[k]] == 1:
                cnt += 1
        p_ptr[i + 1] = cnt
    for i in range(n):
        p_ptr[i + 1] += p_ptr[i]
    nnz = p_ptr[n]
    p_ind = np.empty(nnz, dtype=np.int64)
    p_dat = np.zeros(nnz, dtype=np.float64)
    degenerate = 0
    for i in range(n):
        start = p_ptr[i]
        if label[i] == 1:
            p_ind[start] = coarse_index[i]
            p_dat[start] = 1.0
            continue
        if p_ptr[i + 1] == start:
            continue
        for k in range(s_ptr[i], s_ptr[i + 1]):
            j = s_ind[k]
            if label[j] == 1:
                is_strong[j] = i
        diag = 0.0
        sum_all = 0.0
        sum_c = 0.0
        for k in range(a_ptr[i], a_ptr[i + 1]):
            j = a_ind[k]
            if j == i:
                diag = a_dat[k]
            else:
                sum_all += a_dat[k]
                if is_strong[j] == i:
                    sum_c += a_dat[k]
        pos = start
        for k in range(a_ptr[i], a_ptr[i + 1]):
            j = a_ind[k]
            if j != i and is_strong[j] == i:
                p_ind[pos] = coarse_index[j]
                if sum_c != 0.0:
                    p_dat[pos] = -(a_dat[k] / diag) * (sum_all / sum_c)
                pos += 1
        if sum_c == 0.0:
            degenerate += 1
        # A rows are sorted and coarse_index is monotone in j, so P rows are too.
    return p_ptr, p_ind, p_dat, degenerate
