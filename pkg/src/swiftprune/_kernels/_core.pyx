# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: initializedcheck=False
# cython: cdivision=True
"""Compiled inner loops: streaming EWMA pruning, N:M group selection and
dense Hessian probes.

Must stay numerically identical to swiftprune._kernels.pyref: same operation
order, no fused multiply-adds (built with -ffp-contract=off). Shared
conventions (mask/stats layout, return codes, +inf guard sentinel) are
documented in pyref's module docstring.
"""

from libc.math cimport fabs, isfinite, sqrt, INFINITY

BACKEND = "compiled"


cdef int _ewma_row(const double* w, const double* x_sq, Py_ssize_t n,
                   double s0, double alpha, double beta, double la,
                   double eps_den, double eps_floor,
                   unsigned char* mask, double* l_out, double* est_out,
                   double* dev_out, long long* stats) noexcept nogil:
    cdef double s = s0
    cdef double est = 0.0
    cdef double dev = 0.0
    cdef bint started = False
    cdef long long pruned = 0
    cdef long long guards = 0
    cdef long long clamped = 0
    cdef double wi, den, score, s_next
    cdef Py_ssize_t i
    for i in range(n):
        wi = w[i]
        den = 1.0 - x_sq[i] / s
        if den > eps_den:
            score = 0.5 * wi * wi / den
            if not isfinite(score):
                stats[0] = pruned
                stats[1] = guards
                stats[2] = clamped
                return <int> (i + 1)
            if not started:
                est = score
                started = True
            if score < est - la * dev:
                mask[i] = 0
                pruned += 1
                s_next = s - wi * wi
                if s_next <= eps_floor:
                    s = eps_floor
                    clamped = 1
                else:
                    s = s_next
            else:
                mask[i] = 1
            est = est + alpha * (score - est)
            dev = dev + beta * (fabs(est - score) - dev)
        else:
            guards += 1
            mask[i] = 1
            score = INFINITY
        if l_out != NULL:
            l_out[i] = score
            est_out[i] = est
            dev_out[i] = dev
    stats[0] = pruned
    stats[1] = guards
    stats[2] = clamped
    return 0


def ewma_prune_block(const double[:, ::1] w, const double[::1] x_sq, double s0,
                     double alpha, double beta, double la,
                     double eps_den, double eps_floor,
                     unsigned char[:, ::1] mask_out, long long[:, ::1] stats_out):
    cdef Py_ssize_t rows = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    cdef Py_ssize_t r
    cdef int err = 0
    cdef Py_ssize_t bad_row = -1
    with nogil:
        for r in range(rows):
            err = _ewma_row(&w[r, 0], &x_sq[0], n, s0, alpha, beta, la,
                            eps_den, eps_floor, &mask_out[r, 0],
                            NULL, NULL, NULL, &stats_out[r, 0])
            if err != 0:
                bad_row = r
                break
    if err != 0:
        return bad_row, err
    return -1, 0


def ewma_trace_row(const double[::1] w_row, const double[::1] x_sq, double s0,
                   double alpha, double beta, double la,
                   double eps_den, double eps_floor,
                   unsigned char[::1] mask_out, double[::1] l_out,
                   double[::1] est_out, double[::1] dev_out):
    cdef long long stats[3]
    cdef int err
    with nogil:
        err = _ewma_row(&w_row[0], &x_sq[0], w_row.shape[0], s0, alpha, beta, la,
                        eps_den, eps_floor, &mask_out[0],
                        &l_out[0], &est_out[0], &dev_out[0], stats)
    return stats[0], stats[1], stats[2], err


cdef int _select_row(const double* scores, Py_ssize_t n, double alpha, double beta,
                     double la, unsigned char* mask, double* est_out,
                     double* dev_out, long long* stats) noexcept nogil:
    cdef double est = 0.0
    cdef double dev = 0.0
    cdef bint started = False
    cdef long long pruned = 0
    cdef long long guards = 0
    cdef double score
    cdef Py_ssize_t i
    for i in range(n):
        score = scores[i]
        if score == INFINITY:
            guards += 1
            mask[i] = 1
        elif not isfinite(score):
            stats[0] = pruned
            stats[1] = guards
            return <int> (i + 1)
        else:
            if not started:
                est = score
                started = True
            if score < est - la * dev:
                mask[i] = 0
                pruned += 1
            else:
                mask[i] = 1
            est = est + alpha * (score - est)
            dev = dev + beta * (fabs(est - score) - dev)
        if est_out != NULL:
            est_out[i] = est
            dev_out[i] = dev
    stats[0] = pruned
    stats[1] = guards
    return 0


def ewma_select_block(const double[:, ::1] scores, double alpha, double beta,
                      double la, unsigned char[:, ::1] mask_out,
                      long long[:, ::1] stats_out):
    cdef Py_ssize_t rows = scores.shape[0]
    cdef Py_ssize_t n = scores.shape[1]
    cdef Py_ssize_t r
    cdef int err = 0
    cdef Py_ssize_t bad_row = -1
    with nogil:
        for r in range(rows):
            err = _select_row(&scores[r, 0], n, alpha, beta, la,
                              &mask_out[r, 0], NULL, NULL, &stats_out[r, 0])
            stats_out[r, 2] = 0
            if err != 0:
                bad_row = r
                break
    if err != 0:
        return bad_row, err
    return -1, 0


def ewma_select_trace_row(const double[::1] scores, double alpha, double beta,
                          double la, unsigned char[::1] mask_out,
                          double[::1] est_out, double[::1] dev_out):
    cdef long long stats[3]
    cdef int err
    with nogil:
        err = _select_row(&scores[0], scores.shape[0], alpha, beta, la,
                          &mask_out[0], &est_out[0], &dev_out[0], stats)
    return stats[0], stats[1], err


cdef void _nm_row(const double* scores, Py_ssize_t n, int n_keep, int m_group,
                  unsigned char* mask) noexcept nogil:
    # Repeated first-minimum extraction: ties prune the lower index first,
    # matching a stable ascending argsort.
    cdef Py_ssize_t base = 0
    cdef int d, j, best
    cdef int drop = m_group - n_keep
    while base < n:
        for j in range(m_group):
            mask[base + j] = 1
        for d in range(drop):
            best = -1
            for j in range(m_group):
                if mask[base + j] and (best < 0 or scores[base + j] < scores[base + best]):
                    best = j
            mask[base + best] = 0
        base += m_group


def nm_select_block(const double[:, ::1] scores, int n_keep, int m_group,
                    unsigned char[:, ::1] mask_out):
    cdef Py_ssize_t rows = scores.shape[0]
    cdef Py_ssize_t n = scores.shape[1]
    cdef Py_ssize_t r
    with nogil:
        for r in range(rows):
            _nm_row(&scores[r, 0], n, n_keep, m_group, &mask_out[r, 0])


cdef int _hess_inv_diag(const double* x, Py_ssize_t n, double s0,
                        double* h, double* y, double* diag) noexcept nogil:
    # Build H = 2 x x^T + (2 s0 / n) I (lower triangle), factor in place,
    # then (H^-1)_qq = || L^-1 e_q ||^2 via one forward solve per q.
    cdef Py_ssize_t i, j, k, q
    cdef double damp = 2.0 * s0 / <double> n
    cdef double acc
    for i in range(n):
        for j in range(i + 1):
            h[i * n + j] = 2.0 * x[i] * x[j]
        h[i * n + i] += damp
    for k in range(n):
        acc = h[k * n + k]
        for j in range(k):
            acc -= h[k * n + j] * h[k * n + j]
        if acc <= 0.0:
            return <int> (k + 1)
        h[k * n + k] = sqrt(acc)
        for i in range(k + 1, n):
            acc = h[i * n + k]
            for j in range(k):
                acc -= h[i * n + j] * h[k * n + j]
            h[i * n + k] = acc / h[k * n + k]
    for q in range(n):
        y[q] = 1.0 / h[q * n + q]
        acc = y[q] * y[q]
        for i in range(q + 1, n):
            damp = 0.0
            for j in range(q, i):
                damp += h[i * n + j] * y[j]
            y[i] = -damp / h[i * n + i]
            acc += y[i] * y[i]
        diag[q] = acc
    return 0


def hessian_inv_diag(const double[::1] x, double s0, double[:, ::1] h_scratch,
                     double[::1] y_scratch, double[::1] diag_out):
    cdef int err
    with nogil:
        err = _hess_inv_diag(&x[0], x.shape[0], s0, &h_scratch[0, 0],
                             &y_scratch[0], &diag_out[0])
    return err


cdef void _prune_k_smallest(const double* s, Py_ssize_t n, Py_ssize_t k,
                            unsigned char* mask) noexcept nogil:
    cdef Py_ssize_t d, j, best
    for j in range(n):
        mask[j] = 1
    for d in range(k):
        best = -1
        for j in range(n):
            if mask[j] and (best < 0 or s[j] < s[best]):
                best = j
        mask[best] = 0


def oracle_prune_block(const double[:, ::1] w, const double[::1] x, double s0,
                       Py_ssize_t k_prune, double[:, ::1] h_scratch,
                       double[::1] y_scratch, double[::1] diag_scratch,
                       double[::1] score_scratch, unsigned char[:, ::1] mask_out):
    """Exact-score pruner; re-factorizes H for every row to model the
    per-row cost of exact scoring."""
    cdef Py_ssize_t rows = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    cdef Py_ssize_t r, j
    cdef int err = 0
    cdef Py_ssize_t bad_row = -1
    with nogil:
        for r in range(rows):
            err = _hess_inv_diag(&x[0], n, s0, &h_scratch[0, 0],
                                 &y_scratch[0], &diag_scratch[0])
            if err != 0:
                bad_row = r
                break
            for j in range(n):
                score_scratch[j] = 0.5 * w[r, j] * w[r, j] / diag_scratch[j]
            _prune_k_smallest(&score_scratch[0], n, k_prune, &mask_out[r, 0])
    if err != 0:
        return bad_row, err
    return -1, 0
