# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled hot kernels: CSR block matvec, strided inner product, axpby.

Mirrors _numpy_impl; single-threaded, so every mode is reproducible, and the
deterministic inner-product mode uses the same fixed row-chunk fold."""

name = "compiled"


def csr_matvec(const long long[::1] indptr, const long long[::1] indices,
               const double[::1] data, const double[::1, :] x, double[::1, :] out):
    cdef Py_ssize_t nrow = indptr.shape[0] - 1
    cdef Py_ssize_t ncol = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc
    for c in range(ncol):
        for i in range(nrow):
            acc = 0.0
            for j in range(indptr[i], indptr[i + 1]):
                acc += data[j] * x[indices[j], c]
            out[i, c] = acc
    return out


def inner_product(const double[::1, :] x, const double[::1, :] y,
                  double[:, :] out, Py_ssize_t chunk, bint deterministic):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t kx = x.shape[1]
    cdef Py_ssize_t ky = y.shape[1]
    cdef Py_ssize_t r, c, i, start, stop
    cdef double acc
    if not deterministic or chunk <= 0:
        chunk = n
    for c in range(ky):
        for r in range(kx):
            out[r, c] = 0.0
    start = 0
    while start < n:
        stop = start + chunk
        if stop > n:
            stop = n
        for c in range(ky):
            for r in range(kx):
                acc = 0.0
                for i in range(start, stop):
                    acc += x[i, r] * y[i, c]
                out[r, c] += acc
        start = stop
    return out


def axpby(double alpha, const double[::1, :] x, double beta, double[::1, :] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    cdef Py_ssize_t i, c
    if beta == 0.0:
        for c in range(k):
            for i in range(n):
                y[i, c] = alpha * x[i, c]
    else:
        for c in range(k):
            for i in range(n):
                y[i, c] = alpha * x[i, c] + beta * y[i, c]
    return y
