"""numpy fallback implementations of the hot kernels.

Same call signatures as the compiled module; selected when the extension is
not built (or when GCGEIG_BACKEND=numpy).
"""

import numpy as np

name = "numpy"


def csr_matvec(indptr, indices, data, x, out):
    # column-at-a-time keeps the Fortran-ordered output contiguous per column
    import scipy.sparse

    n = indptr.shape[0] - 1
    sp = scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, x.shape[0]))
    for j in range(x.shape[1]):
        out[:, j] = sp @ x[:, j]
    return out


def inner_product(x, y, out, chunk, deterministic):
    if not deterministic or chunk <= 0 or chunk >= x.shape[0]:
        np.matmul(x.T, y, out=out)
        return out
    # fixed-order fold over row chunks: bit-stable across runs
    out[...] = 0.0
    n = x.shape[0]
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        out += x[start:stop].T @ y[start:stop]
    return out


def axpby(alpha, x, beta, y):
    if beta == 0.0:
        if alpha == 0.0:
            y[...] = 0.0
        else:
            np.multiply(x, alpha, out=y)
    else:
        if beta != 1.0:
            y *= beta
        if alpha != 0.0:
            y += alpha * x
    return y
