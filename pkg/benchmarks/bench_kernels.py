"""Compare the compiled kernel core against the numpy fallback.

Times the three hot kernels in isolation and one end-to-end solve per
backend.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--n 20000] [--cols 16] [--repeat 7]
"""

import argparse
import time

import numpy as np
import scipy.sparse

from gcgeig import SolverConfig, gcg_solve
from gcgeig import _kernels as kernels


def best_of(repeat, fn):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_problem(n, cols, seed):
    rng = np.random.default_rng(seed)
    a = scipy.sparse.diags(
        [np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)],
        offsets=[-1, 0, 1],
        format="csr",
    )
    x = np.asfortranarray(rng.standard_normal((n, cols)))
    y = np.asfortranarray(rng.standard_normal((n, cols)))
    return a, x, y


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--cols", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    a, x, y = build_problem(args.n, args.cols, seed=0)
    indptr = a.indptr.astype(np.int64)
    indices = a.indices.astype(np.int64)
    data = a.data.astype(np.float64)
    out_mv = np.zeros((args.n, args.cols), order="F")
    out_ip = np.zeros((args.cols, args.cols), order="F")
    solver_cfg = SolverConfig(num_eigen=8, tol=1e-8, seed=1)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}   n={args.n} cols={args.cols}")
    header = f"{'kernel':<28}" + "".join(f"{b:>14}" for b in backends)
    print(header)
    print("-" * len(header))

    rows = {
        "csr_matvec": lambda: kernels.csr_matvec(indptr, indices, data, x, out_mv),
        "inner_product": lambda: kernels.inner_product(x, y, out_ip, 8192, False),
        "inner_product det.": lambda: kernels.inner_product(x, y, out_ip, 8192, True),
        "axpby": lambda: kernels.axpby(1.5, x, 0.5, y),
        "solve laplacian ne=8": lambda: gcg_solve(a, config=solver_cfg),
    }
    for label, fn in rows.items():
        cells = []
        for backend in backends:
            kernels.use_backend(backend)
            cells.append(best_of(args.repeat, fn))
        print(
            f"{label:<28}"
            + "".join(f"{1e3 * t:>12.3f}ms" for t in cells)
        )
    kernels.use_backend(backends[-1])


if __name__ == "__main__":
    main()
