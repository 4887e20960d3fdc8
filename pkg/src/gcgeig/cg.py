"""Block conjugate gradient with per-column stopping.

Solves ``op @ w = rhs`` column by column, sharing operator applications by
packing the still-active columns into one block per sweep.  The caller is
expected to pass a shifted combination ``A - theta*B``; directions with a
nonpositive curvature ``p' (A - theta*B) p`` are frozen at their current
iterate instead of being updated further.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidShape

__all__ = ["CgReport", "block_cg"]


@dataclass
class CgReport:
    iterations: int               # sweeps actually run
    converged: np.ndarray         # per column
    frozen: np.ndarray            # per column: stopped on nonpositive curvature
    relative_residuals: np.ndarray


def _col_dots(x, y):
    return np.einsum("ij,ij->j", x, y)


def block_cg(op, rhs, x0=None, max_iters=30, rel_tol=0.01, precond=None):
    """Return (solution, :class:`CgReport`).

    Each column stops once its residual drops below ``rel_tol`` times its
    starting residual, or after ``max_iters`` sweeps.  ``precond``, when
    given, maps a residual block to a preconditioned block.
    """
    rhs = np.asfortranarray(rhs, dtype=np.float64)
    if rhs.ndim != 2:
        raise InvalidShape(f"rhs must be 2-d, got shape {rhs.shape}")
    n, k = rhs.shape
    if op.dim != n:
        raise InvalidShape(f"operator dim {op.dim} != rhs dim {n}")
    if x0 is None:
        x = np.zeros((n, k), order="F")
        r = rhs.copy()
    else:
        if x0.shape != rhs.shape:
            raise InvalidShape(f"x0 shape {x0.shape} != rhs shape {rhs.shape}")
        x = np.array(x0, dtype=np.float64, order="F")
        r = rhs - op.apply(x)

    rn0 = np.sqrt(_col_dots(r, r))
    target = rel_tol * rn0
    converged = rn0 <= target  # zero-residual columns are done immediately
    frozen = np.zeros(k, dtype=bool)
    rn = rn0.copy()

    z = precond(r) if precond is not None else r.copy()
    p = z.copy()
    rz = _col_dots(r, z)
    sweeps = 0

    for _ in range(max_iters):
        idx = np.flatnonzero(~converged & ~frozen)
        if idx.size == 0:
            break
        sweeps += 1
        pb = np.asfortranarray(p[:, idx])
        qb = op.apply(pb)
        den = _col_dots(pb, qb)
        bad = den <= 0.0
        if np.any(bad):
            frozen[idx[bad]] = True
            idx = idx[~bad]
            if idx.size == 0:
                continue
            pb = pb[:, ~bad]
            qb = qb[:, ~bad]
            den = den[~bad]
        alpha = rz[idx] / den
        x[:, idx] += pb * alpha
        r[:, idx] -= qb * alpha
        rn[idx] = np.sqrt(_col_dots(r[:, idx], r[:, idx]))
        done = rn[idx] <= target[idx]
        converged[idx[done]] = True
        idx = idx[~done]
        if idx.size == 0:
            continue
        zb = precond(r[:, idx]) if precond is not None else r[:, idx]
        rz_new = _col_dots(r[:, idx], zb)
        beta = rz_new / rz[idx]
        p[:, idx] = zb + p[:, idx] * beta
        rz[idx] = rz_new

    safe = np.where(rn0 > 0.0, rn0, 1.0)
    return x, CgReport(sweeps, converged, frozen, rn / safe)
