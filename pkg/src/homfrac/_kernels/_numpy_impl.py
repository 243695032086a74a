"""Pure-numpy fallback for the interpolation hot kernels.

Operation order matches _ckernels.pyx exactly (the extension is compiled
with FP contraction off), so both backends return bit-identical values.
"""

import numpy as np

BACKEND = "numpy"


def periodic_ml_interp(values, pts):
    """Multilinear interpolation of nodal values on the unit torus.

    values: float64 array of shape (n,), (n, n) or (n, n, n) with values at
        the nodes i/n of [0,1)^d.  Periodic wrap in every axis.
    pts: (K, d) array of evaluation points (any reals; reduced mod 1).
    """
    pts = np.asarray(pts, dtype=np.float64)
    d = values.ndim
    n = values.shape[0]
    p = pts * n
    i0 = np.floor(p).astype(np.int64)
    f = p - i0
    i0 = np.mod(i0, n)
    i1 = np.mod(i0 + 1, n)
    if d == 1:
        a0, a1 = i0[:, 0], i1[:, 0]
        fx = f[:, 0]
        return values[a0] * (1.0 - fx) + values[a1] * fx
    if d == 2:
        a0, a1 = i0[:, 0], i1[:, 0]
        b0, b1 = i0[:, 1], i1[:, 1]
        fx, fy = f[:, 0], f[:, 1]
        c0 = values[a0, b0] * (1.0 - fx) + values[a1, b0] * fx
        c1 = values[a0, b1] * (1.0 - fx) + values[a1, b1] * fx
        return c0 * (1.0 - fy) + c1 * fy
    if d == 3:
        a0, a1 = i0[:, 0], i1[:, 0]
        b0, b1 = i0[:, 1], i1[:, 1]
        c0i, c1i = i0[:, 2], i1[:, 2]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        e00 = values[a0, b0, c0i] * (1.0 - fx) + values[a1, b0, c0i] * fx
        e10 = values[a0, b1, c0i] * (1.0 - fx) + values[a1, b1, c0i] * fx
        e01 = values[a0, b0, c1i] * (1.0 - fx) + values[a1, b0, c1i] * fx
        e11 = values[a0, b1, c1i] * (1.0 - fx) + values[a1, b1, c1i] * fx
        g0 = e00 * (1.0 - fy) + e10 * fy
        g1 = e01 * (1.0 - fy) + e11 * fy
        return g0 * (1.0 - fz) + g1 * fz
    raise ValueError(f"unsupported dimension {d}")


def box_ml_interp(values, corner, spacing, pts):
    """Multilinear interpolation of nodal values on a box grid.

    values: float64 array, shape (n1, ..., nd), node i at
        corner + i*spacing (endpoints included).  Points outside the grid
        are clamped to the boundary cells.
    """
    pts = np.asarray(pts, dtype=np.float64)
    d = values.ndim
    p = (pts - corner) / spacing
    idx0 = []
    fracs = []
    for ax in range(d):
        nax = values.shape[ax]
        i0 = np.floor(p[:, ax]).astype(np.int64)
        np.clip(i0, 0, nax - 2, out=i0)
        f = p[:, ax] - i0
        np.clip(f, 0.0, 1.0, out=f)
        idx0.append(i0)
        fracs.append(f)
    if d == 1:
        a0 = idx0[0]
        fx = fracs[0]
        return values[a0] * (1.0 - fx) + values[a0 + 1] * fx
    if d == 2:
        a0, b0 = idx0
        fx, fy = fracs
        c0 = values[a0, b0] * (1.0 - fx) + values[a0 + 1, b0] * fx
        c1 = values[a0, b0 + 1] * (1.0 - fx) + values[a0 + 1, b0 + 1] * fx
        return c0 * (1.0 - fy) + c1 * fy
    if d == 3:
        a0, b0, c0i = idx0
        fx, fy, fz = fracs
        e00 = values[a0, b0, c0i] * (1.0 - fx) + values[a0 + 1, b0, c0i] * fx
        e10 = values[a0, b0 + 1, c0i] * (1.0 - fx) + values[a0 + 1, b0 + 1, c0i] * fx
        e01 = values[a0, b0, c0i + 1] * (1.0 - fx) + values[a0 + 1, b0, c0i + 1] * fx
        e11 = (
            values[a0, b0 + 1, c0i + 1] * (1.0 - fx)
            + values[a0 + 1, b0 + 1, c0i + 1] * fx
        )
        g0 = e00 * (1.0 - fy) + e10 * fy
        g1 = e01 * (1.0 - fy) + e11 * fy
        return g0 * (1.0 - fz) + g1 * fz
    raise ValueError(f"unsupported dimension {d}")
