"""Periodic cell problem: correctors and the effective tensor.

The unit cell is discretized by nodal finite differences with centered
periodic difference gradients,

    (grad_h phi)_i(y) = (phi(y + h e_i) - phi(y - h e_i)) / (2h),

so the discrete energy sum_y a(y) |z + grad_h phi(y)|^2 h^d is a true
quadratic form and its minimizer solves div_h(a (z + grad_h phi)) = 0.
The linear system is solved by conjugate gradients preconditioned with the
spectral inverse of the constant-coefficient operator on the torus.

Gauge fixing: centered differences on a torus with even n annihilate the
2^d modes whose frequencies lie in {0, n/2} per axis (the mean plus
checkerboard-type modes).  The right-hand side has no component on these
modes, and the preconditioner projects them out at every iteration, which
both fixes the mean-zero gauge and prevents parity drift.

All reductions use fixed-order numpy sums, so results are independent of
the worker count to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .coefficient import PeriodicCoefficient

DEFAULT_N = {1: 1024, 2: 256, 3: 64}
DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    """Raised when an iterative solve misses its tolerance."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n^d grid on the unit torus; n a power of two, n >= 8."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two, n >= 8")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def nodes(self):
        """(n^d, d) array of node coordinates i*h."""
        ax = np.arange(self.n) * self.h
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def shape(self):
        return (self.n,) * self.d


@dataclass
class Corrector:
    """Nodal corrector values (shape grid.shape()) for a direction z."""

    grid: TorusGrid
    values: np.ndarray
    z: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    @property
    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class CellSolution:
    a_hom: np.ndarray
    correctors: list = field(default_factory=list)
    residual: float = 0.0


def default_grid(d: int) -> TorusGrid:
    return TorusGrid(d, DEFAULT_N[d])


def _coefficient_on_grid(coeff: PeriodicCoefficient, grid: TorusGrid):
    a = coeff.evaluate(grid.nodes()).reshape(grid.shape())
    return np.ascontiguousarray(a, dtype=float)


def _centered_grad(phi, h):
    """Centered periodic difference gradient, one array per axis."""
    return [
        (np.roll(phi, -1, axis=i) - np.roll(phi, 1, axis=i)) / (2.0 * h)
        for i in range(phi.ndim)
    ]


def _centered_div(flux, h):
    """Centered periodic divergence of a list of axis fluxes."""
    out = np.zeros_like(flux[0])
    for i, f in enumerate(flux):
        out += (np.roll(f, -1, axis=i) - np.roll(f, 1, axis=i)) / (2.0 * h)
    return out


def _degenerate_mode_projector(grid: TorusGrid):
    """Inverse symbol of the centered Laplacian; zero on degenerate modes."""
    n, h = grid.n, grid.h
    k = np.fft.fftfreq(n, d=1.0) * n  # integer frequencies
    sin2 = (np.sin(2.0 * math.pi * k * h) / h) ** 2
    axes = np.meshgrid(*([sin2] * grid.d), indexing="ij")
    symbol = sum(axes)
    inv = np.zeros_like(symbol)
    nonzero = symbol > 1e-12 / h**2
    inv[nonzero] = 1.0 / symbol[nonzero]
    return inv


def _inner(x, y) -> float:
    # np.sum's pairwise reduction is deterministic for a fixed array size
    return float(np.sum(x * y))


def solve_corrector(
    coeff: PeriodicCoefficient,
    z,
    grid: TorusGrid | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> Corrector:
    """Minimize sum_y a(y) |z + grad_h phi|^2 h^d over mean-zero periodic phi.

    Preconditioned CG on div_h(a grad_h phi) = -div_h(a z), relative
    residual <= tol.  Raises SolverError after the iteration cap
    (default 10 * n * d).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if grid is None:
        grid = default_grid(len(z))
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(z) != grid.d:
        raise ValueError("direction dimension does not match the grid")
    if max_iter is None:
        max_iter = 10 * grid.n * grid.d

    a = _coefficient_on_grid(coeff, grid)
    h = grid.h
    a_shift = [
        (np.roll(a, -1, axis=i), np.roll(a, 1, axis=i)) for i in range(grid.d)
    ]
    inv_symbol = _degenerate_mode_projector(grid) * (1.0 / float(a.mean()))

    def apply_op(phi):
        # -div_h(a grad_h phi), assembled from the energy's normal equations
        out = np.zeros_like(phi)
        for i in range(grid.d):
            ap, am = a_shift[i]
            up = (np.roll(phi, -2, axis=i) - phi) / (2.0 * h)
            um = (phi - np.roll(phi, 2, axis=i)) / (2.0 * h)
            out -= (ap * up - am * um) / (2.0 * h)
        return out

    def precondition(r):
        return np.real(np.fft.ifftn(np.fft.fftn(r) * inv_symbol))

    b = np.zeros(grid.shape())
    for i in range(grid.d):
        ap, am = a_shift[i]
        b += z[i] * (ap - am) / (2.0 * h)

    b_norm = math.sqrt(_inner(b, b))
    phi = np.zeros(grid.shape())
    if b_norm == 0.0:
        return Corrector(grid, phi, z, residual=0.0, iterations=0)

    r = b.copy()
    s = precondition(r)
    p = s.copy()
    rho = _inner(r, s)
    res = 1.0
    iterations = 0
    for it in range(1, max_iter + 1):
        q = apply_op(p)
        alpha = rho / _inner(p, q)
        phi += alpha * p
        r -= alpha * q
        res = math.sqrt(_inner(r, r)) / b_norm
        iterations = it
        if res <= tol:
            break
        s = precondition(r)
        rho_new = _inner(r, s)
        p = s + (rho_new / rho) * p
        rho = rho_new
    if res > tol:
        raise SolverError(
            f"corrector CG missed tol={tol:g} after {max_iter} iterations "
            f"(final relative residual {res:.3e})"
        )
    phi = np.real(np.fft.ifftn(np.fft.fftn(phi) * (inv_symbol > 0)))
    return Corrector(grid, phi, z, residual=res, iterations=iterations)


def corrector_energy(coeff: PeriodicCoefficient, corrector: Corrector) -> float:
    """Discrete cell energy sum a(y) |z + grad_h phi|^2 h^d."""
    grid = corrector.grid
    a = _coefficient_on_grid(coeff, grid)
    g = _centered_grad(corrector.values, grid.h)
    total = np.zeros(grid.shape())
    for i in range(grid.d):
        gi = corrector.z[i] + g[i]
        total += gi * gi
    return _inner(a, total) * grid.h**grid.d


def homogenized_matrix(
    coeff: PeriodicCoefficient,
    grid: TorusGrid | None = None,
    tol: float = DEFAULT_TOL,
    d: int | None = None,
) -> CellSolution:
    """Solve the d corrector problems and assemble the effective tensor.

    A[i][j] = sum_y a(y) <e_i + grad phi_i, e_j + grad phi_j> h^d,
    symmetrized by averaging with its transpose.
    """
    if grid is None:
        if d is None:
            raise ValueError("pass a grid or the dimension d")
        grid = default_grid(d)
    dim = grid.d

    correctors = parallel.det_map(
        lambda i: solve_corrector(coeff, np.eye(dim)[i], grid, tol), range(dim)
    )
    a = _coefficient_on_grid(coeff, grid)
    grads = []
    for i, corr in enumerate(correctors):
        g = _centered_grad(corr.values, grid.h)
        g[i] = g[i] + 1.0
        grads.append(g)

    a_hom = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            acc = np.zeros(grid.shape())
            for ax in range(dim):
                acc += grads[i][ax] * grads[j][ax]
            a_hom[i, j] = _inner(a, acc) * grid.h**dim
            a_hom[j, i] = a_hom[i, j]
    a_hom = 0.5 * (a_hom + a_hom.T)
    residual = max(c.residual for c in correctors)
    return CellSolution(a_hom=a_hom, correctors=correctors, residual=residual)


def corrector_for_direction(cell: CellSolution, z) -> Corrector:
    """Corrector for an arbitrary direction by linearity of the cell problem."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    base = cell.correctors
    if len(z) != len(base):
        raise ValueError("direction dimension does not match the cell solution")
    values = np.zeros_like(base[0].values)
    for zi, corr in zip(z, base):
        values = values + zi * corr.values
    return Corrector(
        base[0].grid, values, z, residual=cell.residual, iterations=0
    )


def homogenized_density_p(
    coeff: PeriodicCoefficient,
    z,
    p: float,
    grid: TorusGrid | None = None,
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> float:
    """Minimized discrete value of sum a(y) |z + grad_h phi|^p h^d over
    mean-zero periodic grid functions (p > 1).

    Gradient descent with backtracking line search from phi = 0, taking
    steps in the metric of the constant-coefficient inverse Laplacian (the
    same preconditioner the p = 2 solver uses); the objective is convex, so
    the relative first-order stationarity tol certifies global optimality.
    For p < 2 the integrand is smoothed as (|g|^2 + mu^2)^(p/2), mu = 1e-8,
    to keep gradients defined at g = 0.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if grid is None:
        grid = default_grid(len(z))
    if len(z) != grid.d:
        raise ValueError("direction dimension does not match the grid")

    a = _coefficient_on_grid(coeff, grid)
    h, dim = grid.h, grid.d
    hd = h**dim
    mu2 = 1e-16 if p < 2 else 0.0
    inv_symbol = _degenerate_mode_projector(grid) * (1.0 / float(a.mean()))

    def objective_and_grad(phi):
        g = _centered_grad(phi, h)
        for i in range(dim):
            g[i] = g[i] + z[i]
        norm2 = sum(gi * gi for gi in g) + mu2
        value = _inner(a, norm2 ** (p / 2.0)) * hd
        weight = a * norm2 ** (p / 2.0 - 1.0)
        grad = -p * hd * _centered_div([weight * gi for gi in g], h)
        return value, grad

    phi = np.zeros(grid.shape())
    value, grad = objective_and_grad(phi)
    g0 = math.sqrt(_inner(grad, grad))
    if g0 == 0.0:
        return value
    step = 1.0
    for _ in range(max_iter):
        direction = -np.real(np.fft.ifftn(np.fft.fftn(grad) * inv_symbol))
        slope = _inner(grad, direction)
        if slope >= 0:  # fall back to plain steepest descent
            direction = -grad
            slope = -_inner(grad, grad)
        step = min(step * 4.0, 1e8)
        while True:
            trial = phi + step * direction
            v_trial, g_trial = objective_and_grad(trial)
            if v_trial <= value + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                raise SolverError("p-cell line search collapsed")
        phi, value, grad = trial, v_trial, g_trial
        if math.sqrt(_inner(grad, grad)) <= tol * g0:
            return value
    raise SolverError(
        f"p-cell gradient descent missed tol={tol:g} after {max_iter} iterations"
    )


def export_corrector_csv(corrector: Corrector, path):
    """CSV rows: node index, coordinates, value."""
    grid = corrector.grid
    nodes = grid.nodes()
    vals = corrector.values.ravel()
    with open(path, "w") as fh:
        coords = ",".join(f"y{i+1}" for i in range(grid.d))
        fh.write(f"index,{coords},value\n")
        for idx in range(len(vals)):
            xy = ",".join(f"{c:.17g}" for c in nodes[idx])
            fh.write(f"{idx},{xy},{vals[idx]:.17g}\n")
