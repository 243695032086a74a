"""Rotated lattices, Kuhn's simplex decomposition, and the piecewise-affine
interpolants of the discretization argument.

For a frame nu_bar = (nu_1, ..., nu_d) and scale factors (r, rho), lattice
coordinates are xi(x) = F x / (r rho) where F has the frame vectors as
rows; the cube with index z in Z^d occupies z + (0,1)^d in these
coordinates.  Kuhn's decomposition splits each cube into d! simplices, one
per permutation tau, with vertices

    Delta^{tau,0} = 0,   Delta^{tau,j} = rho nu_tau(1) + ... + rho nu_tau(j),

so consecutive vertices differ by rho nu_tau(j).  The affine interpolant of
corner values on a Kuhn cube is their Lovasz extension: sort the local
coordinates decreasingly and accumulate corner differences along the
resulting vertex chain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import parallel
from .fields import GridField
from .geometry import Box, Simplex

MAX_INTERPOLANT_NODES = 4_000_000


class OrthonormalFrame:
    """d unit vectors nu_i, pairwise orthogonal to 1e-12."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("frame matrix must be square")
        gram_defect = np.abs(m @ m.T - np.eye(len(m))).max()
        if gram_defect > 1e-12:
            raise ValueError(f"frame is not orthonormal (defect {gram_defect:.2e})")
        self.matrix = m
        self.d = len(m)

    @property
    def vectors(self):
        return self.matrix

    def __getitem__(self, i):
        return self.matrix[i]

    @property
    def gram_defect(self) -> float:
        return float(np.abs(self.matrix @ self.matrix.T - np.eye(self.d)).max())

    def to_coords(self, pts):
        return np.asarray(pts, dtype=float) @ self.matrix.T

    def to_physical(self, coords):
        return np.asarray(coords, dtype=float) @ self.matrix


def standard_frame(d: int) -> OrthonormalFrame:
    return OrthonormalFrame(np.eye(d))


def sample_frame(rng, d: int) -> OrthonormalFrame:
    """Haar-distributed frame: QR of a Gaussian matrix with the R-diagonal
    sign convention (equivalently Gram-Schmidt with positive pivots)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    while True:
        g = rng.standard_normal((d, d))
        if np.linalg.cond(g) <= 1e12:
            break
    q, rmat = np.linalg.qr(g)
    q = q * np.sign(np.diag(rmat))
    return OrthonormalFrame(q.T)


@dataclass
class KuhnSimplex:
    """One simplex of the d! decomposition of the cube anchor + Q_{rho nu}."""

    frame: OrthonormalFrame
    permutation: tuple
    scale: float
    anchor: np.ndarray

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        if sorted(self.permutation) != list(range(self.frame.d)):
            raise ValueError("permutation must reorder 0..d-1")

    @property
    def vertices(self):
        steps = self.scale * self.frame.matrix[list(self.permutation)]
        return self.anchor + np.concatenate(
            [np.zeros((1, self.frame.d)), np.cumsum(steps, axis=0)]
        )

    @property
    def volume(self) -> float:
        v = self.vertices
        edges = v[1:] - v[0]
        return abs(np.linalg.det(edges)) / math.factorial(self.frame.d)

    def as_simplex(self) -> Simplex:
        return Simplex(self.vertices)


def kuhn_decompose(rho: float, frame: OrthonormalFrame, anchor=None):
    """The d! Kuhn simplices partitioning the cube anchor + Q_{rho nu_bar}."""
    if rho <= 0:
        raise ValueError("scale must be positive")
    if anchor is None:
        anchor = np.zeros(frame.d)
    return [
        KuhnSimplex(frame, tau, rho, anchor)
        for tau in itertools.permutations(range(frame.d))
    ]


def _corner_offsets(d: int):
    return np.array(list(itertools.product((0, 1), repeat=d)), dtype=np.int64)


def lattice_cells(domain, r: float, rho: float, frame: OrthonormalFrame):
    """Indices z with the closed cube r rho (z + [0,1]^d) (in frame
    coordinates) compactly contained in the domain.

    Containment is checked at all 2^d cube corners with a clearance margin
    of 1e-12 * r * rho.  An empty result is returned as an empty array.
    """
    step = r * rho
    if step <= 0:
        raise ValueError("r and rho must be positive")
    box = domain.bounding_box()
    if step >= box.extent.max():
        return np.empty((0, frame.d), dtype=np.int64)
    bbox_corners = np.array(
        list(itertools.product(*zip(box.corner, box.corner + box.extent)))
    )
    coords = frame.to_coords(bbox_corners) / step
    lo = np.floor(coords.min(axis=0)).astype(np.int64) - 1
    hi = np.ceil(coords.max(axis=0)).astype(np.int64) + 1
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    candidates = np.stack([m.ravel() for m in mesh], axis=-1)

    offsets = _corner_offsets(frame.d)
    corners = frame.to_physical((candidates[:, None, :] + offsets) * step)
    ok = domain.contains(corners, margin=1e-12 * step).all(axis=1)
    return candidates[ok]


class AffineInterpolant:
    """Continuous piecewise-affine interpolant of lattice node values.

    Nodes live on the fine lattice; affine pieces are built per coarse
    cube (a cube all of whose corner-averaging cubes fit in the domain)
    and per Kuhn simplex.
    """

    def __init__(self, frame, r, rho, node_index, node_values, coarse_mask, lo):
        self.frame = frame
        self.r = float(r)
        self.rho = float(rho)
        self.step = self.r * self.rho
        self._values = node_values  # dense over the integer bbox, NaN holes
        self._coarse = coarse_mask  # bool over the integer bbox
        self._lo = lo  # integer offset of the bbox
        self._node_index = node_index

    @property
    def coarse_cells(self):
        return np.argwhere(self._coarse) + self._lo

    @property
    def node_count(self) -> int:
        return int(np.isfinite(self._values).sum())

    def node_value(self, z):
        idx = tuple(np.asarray(z, dtype=np.int64) - self._lo)
        return float(self._values[idx])

    def _local(self, pts):
        xi = self.frame.to_coords(pts) / self.step
        zc = np.floor(xi).astype(np.int64)
        return zc, xi - zc

    def covered(self, pts):
        zc, _ = self._local(pts)
        rel = zc - self._lo
        shape = np.array(self._coarse.shape)
        ok = np.logical_and(rel >= 0, rel < shape).all(axis=-1)
        out = np.zeros(len(np.atleast_2d(pts)), dtype=bool)
        idx = tuple(rel[ok].T)
        out[ok] = self._coarse[idx]
        return out

    def evaluate(self, pts):
        """Lovasz-extension evaluation; NaN outside the covered cubes."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        zc, local = self._local(pts)
        d = self.frame.d
        order = np.argsort(-local, axis=-1, kind="stable")
        out = np.full(len(pts), np.nan)
        cov = self.covered(pts)
        if not cov.any():
            return out
        zc, local, order = zc[cov], local[cov], order[cov]
        rel = zc - self._lo
        vals = self._values[tuple(rel.T)]
        delta = np.zeros_like(zc)
        rows = np.arange(len(zc))
        acc = vals.copy()
        prev = vals
        for j in range(d):
            delta[rows, order[:, j]] = 1
            nxt = self._values[tuple((rel + delta).T)]
            acc = acc + local[rows, order[:, j]] * (nxt - prev)
            prev = nxt
        out[cov] = acc
        return out

    def pieces(self):
        """Yield (cell z, tau, gradient, anchor, value_at_anchor) per simplex."""
        d = self.frame.d
        for z in self.coarse_cells:
            rel = tuple(z - self._lo)
            anchor = self.frame.to_physical(z.astype(float)) * self.step
            v0 = self._values[rel]
            for tau in itertools.permutations(range(d)):
                delta = np.zeros(d, dtype=np.int64)
                grad = np.zeros(d)
                prev = v0
                for j in tau:
                    delta[j] += 1
                    nxt = self._values[tuple(z - self._lo + delta)]
                    grad = grad + ((nxt - prev) / self.step) * self.frame.matrix[j]
                    prev = nxt
                yield tuple(z), tau, grad, anchor, v0

    def piece_value(self, tau, grad, anchor, v0, pts):
        """Affine evaluation of one piece (for continuity checks)."""
        return v0 + (np.asarray(pts) - anchor) @ grad


def _cube_quadrature(step: float, frame: OrthonormalFrame, order: int = 4):
    """Tensor Gauss-Legendre rule over one lattice cube, frame coordinates
    in (0,1)^d, returned as physical offsets and weights summing to 1."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes01 = (nodes + 1.0) / 2.0
    w01 = weights / 2.0
    d = frame.d
    mesh = np.meshgrid(*([nodes01] * d), indexing="ij")
    local = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([w01] * d), indexing="ij")
    w = np.ones(len(local))
    for m in wmesh:
        w = w * m.ravel()
    return frame.to_physical(local) * step, w


def _node_averages(u, zs, step, frame):
    """Cube averages of u over the cubes step*(z + [0,1]^d), by a fixed
    4-point-per-axis Gauss rule (exact for affine fields)."""
    offsets, w = _cube_quadrature(step, frame)
    corners = frame.to_physical(zs.astype(float)) * step
    pts = corners[:, None, :] + offsets[None, :, :]
    vals = u.evaluate(pts.reshape(-1, frame.d)).reshape(len(zs), -1)
    return vals @ w


def cube_average_interpolant(u, r: float, rho: float, frame: OrthonormalFrame,
                             domain=None) -> AffineInterpolant:
    """Assign cube averages of u on the lattice, then interpolate them
    Kuhn-affinely on every cube whose corner cubes all fit in the domain."""
    domain = domain or u.domain
    step = r * rho
    cells = lattice_cells(domain, r, rho, frame)
    if len(cells) == 0:
        raise ValueError("empty lattice: no cube fits compactly in the domain")
    if len(cells) > MAX_INTERPOLANT_NODES:
        raise ValueError(f"lattice too large ({len(cells)} nodes)")

    lo = cells.min(axis=0)
    hi = cells.max(axis=0)
    shape = tuple(hi - lo + 2)  # +1 for corners, +1 to keep z+delta in range
    values = np.full(shape, np.nan)
    index = {tuple(z): i for i, z in enumerate(cells)}
    values[tuple((cells - lo).T)] = _node_averages(u, cells, step, frame)

    # coarse cells: every corner has a nodal value (its averaging cube fits)
    offsets = _corner_offsets(frame.d)
    corner_ok = np.zeros(len(cells), dtype=bool)
    fine = set(index)
    for i, z in enumerate(cells):
        corner_ok[i] = all(tuple(z + off) in fine for off in offsets)
    coarse = np.zeros(shape, dtype=bool)
    coarse[tuple((cells[corner_ok] - lo).T)] = True
    return AffineInterpolant(frame, r, rho, index, values, coarse, lo)


def interpolant_dirichlet_energy(interp: AffineInterpolant, coeff, epsilon: float,
                                 sampling: str = "corner") -> float:
    """sum over coarse cubes of (coefficient sample) * int |grad|^2.

    sampling="corner" uses a(corner / eps) (the lattice point); "pointwise"
    uses a at each simplex centroid.
    """
    if sampling not in ("corner", "pointwise"):
        raise ValueError("sampling must be 'corner' or 'pointwise'")
    d = interp.frame.d
    vol = interp.step**d / math.factorial(d)
    total = 0.0
    for _z, tau, grad, anchor, _v0 in interp.pieces():
        g2 = float(grad @ grad)
        if sampling == "corner":
            a_val = float(coeff.evaluate(anchor[None, :] / epsilon)[0])
        else:
            steps = interp.step * interp.frame.matrix[list(tau)]
            verts = anchor + np.concatenate(
                [np.zeros((1, d)), np.cumsum(steps, axis=0)]
            )
            centroid = verts.mean(axis=0)
            a_val = float(coeff.evaluate(centroid[None, :] / epsilon)[0])
        total += a_val * g2 * vol
    return total


def discrete_jensen_slack(u, r: float, rho: float, frame: OrthonormalFrame,
                          domain=None):
    """Per-simplex slack of the discretization inequality

        int_simplex |grad u^{rho nu}|^2  <=  (1/d!) sum_j
            int_{shifted cube} |u(y + r rho nu_tau(j)) - u(y)|^2 / (r rho)^2

    computed with the same cube rule on both sides, so the slack is
    nonnegative up to roundoff.  Returns the array of slacks (rhs - lhs).
    """
    domain = domain or u.domain
    interp = cube_average_interpolant(u, r, rho, frame, domain)
    d = frame.d
    step = interp.step
    vol = step**d / math.factorial(d)
    offsets, w = _cube_quadrature(step, frame)
    slacks = []
    for z, tau, grad, _anchor, _v0 in interp.pieces():
        lhs = float(grad @ grad) * vol
        rhs = 0.0
        delta = np.zeros(d, dtype=np.int64)
        for j in tau:
            corner = frame.to_physical((np.asarray(z) + delta).astype(float)) * step
            pts = corner + offsets
            shift = step * frame.matrix[j]
            dq = (u.evaluate(pts + shift) - u.evaluate(pts)) / step
            rhs += float((dq * dq) @ w) * step**d
            delta[j] += 1
        slacks.append(rhs / math.factorial(d) - lhs)
    return np.asarray(slacks)


def mu_epsilon_samples(s: float, count: int, rng, d: int):
    """(rho_i, frame_i) i.i.d. from the averaging measure: frames Haar on V,
    rho with density 2(1-s) rho^(1-2s) on (0,1) via inverse CDF."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    rhos = rng.random(count) ** (1.0 / (2.0 - 2.0 * s))
    frames = [sample_frame(rng, d) for _ in range(count)]
    return rhos, frames


def averaged_interpolant(u, s: float, r: float, frame_samples: int, seed,
                         out_n: int = 33, domain=None) -> GridField:
    """Monte Carlo average of cube-average interpolants over mu_epsilon.

    Evaluated on a regular out_n^d grid over the domain's bounding box;
    grid points not covered by every sampled interpolant are excluded from
    the support (masked in the returned field).
    """
    if frame_samples < 1:
        raise ValueError("need at least one frame sample")
    domain = domain or u.domain
    d = domain.d
    seeds = np.random.SeedSequence(seed).spawn(frame_samples)

    def build(i):
        rng = np.random.default_rng(seeds[i])
        rho = float(rng.random() ** (1.0 / (2.0 - 2.0 * s)))
        frame = sample_frame(rng, d)
        return cube_average_interpolant(u, r, rho, frame, domain)

    interps = parallel.det_map(build, range(frame_samples))

    box = domain.bounding_box()
    axes = [
        box.corner[i] + box.extent[i] * np.arange(out_n) / (out_n - 1)
        for i in range(d)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)

    acc = np.zeros(len(pts))
    valid = np.ones(len(pts), dtype=bool)
    for interp in interps:
        vals = interp.evaluate(pts)
        good = np.isfinite(vals)
        valid &= good
        acc += np.where(good, vals, 0.0)
    acc = np.where(valid, acc / frame_samples, np.nan)
    return GridField(box, acc.reshape((out_n,) * d), valid.reshape((out_n,) * d))
