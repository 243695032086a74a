"""Domains (axis-aligned boxes, simplicial polytopes) and simplex utilities.

Points are always (..., d) float arrays.  Boxes support exact ray-exit
distances, which the energy quadrature uses to clip the radial integral at
the boundary instead of rejecting nodes one by one.
"""

from __future__ import annotations

import math

import numpy as np


class Box:
    """Open axis-aligned box corner + (0, extent)."""

    def __init__(self, corner, extent):
        self.corner = np.atleast_1d(np.asarray(corner, dtype=float))
        self.extent = np.atleast_1d(np.asarray(extent, dtype=float))
        if self.corner.shape != self.extent.shape or self.corner.ndim != 1:
            raise ValueError("corner and extent must be vectors of equal length")
        if np.any(self.extent <= 0):
            raise ValueError("box extents must be positive")
        self.d = len(self.corner)
        self.convex = True

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.extent))

    def bounding_box(self) -> "Box":
        return self

    def contains(self, pts, margin: float = 0.0):
        pts = np.asarray(pts, dtype=float)
        lo = pts - self.corner
        hi = self.corner + self.extent - pts
        return np.logical_and(lo.min(axis=-1) >= margin, hi.min(axis=-1) >= margin)

    def ray_exit(self, x, nu):
        """Distance from interior points x to the boundary along unit rays nu.

        x: (K, d), nu: (K, d) or (d,).  Returns (K,) exit distances.
        """
        x = np.asarray(x, dtype=float)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), x.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (self.corner - x) / nu
            t_hi = (self.corner + self.extent - x) / nu
        t = np.where(nu > 0, t_hi, np.where(nu < 0, t_lo, np.inf))
        return t.min(axis=-1)

    def grid(self, n_per_axis: int):
        """Node-centered uniform grid: n^d points, cell midpoints."""
        axes = [
            self.corner[i] + self.extent[i] * (np.arange(n_per_axis) + 0.5) / n_per_axis
            for i in range(self.d)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_spec(self):
        return {
            "kind": "box",
            "corner": self.corner.tolist(),
            "extent": self.extent.tolist(),
        }


class Simplex:
    """d-simplex from its d+1 vertices, with barycentric membership tests."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise ValueError("a d-simplex needs d+1 vertices of dimension d")
        self.vertices = v
        self.d = v.shape[1]
        self._edges = (v[1:] - v[0]).T  # columns span the simplex
        self._det = np.linalg.det(self._edges)
        if abs(self._det) < 1e-300:
            raise ValueError("degenerate simplex")
        self._inv_edges = np.linalg.inv(self._edges)

    @property
    def volume(self) -> float:
        return abs(self._det) / math.factorial(self.d)

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def barycentric(self, pts):
        """Coordinates (lam_0, ..., lam_d) summing to 1; all >= 0 inside."""
        pts = np.asarray(pts, dtype=float)
        lam_rest = (pts - self.vertices[0]) @ self._inv_edges.T
        lam0 = 1.0 - lam_rest.sum(axis=-1, keepdims=True)
        return np.concatenate([lam0, lam_rest], axis=-1)

    def contains(self, pts, margin: float = 0.0):
        """margin > 0 is a physical clearance; margin <= 0 is a barycentric
        tolerance (used by the overlap tests)."""
        if margin > 0.0:
            return self.boundary_distance(pts) >= margin
        lam = self.barycentric(pts)
        return lam.min(axis=-1) >= margin

    def faces(self):
        """Inward unit normals and offsets: x inside iff n.x + c > 0 for all.

        The value n.x + c is the distance of x to the face plane.
        """
        normals = []
        offsets = []
        for i in range(self.d + 1):
            others = np.delete(self.vertices, i, axis=0)
            base = others[0]
            span = (others[1:] - base).T
            # normal orthogonal to the face plane
            q, _ = np.linalg.qr(np.column_stack([span, self.vertices[i] - base]))
            n = q[:, -1]
            n = n / np.linalg.norm(n)
            if n @ (self.vertices[i] - base) < 0:
                n = -n
            normals.append(n)
            offsets.append(-n @ base)
        return np.asarray(normals), np.asarray(offsets)

    @property
    def inradius(self) -> float:
        """d * volume / surface, the radius of the inscribed sphere."""
        surface = 0.0
        for i in range(self.d + 1):
            others = np.delete(self.vertices, i, axis=0)
            span = others[1:] - others[0]
            gram = span @ span.T
            surface += math.sqrt(max(np.linalg.det(gram), 0.0)) / math.factorial(
                self.d - 1
            )
        return self.d * self.volume / surface

    def boundary_distance(self, pts):
        """Distance to the complement: min over faces inside, 0 outside."""
        pts = np.asarray(pts, dtype=float)
        normals, offsets = self.faces()
        dists = pts @ normals.T + offsets
        return np.maximum(dists.min(axis=-1), 0.0)

    def sample(self, rng, count: int):
        """Uniform points inside (Dirichlet barycentric weights)."""
        w = rng.dirichlet(np.ones(self.d + 1), size=count)
        return w @ self.vertices


class SimplicialPolytope:
    """Union of d-simplices with pairwise-disjoint interiors."""

    def __init__(self, simplices):
        self.simplices = [
            s if isinstance(s, Simplex) else Simplex(s) for s in simplices
        ]
        if not self.simplices:
            raise ValueError("need at least one simplex")
        self.d = self.simplices[0].d
        if any(s.d != self.d for s in self.simplices):
            raise ValueError("mixed simplex dimensions")
        self.convex = False  # not assumed; energy falls back to indicators
        vs = np.concatenate([s.vertices for s in self.simplices])
        self._lo = vs.min(axis=0)
        self._hi = vs.max(axis=0)

    @property
    def volume(self) -> float:
        return sum(s.volume for s in self.simplices)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self._hi - self._lo))

    def bounding_box(self) -> Box:
        return Box(self._lo, self._hi - self._lo)

    def contains(self, pts, margin: float = 0.0):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for s in self.simplices:
            out |= s.contains(pts, margin=margin)
        return out

    def to_spec(self):
        return {
            "kind": "simplices",
            "vertices": [s.vertices.tolist() for s in self.simplices],
        }


def domain_from_spec(spec: dict):
    kind = spec.get("kind")
    if kind == "box":
        return Box(spec["corner"], spec["extent"])
    if kind == "simplices":
        return SimplicialPolytope(spec["vertices"])
    raise ValueError(f"unknown domain kind {kind!r}")


def unit_box(d: int) -> Box:
    return Box(np.zeros(d), np.ones(d))
