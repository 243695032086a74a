"""Scalar fields u on a domain: closed-form affine, grid-sampled, clamped.

Every field exposes evaluate(pts) for pts of shape (K, d) and carries its
domain.  Recovery-form fields (corrector-perturbed affine functions and
their piecewise versions) live in homfrac.recovery and follow the same
protocol.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .geometry import Box


class AffineField:
    """u(x) = <z, x> + offset."""

    closed_form = True

    def __init__(self, z, offset: float = 0.0, domain=None):
        self.z = np.atleast_1d(np.asarray(z, dtype=float))
        self.offset = float(offset)
        self.domain = domain

    @property
    def gradient(self):
        return self.z

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        return pts @ self.z + self.offset


class ConstantField:
    closed_form = True

    def __init__(self, value: float, domain=None):
        self.value = float(value)
        self.domain = domain

    @property
    def gradient(self):
        return np.zeros(self.domain.d if self.domain is not None else 1)

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], self.value)


class GridField:
    """Nodal values on a regular grid over a box, multilinear in between.

    values has one entry per node, endpoints included (shape n1 x ... x nd,
    node i at corner + i * spacing).  An optional boolean valid-mask marks
    nodes excluded from the support (averaged interpolants use it);
    evaluation near invalid nodes returns NaN.
    """

    closed_form = False

    def __init__(self, domain: Box, values, valid=None):
        if not isinstance(domain, Box):
            raise ValueError("grid-sampled fields require a box domain")
        self.domain = domain
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.ndim != domain.d:
            raise ValueError("values rank must match the domain dimension")
        if any(n < 2 for n in self.values.shape):
            raise ValueError("need at least two nodes per axis")
        self.spacing = domain.extent / (np.array(self.values.shape) - 1)
        self.valid = None if valid is None else np.asarray(valid, dtype=bool)
        if self.valid is not None and self.valid.shape != self.values.shape:
            raise ValueError("valid mask must match values shape")

    @property
    def grid_spacing(self) -> float:
        return float(self.spacing.max())

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.domain.d)
        vals = self.values
        if self.valid is not None:
            vals = np.where(self.valid, self.values, np.nan)
        out = _kernels.box_ml_interp(
            np.ascontiguousarray(vals), self.domain.corner, self.spacing, flat
        )
        return out.reshape(shape)

    def node_points(self):
        axes = [
            self.domain.corner[i] + self.spacing[i] * np.arange(self.values.shape[i])
            for i in range(self.domain.d)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


class TruncatedField:
    """Pointwise clamp of a base field to [-M, M]."""

    def __init__(self, base, M: float):
        if M <= 0:
            raise ValueError("truncation level must be positive")
        self.base = base
        self.M = float(M)
        self.domain = base.domain

    @property
    def closed_form(self):
        return getattr(self.base, "closed_form", False)

    def evaluate(self, pts):
        return np.clip(self.base.evaluate(pts), -self.M, self.M)


def l2_norm_sq(field, n_per_axis: int = 256) -> float:
    """Midpoint-rule approximation of the squared L2 norm over the domain."""
    dom = field.domain
    box = dom.bounding_box()
    pts = box.grid(n_per_axis)
    w = box.volume / len(pts)
    vals = field.evaluate(pts)
    if not isinstance(dom, Box):
        vals = np.where(dom.contains(pts), vals, 0.0)
    return float(np.sum(vals * vals) * w)
