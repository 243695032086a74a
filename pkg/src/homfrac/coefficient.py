"""1-periodic continuous coefficient fields with certified bounds.

Three families are supported, each carrying analytically certified bounds
alpha <= a(y) <= beta and a certified Lipschitz constant L, so the modulus
of continuity omega(t) = min(L*t, beta - alpha) is a true bound and not a
sampled estimate:

  constant(c)          a(y) = c
  fourier              a(y) = mean + sum_j  A_j * prod_i trig(2 pi k_i y_i)
  two_phase            piecewise-constant phase table on an m^d subgrid of
                       the unit cell, mollified by a separable C^2 bump of
                       width ell (sharp interfaces are never exposed)

JSON specs (used by the CLI):

  {"form": "constant", "value": 3.0}
  {"form": "fourier", "d": 2, "mean": 1.0,
   "terms": [{"k": [1, 1], "amplitude": 0.5, "trig": "ss"}]}
  {"form": "two_phase", "table": [[1.0, 4.0], [4.0, 1.0]], "ell": 0.01}

In a fourier term, trig is a string with one character per axis: "s" for
sin(2 pi k_i y_i) and "c" for cos(2 pi k_i y_i).
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

# C^2 bump on [0,1]: psi(t) = 140 t^3 (1-t)^3, integral 1.  Its CDF is the
# degree-7 smootherstep; both vanish to second order at the endpoints.
_BUMP_MAX = 140.0 / 64.0


def _smooth_cdf(t):
    """CDF of the C^2 bump: 0 for t<=0, 1 for t>=1, smootherstep between."""
    t = np.clip(t, 0.0, 1.0)
    t2 = t * t
    return t2 * t2 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t2 * t)


class PeriodicCoefficient:
    """Base class; subclasses fill in d, alpha, beta, lipschitz."""

    d: int
    alpha: float
    beta: float
    lipschitz: float

    def evaluate(self, y):
        """Evaluate a(y) for y of shape (..., d); periodic extension."""
        raise NotImplementedError

    def modulus(self, t):
        """Certified modulus of continuity omega(t) = min(L t, beta - alpha)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("modulus requires t >= 0")
        return np.minimum(self.lipschitz * t, self.beta - self.alpha)

    def to_spec(self) -> dict:
        raise NotImplementedError

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_spec(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _check(self):
        if not (0 < self.alpha <= self.beta):
            raise ValueError(
                f"coefficient bounds must satisfy 0 < alpha <= beta, "
                f"got alpha={self.alpha}, beta={self.beta}"
            )

    @staticmethod
    def _points(y, d):
        y = np.asarray(y, dtype=float)
        if d == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y.reshape(y.shape + (1,))
        if y.shape[-1] != d:
            raise ValueError(f"points have dimension {y.shape[-1]}, expected {d}")
        return y


class ConstantCoefficient(PeriodicCoefficient):
    def __init__(self, value: float):
        self.value = float(value)
        self.d = 0  # valid in any dimension
        self.alpha = self.beta = self.value
        self.lipschitz = 0.0
        self._check()

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        shape = y.shape[:-1] if y.ndim > 1 else (y.shape if y.ndim else ())
        return np.full(shape, self.value)

    def to_spec(self):
        return {"form": "constant", "value": self.value}


class FourierCoefficient(PeriodicCoefficient):
    """mean + sum of separable trigonometric terms.

    Certified bounds: mean -/+ sum |A_j| (each factor has modulus <= 1);
    certified Lipschitz constant 2 pi sum_j |A_j| |k_j|_2.
    """

    def __init__(self, d: int, mean: float, terms):
        self.d = int(d)
        self.mean = float(mean)
        self.terms = []
        amp_sum = 0.0
        lip = 0.0
        for k, amplitude, trig in terms:
            k = tuple(int(ki) for ki in k)
            if len(k) != self.d or len(trig) != self.d:
                raise ValueError("term k and trig must have one entry per axis")
            if any(ch not in "sc" for ch in trig):
                raise ValueError(f"trig string must use 's'/'c', got {trig!r}")
            amplitude = float(amplitude)
            self.terms.append((k, amplitude, trig))
            amp_sum += abs(amplitude)
            lip += abs(amplitude) * 2.0 * math.pi * math.hypot(*k)
        self.alpha = self.mean - amp_sum
        self.beta = self.mean + amp_sum
        self.lipschitz = lip
        self._check()

    def evaluate(self, y):
        y = self._points(y, self.d)
        out = np.full(y.shape[:-1], self.mean)
        for k, amplitude, trig in self.terms:
            term = np.full(y.shape[:-1], amplitude)
            for i in range(self.d):
                phase = 2.0 * math.pi * k[i] * y[..., i]
                term = term * (np.sin(phase) if trig[i] == "s" else np.cos(phase))
            out = out + term
        return out

    def to_spec(self):
        return {
            "form": "fourier",
            "d": self.d,
            "mean": self.mean,
            "terms": [
                {"k": list(k), "amplitude": a, "trig": t} for k, a, t in self.terms
            ],
        }


class SmoothedPhaseCoefficient(PeriodicCoefficient):
    """Phase table on an m^d subgrid of the unit cell, mollified at width ell.

    The mollification is the exact convolution with a separable C^2 bump of
    width ell, evaluated in closed form through the bump's CDF, so values
    stay in [min table, max table] and the field is C^2.  Certified
    Lipschitz constant: sqrt(d) * (beta - alpha) * 2*max(bump) / ell.
    """

    def __init__(self, table, ell: float | None = None):
        table = np.asarray(table, dtype=float)
        self.table = table
        self.d = table.ndim
        self.m = table.shape[0]
        if any(sz != self.m for sz in table.shape):
            raise ValueError("phase table must be an m^d array")
        if ell is None:
            ell = 1.0 / (20.0 * self.m)  # 1/20 of the subcell size
        self.ell = float(ell)
        if not 0 < self.ell <= 1.0 / self.m:
            raise ValueError("smoothing length must be in (0, subcell size]")
        self.alpha = float(table.min())
        self.beta = float(table.max())
        self.lipschitz = (
            math.sqrt(self.d) * (self.beta - self.alpha) * 2.0 * _BUMP_MAX / self.ell
        )
        self._check()
        # subcell intervals plus their periodic images at +-1; images cover
        # kernels that straddle the cell boundary (ell <= 1/m suffices)
        js = np.arange(self.m) / self.m
        self._lo = np.concatenate([js - 1.0, js, js + 1.0])
        self._hi = self._lo + 1.0 / self.m

    def _axis_weights(self, t):
        """Smoothed-indicator weight of each of the m subcells at t."""
        a = _smooth_cdf((t[..., None] - self._lo) / self.ell + 0.5)
        b = _smooth_cdf((t[..., None] - self._hi) / self.ell + 0.5)
        w = a - b
        # fold the three periodic images onto the m cells
        return w[..., : self.m] + w[..., self.m : 2 * self.m] + w[..., 2 * self.m :]

    def evaluate(self, y):
        y = self._points(y, self.d)
        y = y - np.floor(y)
        ws = [self._axis_weights(y[..., i]) for i in range(self.d)]
        if self.d == 1:
            return np.einsum("...i,i->...", ws[0], self.table)
        if self.d == 2:
            return np.einsum("...i,...j,ij->...", ws[0], ws[1], self.table)
        if self.d == 3:
            return np.einsum("...i,...j,...k,ijk->...", ws[0], ws[1], ws[2], self.table)
        raise ValueError(f"unsupported dimension {self.d}")

    def to_spec(self):
        return {"form": "two_phase", "table": self.table.tolist(), "ell": self.ell}


class ScaledReciprocalCoefficient(PeriodicCoefficient):
    """c / a(y) for a base coefficient a.  Cross-check machinery for the 2D
    duality identity A_hom(a) * A_hom(alpha*beta/a) = alpha*beta; not one of
    the JSON coefficient forms."""

    def __init__(self, base: PeriodicCoefficient, c: float):
        self.base = base
        self.c = float(c)
        if self.c <= 0:
            raise ValueError("scale must be positive")
        self.d = base.d
        self.alpha = self.c / base.beta
        self.beta = self.c / base.alpha
        self.lipschitz = self.c * base.lipschitz / base.alpha**2
        self._check()

    def evaluate(self, y):
        return self.c / self.base.evaluate(y)

    def to_spec(self):
        return {"form": "_scaled_reciprocal", "c": self.c, "base": self.base.to_spec()}


def constant(value: float) -> ConstantCoefficient:
    return ConstantCoefficient(value)


def fourier(d: int, mean: float, terms) -> FourierCoefficient:
    return FourierCoefficient(d, mean, terms)


def smoothed_two_phase(table, ell: float | None = None) -> SmoothedPhaseCoefficient:
    return SmoothedPhaseCoefficient(table, ell)


def from_spec(spec: dict) -> PeriodicCoefficient:
    """Build a coefficient from its JSON spec (see module docstring)."""
    form = spec.get("form")
    if form == "constant":
        return ConstantCoefficient(spec["value"])
    if form == "fourier":
        terms = [(t["k"], t["amplitude"], t["trig"]) for t in spec.get("terms", [])]
        return FourierCoefficient(spec["d"], spec.get("mean", 0.0), terms)
    if form == "two_phase":
        return SmoothedPhaseCoefficient(spec["table"], spec.get("ell"))
    raise ValueError(f"unknown coefficient form {form!r}")
