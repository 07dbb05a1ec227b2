"""Piecewise Coriolis profiles f(y) with finitely many jumps.

A profile is a list of smooth segments on contiguous half-open intervals
``[y_from, y_to)``.  Linear tails with positive slope are attached beyond the
outermost user segment so that ``f(y) * sign(y)`` grows without bound.
Mismatches of the one-sided values at segment boundaries define the jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import AmbiguousLevelError, JumpPointError, ProfileError, ProfileRangeError

JUMP_TOL = 1e-12
LEVEL_TOL = 1e-12


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


@dataclass(frozen=True)
class Segment:
    """Smooth piece of a profile on ``[y_from, y_to)``.

    Subclasses implement :meth:`value` and :meth:`slope`.  :meth:`integral`
    falls back to adaptive quadrature when no closed form is provided.
    """

    y_from: float
    y_to: float

    kind = "abstract"

    def value(self, y):
        raise NotImplementedError

    def slope(self, y):
        raise NotImplementedError

    def integral(self, a: float, b: float) -> float:
        val, err = integrate.quad(self.value, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(val)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ConstantSegment(Segment):
    value_: float = 0.0

    kind = "constant"

    def value(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.value_)

    def slope(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def integral(self, a, b):
        return self.value_ * (b - a)

    def params(self):
        return {"value": self.value_}


@dataclass(frozen=True)
class LinearSegment(Segment):
    """``f(y) = slope * y + intercept``."""

    slope_: float = 1.0
    intercept: float = 0.0

    kind = "linear"

    def value(self, y):
        return self.slope_ * np.asarray(y, dtype=float) + self.intercept

    def slope(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.slope_)

    def integral(self, a, b):
        return 0.5 * self.slope_ * (b * b - a * a) + self.intercept * (b - a)

    def params(self):
        return {"slope": self.slope_, "intercept": self.intercept}


@dataclass(frozen=True)
class TanhSegment(Segment):
    """``f(y) = offset + amplitude * tanh((y - center) / scale)``."""

    amplitude: float = 1.0
    scale: float = 1.0
    center: float = 0.0
    offset: float = 0.0

    kind = "tanh"

    def value(self, y):
        return self.offset + self.amplitude * np.tanh((np.asarray(y, dtype=float) - self.center) / self.scale)

    def slope(self, y):
        z = (np.asarray(y, dtype=float) - self.center) / self.scale
        return self.amplitude / self.scale / np.cosh(z) ** 2

    def integral(self, a, b):
        za = (a - self.center) / self.scale
        zb = (b - self.center) / self.scale
        return float(self.amplitude * self.scale * (_logcosh(zb) - _logcosh(za)) + self.offset * (b - a))

    def params(self):
        return {"amplitude": self.amplitude, "scale": self.scale, "center": self.center, "offset": self.offset}


@dataclass(frozen=True)
class OscillatorySegment(Segment):
    """``f(y) = slope * y + intercept + amplitude * sin(wavenumber * y + phase)``."""

    slope_: float = 1.0
    intercept: float = 0.0
    amplitude: float = 0.0
    wavenumber: float = 1.0
    phase: float = 0.0

    kind = "oscillatory"

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return self.slope_ * y + self.intercept + self.amplitude * np.sin(self.wavenumber * y + self.phase)

    def slope(self, y):
        y = np.asarray(y, dtype=float)
        return self.slope_ + self.amplitude * self.wavenumber * np.cos(self.wavenumber * y + self.phase)

    def integral(self, a, b):
        k, ph = self.wavenumber, self.phase
        prim = lambda t: 0.5 * self.slope_ * t * t + self.intercept * t - self.amplitude / k * math.cos(k * t + ph)
        return prim(b) - prim(a)

    def params(self):
        return {
            "slope": self.slope_,
            "intercept": self.intercept,
            "amplitude": self.amplitude,
            "wavenumber": self.wavenumber,
            "phase": self.phase,
        }


@dataclass(frozen=True, eq=False)
class TableSegment(Segment):
    """Sampled values joined by monotone (PCHIP) cubic interpolation."""

    nodes: tuple = ()
    values: tuple = ()
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    kind = "table"

    def __post_init__(self):
        ys = np.asarray(self.nodes, dtype=float)
        fs = np.asarray(self.values, dtype=float)
        if ys.ndim != 1 or ys.shape != fs.shape or ys.size < 2:
            raise ProfileError("table segment needs matching 'y' and 'f' lists with at least two entries")
        if np.any(np.diff(ys) <= 0):
            raise ProfileError("table segment ordinates must be strictly increasing")
        if ys[0] > self.y_from + 1e-12 or ys[-1] < self.y_to - 1e-12:
            raise ProfileError(
                f"table samples [{ys[0]}, {ys[-1]}] do not cover the segment [{self.y_from}, {self.y_to})"
            )
        object.__setattr__(self, "_interp", PchipInterpolator(ys, fs, extrapolate=True))

    def value(self, y):
        return self._interp(np.asarray(y, dtype=float))

    def slope(self, y):
        return self._interp(np.asarray(y, dtype=float), 1)

    def integral(self, a, b):
        return float(self._interp.integrate(a, b))

    def params(self):
        return {"y": list(self.nodes), "f": list(self.values)}


SEGMENT_KINDS = {
    "constant": (ConstantSegment, {"value": "value_"}),
    "linear": (LinearSegment, {"slope": "slope_", "intercept": "intercept"}),
    "tanh": (TanhSegment, {"amplitude": "amplitude", "scale": "scale", "center": "center", "offset": "offset"}),
    "oscillatory": (
        OscillatorySegment,
        {"slope": "slope_", "intercept": "intercept", "amplitude": "amplitude", "wavenumber": "wavenumber", "phase": "phase"},
    ),
    "table": (TableSegment, {"y": "nodes", "f": "values"}),
}


def make_segment(kind: str, y_from: float, y_to: float, **params) -> Segment:
    """Build a segment of a registered kind from user-facing parameter names."""
    try:
        cls, names = SEGMENT_KINDS[kind]
    except KeyError:
        raise ProfileError(f"unknown segment kind {kind!r}; expected one of {sorted(SEGMENT_KINDS)}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise ProfileError(f"unknown parameter(s) {sorted(unknown)} for segment kind {kind!r}")
    kwargs = {}
    for public, attr in names.items():
        if public in params:
            val = params[public]
            kwargs[attr] = tuple(float(v) for v in val) if kind == "table" else float(val)
    return cls(float(y_from), float(y_to), **kwargs)


@dataclass(frozen=True)
class Jump:
    """Discontinuity of f at ``y``; ``f_o`` and ``f_e`` are the half-difference and half-sum."""

    y: float
    f_plus: float
    f_minus: float

    @property
    def f_o(self) -> float:
        return 0.5 * (self.f_plus - self.f_minus)

    @property
    def f_e(self) -> float:
        return 0.5 * (self.f_plus + self.f_minus)

    @property
    def size(self) -> float:
        return self.f_plus - self.f_minus


class CoriolisProfile:
    """Immutable piecewise profile f(y) on ``[-extent, extent]``.

    Parameters
    ----------
    segments:
        User segments on contiguous intervals, ordered by position.
    plateau_halfwidth:
        ``eta``; f must be constant on ``(y_j - 2 eta, y_j)`` and
        ``(y_j, y_j + 2 eta)`` around every jump, and jumps must be at least
        ``4 eta`` apart.
    tail_slope:
        Slope of the linear tails attached beyond the user segments.
    extent:
        Half-width of the represented range.
    tail_floor:
        Minimum ``|f|`` required at ``y = +-extent``.
    """

    def __init__(
        self,
        segments: Sequence[Segment],
        plateau_halfwidth: float = 0.5,
        tail_slope: float = 1.0,
        extent: float = 30.0,
        tail_floor: float = 5.0,
        name: str | None = None,
    ):
        if not segments:
            raise ProfileError("a profile needs at least one segment")
        if plateau_halfwidth <= 0:
            raise ProfileError("plateau_halfwidth must be positive")
        if tail_slope <= 0:
            raise ProfileError("tail_slope must be positive so that f(y)*sign(y) grows without bound")
        segs = list(segments)
        for k, seg in enumerate(segs):
            if not seg.y_to > seg.y_from:
                raise ProfileError(f"segment {k} has empty interval [{seg.y_from}, {seg.y_to})")
        for k in range(len(segs) - 1):
            gap = segs[k + 1].y_from - segs[k].y_to
            if abs(gap) > 1e-12:
                what = "gap" if gap > 0 else "overlap"
                raise ProfileError(f"{what} between segment {k} and {k + 1} at y={segs[k].y_to}")
        lo, hi = segs[0].y_from, segs[-1].y_to
        if lo < -extent or hi > extent:
            raise ProfileError(f"user segments [{lo}, {hi}) exceed the represented range [-{extent}, {extent}]")

        self.name = name
        self.plateau_halfwidth = float(plateau_halfwidth)
        self.tail_slope = float(tail_slope)
        self.extent = float(extent)
        self.tail_floor = float(tail_floor)
        self.user_segments = tuple(segs)

        full = []
        if lo > -extent:
            f_lo = float(segs[0].value(lo))
            full.append(LinearSegment(-extent, lo, tail_slope, f_lo - tail_slope * lo))
        full.extend(segs)
        if hi < extent:
            f_hi = float(segs[-1].value(hi))
            full.append(LinearSegment(hi, extent, tail_slope, f_hi - tail_slope * hi))
        self.segments = tuple(full)
        self._bounds = np.array([s.y_from for s in full] + [full[-1].y_to])

        jumps = []
        for left, right in zip(full[:-1], full[1:]):
            yb = right.y_from
            fm = float(left.value(yb))
            fp = float(right.value(yb))
            if abs(fp - fm) > JUMP_TOL * max(1.0, abs(fp), abs(fm)):
                jumps.append(Jump(yb, fp, fm))
        self.jumps = tuple(jumps)

        # cumulative integral from -extent to each segment start
        cum = [0.0]
        for seg in full:
            cum.append(cum[-1] + seg.integral(seg.y_from, seg.y_to))
        self._cum = np.array(cum)
        self._F0 = self._primitive(0.0) if -extent <= 0.0 <= extent else 0.0

        self._validate()

    # --- validation -------------------------------------------------------
    def _validate(self):
        eta = self.plateau_halfwidth
        ys = [j.y for j in self.jumps]
        for a, b in zip(ys[:-1], ys[1:]):
            if b - a < 4 * eta:
                raise ProfileError(f"jumps at y={a} and y={b} are closer than 4*plateau_halfwidth={4 * eta}")
        for j in self.jumps:
            if j.y - 2 * eta < -self.extent or j.y + 2 * eta > self.extent:
                raise ProfileError(f"plateau around jump at y={j.y} leaves the represented range")
            t = np.linspace(0.0, 1.0, 17)[1:-1]
            left = self.evaluate(j.y - 2 * eta * t)
            right = self.evaluate(j.y + 2 * eta * t)
            tol = 1e-10 * max(1.0, abs(j.f_plus), abs(j.f_minus))
            if np.max(np.abs(left - j.f_minus)) > tol or np.max(np.abs(right - j.f_plus)) > tol:
                raise ProfileError(
                    f"f is not constant on ({j.y - 2 * eta}, {j.y + 2 * eta}) around the jump at y={j.y}"
                )
        f_lo = float(self.evaluate(-self.extent))
        f_hi = float(self.evaluate(self.extent))
        if not (f_lo < -self.tail_floor and f_hi > self.tail_floor):
            raise ProfileError(
                f"profile must satisfy f(-L_max) < -{self.tail_floor} < {self.tail_floor} < f(L_max); "
                f"got f(-{self.extent})={f_lo:.4g}, f({self.extent})={f_hi:.4g}"
            )

    # --- evaluation -------------------------------------------------------
    def _check_range(self, y):
        if np.any(y < -self.extent) or np.any(y > self.extent) or np.any(~np.isfinite(y)):
            bad = y[(y < -self.extent) | (y > self.extent) | ~np.isfinite(y)]
            raise ProfileRangeError(f"y={bad.flat[0]} outside represented range [-{self.extent}, {self.extent}]")

    def _segment_index(self, y, side="right"):
        idx = np.searchsorted(self._bounds, y, side=side) - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def _dispatch(self, y, method, side="right"):
        y = np.asarray(y, dtype=float)
        self._check_range(y)
        idx = self._segment_index(y, side)
        out = np.empty_like(y)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = getattr(self.segments[k], method)(y[sel])
        return out if out.ndim else float(out)

    def evaluate(self, y):
        """f(y); at a jump ordinate the right limit f(y+) is returned."""
        return self._dispatch(y, "value", "right")

    __call__ = evaluate

    def derivative(self, y, side="right"):
        """Bounded part of f'(y); undefined exactly at a jump ordinate."""
        arr = np.asarray(y, dtype=float)
        for j in self.jumps:
            if np.any(arr == j.y):
                raise JumpPointError(f"f' is not defined at the jump ordinate y={j.y}")
        return self._dispatch(arr, "slope", side)

    def _primitive(self, y):
        """Integral of f from -extent to y (scalar)."""
        k = int(self._segment_index(np.asarray(y, dtype=float)))
        seg = self.segments[k]
        return self._cum[k] + seg.integral(seg.y_from, float(y))

    def antiderivative(self, y):
        """F(y) = integral of f from 0 to y."""
        arr = np.asarray(y, dtype=float)
        self._check_range(arr)
        flat = np.array([self._primitive(v) for v in arr.ravel()]) - self._F0
        out = flat.reshape(arr.shape)
        return out if out.ndim else float(out)

    def max_slope(self) -> float:
        """Sup of |f'| over the represented range (sampled)."""
        y = np.linspace(-self.extent, self.extent, 20001)
        y = y[~np.isin(y, [j.y for j in self.jumps])]
        return float(np.max(np.abs(self.derivative(y))))

    @property
    def is_continuous(self) -> bool:
        return not self.jumps

    def to_config(self) -> dict:
        """Round-trippable mapping of the user-facing definition."""
        out = {} if self.name is None else {"name": self.name}
        return out | {
            "tail_floor": self.tail_floor,
            "plateau_halfwidth": self.plateau_halfwidth,
            "tail_slope": self.tail_slope,
            "extent": self.extent,
            "segments": [
                {"kind": s.kind, "y_from": s.y_from, "y_to": s.y_to, "params": s.params()}
                for s in self.user_segments
            ],
        }

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<CoriolisProfile{label}: {len(self.user_segments)} segments, {len(self.jumps)} jumps>"


# --- module-level operations ---------------------------------------------

def evaluate(profile: CoriolisProfile, y):
    return profile.evaluate(y)


def derivative(profile: CoriolisProfile, y, side="right"):
    return profile.derivative(y, side)


def antiderivative(profile: CoriolisProfile, y):
    return profile.antiderivative(y)


def half_jump_sets(profile: CoriolisProfile) -> tuple[list[float], list[float]]:
    """Half-jump values of the positive jumps and (negated) negative jumps."""
    left = [j.f_o for j in profile.jumps if j.f_o > 0]
    right = [-j.f_o for j in profile.jumps if j.f_o < 0]
    return left, right


def count_JL_JR(profile: CoriolisProfile, E: float) -> tuple[int, int]:
    """Number of left/right half-jump values strictly above the level ``E > 0``."""
    if not E > 0:
        raise ValueError(f"level must be positive, got {E}")
    left, right = half_jump_sets(profile)
    for v in left + right:
        if abs(E - v) <= LEVEL_TOL * max(1.0, abs(v)):
            raise AmbiguousLevelError(f"level {E} coincides with the half-jump value {v}")
    return sum(v > E for v in left), sum(v > E for v in right)
