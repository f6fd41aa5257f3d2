"""Hamiltonian families on the unit circle, discount weights and analytic oracles.

Two closed-form families are supported:

* ``mechanical``: ``H(x, p) = p**2 / 2 + V(x)`` with ``V`` a finite cosine sum,
  ``L(x, v) = v**2 / 2 - V(x)``.
* ``rotation``: ``H(x, p) = (p + eta(x))**2 / 2`` with
  ``eta(x) = omega + A sin(2 pi x)``, ``L(x, v) = v**2 / 2 - eta(x) v``.

Both are quadratic in the fibre, hence convex and superlinear.  Positions are
reals modulo 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DiagnosticError

TWO_PI = 2.0 * math.pi


class Family(str, Enum):
    MECHANICAL = "mechanical"
    ROTATION = "rotation"


class AlphaKind(str, Enum):
    CONSTANT = "constant"
    POSITIVE_SINUSOID = "positive_sinusoid"
    VANISHING_BAND = "vanishing_band"


def wrap(x):
    """Reduce positions to [0, 1)."""
    return np.mod(x, 1.0)


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    # (k, a_k, phi_k) triples of V(x) = sum a_k cos(2 pi k x + phi_k)
    potential: tuple = ()
    omega: float = 0.0
    amplitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        terms = tuple((int(k), float(a), float(phi)) for k, a, phi in self.potential)
        object.__setattr__(self, "potential", terms)
        if self.family is Family.ROTATION and terms:
            raise ValueError("rotation family takes no potential terms")
        for k, a, phi in terms:
            if not (math.isfinite(a) and math.isfinite(phi)):
                raise ValueError(f"non-finite potential term {(k, a, phi)}")
        if not (math.isfinite(self.omega) and math.isfinite(self.amplitude)):
            raise ValueError("omega and amplitude must be finite")

    @classmethod
    def mechanical(cls, terms=()):
        return cls(Family.MECHANICAL, potential=tuple(terms))

    @classmethod
    def rotation(cls, omega, amplitude=0.0):
        return cls(Family.ROTATION, omega=float(omega), amplitude=float(amplitude))

    def V(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a, phi in self.potential:
            out = out + a * np.cos(TWO_PI * k * x + phi)
        return out

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        return self.omega + self.amplitude * np.sin(TWO_PI * x)

    @property
    def is_even(self):
        """True when the model is symmetric under x -> -x, v -> -v."""
        if self.family is Family.ROTATION:
            return self.omega == 0.0 and self.amplitude == 0.0
        return all(math.sin(phi) == 0.0 or a == 0.0 for _, a, phi in self.potential)


def eval_H(model: ModelSpec, x, p):
    p = np.asarray(p, dtype=float)
    if model.family is Family.MECHANICAL:
        return 0.5 * p * p + model.V(x)
    q = p + model.eta(x)
    return 0.5 * q * q


def eval_L(model: ModelSpec, x, v):
    v = np.asarray(v, dtype=float)
    if model.family is Family.MECHANICAL:
        return 0.5 * v * v - model.V(x)
    return 0.5 * v * v - model.eta(x) * v


def dL_dv(model: ModelSpec, x, v):
    """Fibre derivative of L; the unique p with zero Fenchel gap."""
    v = np.asarray(v, dtype=float)
    if model.family is Family.MECHANICAL:
        return v + 0.0 * np.asarray(x, dtype=float)
    return v - model.eta(x)


def fenchel_gap(model: ModelSpec, x, v, p):
    """L(x, v) + H(x, p) - p v, nonnegative by convex duality."""
    return eval_L(model, x, v) + eval_H(model, x, p) - np.asarray(p, dtype=float) * np.asarray(v, dtype=float)


@dataclass(frozen=True)
class AlphaProfile:
    kind: AlphaKind
    level: float = 1.0
    base: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0
    start: float = 0.0
    end: float = 0.0
    ramp: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", AlphaKind(self.kind))
        for name in ("level", "base", "amplitude", "phase", "start", "end", "ramp"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"alpha.{name} must be finite")
        if self.kind is AlphaKind.CONSTANT and self.level < 0:
            raise ValueError("constant alpha must be nonnegative")
        if self.kind is AlphaKind.POSITIVE_SINUSOID and not self.base > abs(self.amplitude):
            raise ValueError("positive sinusoid needs base > |amplitude|")
        if self.kind is AlphaKind.VANISHING_BAND:
            if self.level < 0 or self.ramp < 0:
                raise ValueError("band level and ramp must be nonnegative")
            if not 0.0 <= self.end - self.start <= 1.0:
                raise ValueError("band needs start <= end <= start + 1")

    @classmethod
    def constant(cls, level):
        return cls(AlphaKind.CONSTANT, level=float(level))

    @classmethod
    def positive_sinusoid(cls, base, amplitude, phase=0.0):
        return cls(AlphaKind.POSITIVE_SINUSOID, base=float(base), amplitude=float(amplitude), phase=float(phase))

    @classmethod
    def vanishing_band(cls, start, end, level=1.0, ramp=0.05):
        return cls(AlphaKind.VANISHING_BAND, start=float(start), end=float(end), level=float(level), ramp=float(ramp))

    def scaled(self, factor):
        """The profile factor * alpha, same kind."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind is AlphaKind.CONSTANT:
            return AlphaProfile.constant(factor * self.level)
        if self.kind is AlphaKind.POSITIVE_SINUSOID:
            return AlphaProfile.positive_sinusoid(factor * self.base, factor * self.amplitude, self.phase)
        return AlphaProfile.vanishing_band(self.start, self.end, factor * self.level, self.ramp)


def _band_distance(x, start, end):
    width = end - start
    off = np.mod(x - start, 1.0)
    inside = off <= width
    d = np.minimum(off - width, 1.0 - off)
    return np.where(inside, 0.0, d)


def eval_alpha(profile: AlphaProfile, x):
    x = np.asarray(x, dtype=float)
    if profile.kind is AlphaKind.CONSTANT:
        return np.full_like(x, profile.level)
    if profile.kind is AlphaKind.POSITIVE_SINUSOID:
        return profile.base + profile.amplitude * np.sin(TWO_PI * x + profile.phase)
    d = _band_distance(x, profile.start, profile.end)
    if profile.ramp == 0.0:
        return np.where(d > 0.0, profile.level, 0.0)
    return profile.level * np.minimum(1.0, d / profile.ramp)


# -- quadrature -------------------------------------------------------------

MAX_SUBINTERVALS = 2**20


def adaptive_simpson(f, a, b, tol=1e-8, max_intervals=MAX_SUBINTERVALS):
    """Integrate ``f`` on [a, b] by adaptive Simpson with interval halving.

    ``f`` must accept numpy arrays.  Raises DiagnosticError if more than
    ``max_intervals`` accepted subintervals would be needed.
    """
    if b == a:
        return 0.0
    fa, fm, fb = f(np.array([a, 0.5 * (a + b), b]))
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol)]
    total = 0.0
    accepted = 0
    while stack:
        lo, hi, flo, fmid, fhi, s, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(np.array([0.5 * (lo + mid), 0.5 * (mid + hi)]))
        left = (mid - lo) / 6.0 * (flo + 4 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * fr + fhi)
        delta = left + right - s
        if abs(delta) <= 15.0 * eps or hi - lo < 1e-14:
            total += left + right + delta / 15.0
            accepted += 1
            if accepted > max_intervals:
                raise DiagnosticError(f"adaptive Simpson exceeded {max_intervals} subintervals")
            continue
        stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps))
        stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps))
    return total


def golden_max(f, lo, hi, tol=1e-10):
    """Maximise a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# -- oracle -----------------------------------------------------------------

@dataclass(frozen=True)
class OracleData:
    model: ModelSpec
    c_analytic: float
    aubry_points: tuple
    aubry_whole_circle: bool
    peierls_closure: str
    quad_tol: float = 1e-8
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _speed(self, x):
        return np.sqrt(2.0 * np.maximum(self.c_analytic - self.model.V(x), 0.0))

    def action_primitive(self, xs):
        """F(x) = integral of sqrt(2 (c - V)) from 0 to x, for sorted-or-not xs in [0, 1]."""
        xs = np.asarray(xs, dtype=float)
        order = np.argsort(xs, kind="stable")
        pts = np.concatenate(([0.0], xs[order]))
        seg_tol = self.quad_tol / max(len(pts), 1)
        pieces = [adaptive_simpson(self._speed, pts[m], pts[m + 1], seg_tol) for m in range(len(pts) - 1)]
        out = np.empty_like(xs)
        out[order] = np.cumsum(pieces)
        return out

    @property
    def loop_action(self):
        """Integral of sqrt(2 (c - V)) over the whole circle."""
        if "loop" not in self._cache:
            self._cache["loop"] = adaptive_simpson(self._speed, 0.0, 1.0, self.quad_tol)
        return self._cache["loop"]

    def mane_potential(self, fy, fx):
        """Shorter of the two arcs, given primitive values at both ends."""
        d = np.abs(fx - fy)
        return np.minimum(d, self.loop_action - d)

    def barrier(self, y, x):
        """Analytic barrier h(y, x), broadcasting over y and x."""
        y = wrap(np.asarray(y, dtype=float))
        x = wrap(np.asarray(x, dtype=float))
        if self.model.family is Family.ROTATION:
            return self.corrector(x) - self.corrector(y)
        if self.aubry_whole_circle:
            return np.zeros(np.broadcast(y, x).shape)
        yb, xb = np.broadcast_arrays(y, x)
        flat = np.concatenate([yb.ravel(), xb.ravel(), np.asarray(self.aubry_points)])
        F = self.action_primitive(flat)
        n = yb.size
        fy, fx, fa = F[:n], F[n:2 * n], F[2 * n:]
        best = np.full(n, np.inf)
        for f_a in fa:
            best = np.minimum(best, self.mane_potential(fy, f_a) + self.mane_potential(f_a, fx))
        return best.reshape(yb.shape)

    def barrier_table(self, xs):
        """Matrix of h(xs[j], xs[i]) indexed [j, i]."""
        xs = wrap(np.asarray(xs, dtype=float))
        if self.model.family is Family.ROTATION:
            w = self.corrector(xs)
            return w[None, :] - w[:, None]
        if self.aubry_whole_circle:
            return np.zeros((len(xs), len(xs)))
        F = self.action_primitive(np.concatenate([xs, np.asarray(self.aubry_points)]))
        fx, fa = F[: len(xs)], F[len(xs):]
        table = np.full((len(xs), len(xs)), np.inf)
        for f_a in fa:
            to_a = self.mane_potential(fx, f_a)
            table = np.minimum(table, to_a[:, None] + to_a[None, :])
        return table

    def corrector(self, x):
        """Rotation family: the weak KAM solution w(x) = (A / 2 pi) cos(2 pi x)."""
        return self.model.amplitude / TWO_PI * np.cos(TWO_PI * np.asarray(x, dtype=float))

    def weighted_offset(self, profile: AlphaProfile, xs=None):
        """alpha-weighted mean of the corrector; over nodes ``xs`` if given, else by quadrature."""
        if xs is not None:
            xs = np.asarray(xs, dtype=float)
            a = eval_alpha(profile, xs)
            return float(np.sum(a * self.corrector(xs)) / np.sum(a))
        num = adaptive_simpson(lambda s: eval_alpha(profile, s) * self.corrector(s), 0.0, 1.0, self.quad_tol)
        den = adaptive_simpson(lambda s: eval_alpha(profile, s), 0.0, 1.0, self.quad_tol)
        return num / den

    def limit(self, profile: AlphaProfile, xs):
        """Analytic vanishing-discount limit on the points ``xs``."""
        xs = np.asarray(xs, dtype=float)
        if self.model.family is Family.ROTATION:
            return self.corrector(xs) - self.weighted_offset(profile, xs)
        if self.aubry_whole_circle:
            return np.zeros_like(xs)
        return np.min(self.barrier(np.asarray(self.aubry_points)[:, None], xs[None, :]), axis=0)


def _potential_maxima(model: ModelSpec, samples=100_000):
    xs = np.arange(samples) / samples
    vals = model.V(xs)
    top = vals.max()
    scale = 1.0 + sum(abs(a) for _, a, _ in model.potential)
    if top - vals.min() <= 1e-12 * scale:
        return float(top), None
    prev, nxt = np.roll(vals, 1), np.roll(vals, -1)
    cand = np.nonzero((vals >= prev) & (vals >= nxt) & (vals >= top - 1e-6 * scale))[0]
    h = 1.0 / samples
    refined = []
    for idx in cand:
        x0 = xs[idx]
        x, v = golden_max(lambda s: float(model.V(s)), x0 - h, x0 + h)
        if vals[idx] >= v:
            x, v = x0, vals[idx]
        refined.append((wrap(x), v))
    c = max(v for _, v in refined)
    pts = []
    for x, v in sorted(refined):
        if v < c - 1e-9 * scale:
            continue
        x = float(x)
        if abs(x - 1.0) < 1e-9:
            x = 0.0
        if any(min(abs(x - q), 1 - abs(x - q)) < 1e-6 for q in pts):
            continue
        pts.append(x)
    return float(c), tuple(sorted(round(p, 10) % 1.0 for p in pts))


def oracle(model: ModelSpec) -> OracleData:
    if model.family is Family.ROTATION:
        return OracleData(
            model=model,
            c_analytic=0.5 * model.omega**2,
            aubry_points=(),
            aubry_whole_circle=True,
            peierls_closure="h(y,x) = w(x) - w(y), w(x) = (A/2pi) cos(2 pi x)",
        )
    c, pts = _potential_maxima(model)
    data = OracleData(
        model=model,
        c_analytic=c,
        aubry_points=pts or (),
        aubry_whole_circle=pts is None,
        peierls_closure="h(y,x) = min_a Phi(y,a) + Phi(a,x), Phi = shorter-arc integral of sqrt(2(c-V))",
    )
    data.loop_action  # fail early if the quadrature does not converge
    return data
