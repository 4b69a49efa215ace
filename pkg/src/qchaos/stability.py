"""Fixed points, 2-cycles and their multipliers for the pure and mixed maps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    BlochVector,
    ErrorAngle,
    as_angle,
    bloch_step,
    f_eps,
    f_eps_derivative,
    purity,
    z_to_bloch,
)

NEUTRAL_BAND = 1e-6
MERGE_DIST = 1e-7


class Stability(str, enum.Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    NEUTRAL = "neutral"


def classify_multiplier(lam: float, band: float = NEUTRAL_BAND) -> Stability:
    if abs(lam - 1.0) < band:
        return Stability.NEUTRAL
    return Stability.ATTRACTING if lam < 1.0 else Stability.REPELLING


class NotFound(LookupError):
    """No periodic orbit was detected within the iteration budget."""


class NoC3(LookupError):
    """The mixed repelling fixed point does not exist for this error angle."""


@dataclass(frozen=True)
class PeriodicPoint:
    location: BlochVector
    period: int
    multiplier: float
    stability: Stability
    purity: float
    name: str = ""
    z: complex | None = None
    # the whole orbit, starting at ``location``
    orbit: tuple[BlochVector, ...] = ()

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "u": self.location.u,
            "v": self.location.v,
            "w": self.location.w,
            "period": self.period,
            "multiplier": self.multiplier,
            "stability": self.stability.value,
            "purity": self.purity,
        }
        if self.z is not None:
            d["z_re"] = self.z.real
            d["z_im"] = self.z.imag
        if len(self.orbit) > 1:
            d["orbit"] = [[p.u, p.v, p.w] for p in self.orbit]
        return d


def _make_point(loc: BlochVector, period: int, lam: float, name: str = "", z=None, orbit=()):
    return PeriodicPoint(
        location=loc,
        period=period,
        multiplier=float(lam),
        stability=classify_multiplier(lam),
        purity=purity(loc),
        name=name,
        z=z,
        orbit=tuple(orbit),
    )


# --------------------------------------------------------------------------
# polynomial helpers


def polish_roots(coeffs: np.ndarray, roots: np.ndarray, steps: int = 1) -> np.ndarray:
    """Newton-polish companion-matrix roots of ``coeffs`` (highest degree first)."""
    dcoeffs = np.polyder(coeffs)
    out = np.array(roots, dtype=complex)
    for _ in range(steps):
        p = np.polyval(coeffs, out)
        dp = np.polyval(dcoeffs, out)
        ok = dp != 0
        out[ok] = out[ok] - p[ok] / dp[ok]
    return out


def fixed_point_cubic(eps: ErrorAngle | float) -> np.ndarray:
    """z^3 + k z^2 + k z - 1 with k = cot(pi/4 + eps/2)."""
    th = as_angle(eps).theta
    k = math.cos(th) / math.sin(th)
    return np.array([1.0, k, k, -1.0])


def two_cycle_quintic(eps: ErrorAngle | float) -> np.ndarray:
    """Numerator of f(f(z)) - z, a degree-5 polynomial."""
    th = as_angle(eps).theta
    s, c = math.sin(th), math.cos(th)
    N = np.array([-c, 0.0, s])  # s - c z^2
    D = np.array([s, 0.0, c])  # c + s z^2
    N2, D2, ND = np.polymul(N, N), np.polymul(D, D), None
    del ND
    # f(f) = (s D^2 - c N^2) / (c D^2 + s N^2)
    top = np.polysub(s * D2, c * N2)
    bottom = np.polyadd(c * D2, s * N2)
    return np.polysub(top, np.polymul([1.0, 0.0], bottom))


# --------------------------------------------------------------------------
# pure-state map


def pure_fixed_points(eps: ErrorAngle | float) -> list[PeriodicPoint]:
    """The three fixed points of f_eps, real root first."""
    cubic = fixed_point_cubic(eps)
    roots = polish_roots(cubic, np.roots(cubic))
    # exactly one real root: the one with the smallest imaginary part
    order = np.argsort(np.abs(roots.imag))
    pts = []
    for i, idx in enumerate(order):
        z = complex(roots[idx])
        if i == 0:
            z = complex(z.real, 0.0)
        lam = abs(f_eps_derivative(z, eps))
        pts.append(_make_point(z_to_bloch(z), 1, lam, name="C2" if i == 0 else f"pure-fp{i}", z=z))
    return pts


def real_pure_fixed_point(eps: ErrorAngle | float) -> PeriodicPoint:
    return pure_fixed_points(eps)[0]


def pure_two_cycles(
    eps: ErrorAngle | float, include_complex: bool = False, imag_tol: float = 1e-9
) -> list[PeriodicPoint]:
    """Genuine period-2 points of f_eps, from the quintic deflated by the cubic.

    By default only the cycle on the real axis (the invariant plane) is
    returned, which is the attracting C1 pair while it exists. Past the
    merge with the real fixed point the quadratic's roots turn complex; they
    still form a repelling 2-cycle, reported only with ``include_complex``.
    """
    quintic = two_cycle_quintic(eps)
    quad, _rem = np.polydiv(quintic, fixed_point_cubic(eps))
    roots = polish_roots(quintic, np.roots(quad), steps=2)
    if len(roots) != 2:
        return []
    z1, z2 = complex(roots[0]), complex(roots[1])
    if abs(z1 - z2) < 1e-7 * max(1.0, abs(z1)):
        # double root: the pair has merged into a fixed point
        return []
    real = abs(z1.imag) <= imag_tol * max(1.0, abs(z1)) and abs(z2.imag) <= imag_tol * max(
        1.0, abs(z2)
    )
    if not real and not include_complex:
        return []
    if real:
        z1, z2 = complex(z1.real, 0.0), complex(z2.real, 0.0)
    # C1^1 is the point nearer the north pole |0>
    if abs(z2) < abs(z1):
        z1, z2 = z2, z1
    lam = abs(f_eps_derivative(z1, eps) * f_eps_derivative(z2, eps))
    b1, b2 = z_to_bloch(z1), z_to_bloch(z2)
    tag = "C1" if real else "pure-2cycle"
    return [
        _make_point(b1, 2, lam, name=f"{tag}^1", z=z1, orbit=(b1, b2)),
        _make_point(b2, 2, lam, name=f"{tag}^2", z=z2, orbit=(b2, b1)),
    ]


def pure_attractors(eps: ErrorAngle | float) -> list[PeriodicPoint]:
    """Attracting pure cycles: the C1 pair, or the single fixed point past the merge."""
    out = [p for p in pure_two_cycles(eps) if p.stability is Stability.ATTRACTING]
    out += [
        PeriodicPoint(**{**p.__dict__, "name": "pure-attractor"})
        for p in pure_fixed_points(eps)
        if p.stability is Stability.ATTRACTING
    ]
    return out


# --------------------------------------------------------------------------
# Bloch-ball map


def jacobian(s: BlochVector, eps: ErrorAngle | float) -> np.ndarray:
    """Analytic 3x3 Jacobian of :func:`bloch_step` at ``s``."""
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    u, v, w = s.u, s.v, s.w
    D = 1.0 + w * w
    a = u * u - v * v
    return np.array(
        [
            [2 * u * se / D, -2 * v * se / D, 2 * ce / D - (2 * w * ce + a * se) * 2 * w / D**2],
            [-2 * v / D, -2 * u / D, 4 * u * v * w / D**2],
            [2 * u * ce / D, -2 * v * ce / D, -2 * se / D - (a * ce - 2 * w * se) * 2 * w / D**2],
        ]
    )


def spectral_radius(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(m)).max())


def cycle_multiplier(orbit, eps: ErrorAngle | float) -> float:
    """Spectral radius of the product of Jacobians around ``orbit``."""
    M = np.eye(3)
    for p in orbit:
        M = jacobian(p, eps) @ M
    return spectral_radius(M)


def c0_multiplier(eps: ErrorAngle | float) -> float:
    return spectral_radius(jacobian(BlochVector(0.0, 0.0, 0.0), eps))


def c0_point(eps: ErrorAngle | float) -> PeriodicPoint:
    return _make_point(BlochVector(0.0, 0.0, 0.0), 1, c0_multiplier(eps), name="C0")


def plane_fixed_point_polynomial(eps: ErrorAngle | float) -> np.ndarray:
    """Degree-7 polynomial in w whose real roots carry the v = 0 fixed points.

    The w-equation gives u^2 = G(w)/cos(eps) with G = w^3 + (1 + 2 sin eps) w;
    the u-equation then gives u linearly. Squaring that and equating to
    u^2 eliminates u.
    """
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    G = np.array([1.0, 0.0, 1.0 + 2.0 * se, 0.0])
    lin = np.polyadd(np.array([2.0 * ce * ce, 0.0]), se * G)
    one_w2 = np.array([1.0, 0.0, 1.0])
    return np.polysub(np.polymul(lin, lin), ce * np.polymul(G, np.polymul(one_w2, one_w2)))


def _plane_residual(u, w, ce, se):
    D = 1.0 + w * w
    return (2 * w * ce + u * u * se) / D - u, (u * u * ce - 2 * w * se) / D - w


def _plane_newton(u, w, eps: float, iters: int = 60):
    """Vectorised Newton on the v = 0 fixed-point equations."""
    ce, se = math.cos(eps), math.sin(eps)
    u = np.array(u, dtype=float)
    w = np.array(w, dtype=float)
    for _ in range(iters):
        D = 1.0 + w * w
        F1, F2 = _plane_residual(u, w, ce, se)
        a11 = 2 * u * se / D - 1.0
        a12 = 2 * ce / D - (2 * w * ce + u * u * se) * 2 * w / D**2
        a21 = 2 * u * ce / D
        a22 = -2 * se / D - (u * u * ce - 2 * w * se) * 2 * w / D**2 - 1.0
        det = a11 * a22 - a12 * a21
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        du = (F1 * a22 - F2 * a12) / det
        dw = (a11 * F2 - a21 * F1) / det
        u = u - du
        w = w - dw
        bad = ~np.isfinite(u) | ~np.isfinite(w) | (u * u + w * w > 4.0)
        u = np.where(bad, np.nan, u)
        w = np.where(bad, np.nan, w)
    F1, F2 = _plane_residual(u, w, ce, se)
    return u, w, np.hypot(F1, F2)


def _merge(points: list[tuple[float, float]], dist: float = MERGE_DIST):
    out: list[tuple[float, float]] = []
    for p in points:
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > dist for q in out):
            out.append(p)
    return out


def _plane_candidates(eps: ErrorAngle | float, seed_grid: int = 32) -> list[tuple[float, float]]:
    """All real (u, w) fixed points with u^2 + w^2 <= 4, from elimination and seeded Newton."""
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    cand: list[tuple[float, float]] = []
    if abs(ce) > 1e-8:
        poly = plane_fixed_point_polynomial(e)
        roots = polish_roots(poly, np.roots(poly), steps=2)
        for r in roots:
            if abs(r.imag) > 1e-6:
                continue
            w = float(r.real)
            G = w**3 + (1.0 + 2.0 * se) * w
            u = (2 * w * ce + G / ce * se) / (1.0 + w * w)
            cand.append((u, w))
    # seeded Newton over the disk catches anything the elimination dropped
    g = (np.arange(seed_grid) + 0.5) / seed_grid * 2.0 - 1.0
    U, W = np.meshgrid(g, g)
    inside = U * U + W * W <= 1.0
    cand.extend(zip(U[inside].tolist(), W[inside].tolist()))
    u, w, res = _plane_newton([c[0] for c in cand], [c[1] for c in cand], e)
    ok = np.isfinite(res) & (res < 1e-12)
    pts = [(float(a), float(b)) for a, b in zip(u[ok], w[ok])]
    return _merge(pts)


def invariant_plane_fixed_points(
    eps: ErrorAngle | float, tol: float = 1e-9
) -> list[PeriodicPoint]:
    """Fixed points (u, 0, w) in the closed unit disk, sorted by purity."""
    out = []
    for u, w in _plane_candidates(eps):
        if u * u + w * w > 1.0 + tol:
            continue
        loc = BlochVector(u, 0.0, w)
        lam = spectral_radius(jacobian(loc, eps))
        if loc.norm_sq < 1e-20:
            name = "C0"
        elif abs(loc.norm_sq - 1.0) <= 1e-7:
            name = "C2"
        else:
            name = "C3" if (u > 0 and w > 0) else "mixed-fp"
        out.append(_make_point(loc, 1, lam, name=name))
    out.sort(key=lambda p: p.purity)
    return out


@lru_cache(maxsize=256)
def _find_c3_cached(e: float) -> PeriodicPoint:
    mixed = [p for p in invariant_plane_fixed_points(e) if p.name == "C3"]
    if not mixed:
        raise NoC3(f"no mixed repelling fixed point at eps = {math.degrees(e):.4f} deg")
    return mixed[0]


def find_c3(eps: ErrorAngle | float) -> PeriodicPoint:
    """The mixed repelling fixed point C3 in the positive quadrant of the plane."""
    return _find_c3_cached(as_angle(eps).epsilon)


# --------------------------------------------------------------------------
# numerical cycle detection


def _orbit_points(x: BlochVector, eps, period: int) -> list[BlochVector]:
    pts = [x]
    for _ in range(period - 1):
        pts.append(bloch_step(pts[-1], eps))
    return pts


def _polish_cycle(x: BlochVector, eps, period: int, steps: int = 8) -> BlochVector:
    """Newton on F(x) = f^period(x) - x."""
    y = x.as_array()
    for _ in range(steps):
        pts = _orbit_points(BlochVector.from_array(y), eps, period)
        M = np.eye(3)
        for p in pts:
            M = jacobian(p, eps) @ M
        F = bloch_step(pts[-1], eps).as_array() - y
        try:
            dy = np.linalg.solve(M - np.eye(3), -F)
        except np.linalg.LinAlgError:
            break
        y_new = y + dy
        if not np.all(np.isfinite(y_new)):
            break
        y = y_new
        if np.linalg.norm(dy) < 1e-15:
            break
    return BlochVector.from_array(y)


def detect_long_cycle(
    seed: BlochVector,
    eps: ErrorAngle | float,
    max_iter: int = 200_000,
    tol: float = 1e-9,
    transient: int = 2000,
    max_period: int = 4096,
) -> PeriodicPoint:
    """Find the periodic orbit that the forward orbit of ``seed`` settles onto.

    After the transient, Brent's variant of tortoise-and-hare is run with a
    distance tolerance instead of equality; the candidate period is then
    reduced to the smallest one that closes the orbit, and the cycle point is
    polished with Newton before the multiplier is taken.
    """
    x = seed
    for _ in range(transient):
        x = bloch_step(x, eps)
    detect_tol = max(tol, 1e-7)
    steps = 0
    power = lam = 1
    tortoise = x
    hare = bloch_step(x, eps)
    steps += 1
    while tortoise.distance(hare) > detect_tol:
        if steps >= max_iter:
            raise NotFound(f"no recurrence within {max_iter} iterations")
        if power == lam:
            # move the tortoise forward and double the search window
            tortoise = hare
            power = min(power * 2, max_period)
            lam = 0
        hare = bloch_step(hare, eps)
        lam += 1
        steps += 1
        if lam > max_period:
            tortoise = hare
            lam = 0
    period = lam
    # smallest divisor that already closes the orbit
    for p in range(1, period + 1):
        if period % p == 0:
            y = tortoise
            for _ in range(p):
                y = bloch_step(y, eps)
            if y.distance(tortoise) <= detect_tol * 10:
                period = p
                break
    point = _polish_cycle(tortoise, eps, period)
    back = point
    for _ in range(period):
        back = bloch_step(back, eps)
    if back.distance(point) > tol:
        # Newton wandered off; fall back to the unpolished point
        point = tortoise
    orbit = _orbit_points(point, eps, period)
    lam_c = cycle_multiplier(orbit, eps)
    name = "C0" if point.norm_sq < 1e-12 and period == 1 else f"cycle-{period}"
    return _make_point(point, period, lam_c, name=name, orbit=orbit)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AttractorInventory:
    epsilon: ErrorAngle
    pure_attractors: list[PeriodicPoint]
    mixed_fixed_points: list[PeriodicPoint]
    c0_stability: PeriodicPoint
    detected_long_cycles: list[PeriodicPoint] = field(default_factory=list)

    @property
    def c1(self) -> tuple[PeriodicPoint, PeriodicPoint] | None:
        pair = [p for p in self.pure_attractors if p.period == 2]
        return (pair[0], pair[1]) if len(pair) == 2 else None

    @property
    def single_pure(self) -> PeriodicPoint | None:
        fp = [p for p in self.pure_attractors if p.period == 1]
        return fp[0] if fp else None

    @property
    def c0_attracting(self) -> bool:
        return self.c0_stability.stability is Stability.ATTRACTING

    def to_dict(self) -> dict:
        return {
            "eps_rad": self.epsilon.epsilon,
            "eps_deg": self.epsilon.degrees,
            "pure_attractors": [p.to_dict() for p in self.pure_attractors],
            "mixed_fixed_points": [p.to_dict() for p in self.mixed_fixed_points],
            "c0": self.c0_stability.to_dict(),
            "detected_long_cycles": [p.to_dict() for p in self.detected_long_cycles],
        }


def detect_mixed_attractor(
    seed: BlochVector,
    eps: ErrorAngle | float,
    transient: int = 20_000,
    recurrence_tol: float = 1e-3,
    max_period: int = 4096,
    n_samples: int = 20_000,
) -> PeriodicPoint:
    """Like :func:`detect_long_cycle`, but also accepts a quasi-periodic attractor.

    Below eps = -30 deg the attracting object inside the ball is an invariant
    closed curve whose near-returns drift slowly instead of closing exactly.
    It is reported as a ``quasi-cycle-k`` with k the first return time within
    ``recurrence_tol``; ``orbit`` then holds ``n_samples`` consecutive points,
    dense enough to act as the r-tube during basin classification. The
    multiplier is the transverse one (second-largest eigenvalue modulus of
    the Jacobian product over k steps) since the tangential one is ~1.
    """
    try:
        return detect_long_cycle(seed, eps, transient=transient)
    except NotFound:
        pass
    x = seed
    for _ in range(transient):
        x = bloch_step(x, eps)
    x0 = x
    period = 0
    for k in range(1, max_period + 1):
        x = bloch_step(x, eps)
        if x.distance(x0) < recurrence_tol:
            period = k
            break
    if period == 0:
        raise NotFound(f"no return within {recurrence_tol:g} after {max_period} steps")
    pts = _orbit_points(x0, eps, max(n_samples, period))
    M = np.eye(3)
    for p in pts[:period]:
        M = jacobian(p, eps) @ M
    mods = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
    return _make_point(x0, period, float(mods[1]), name=f"quasi-cycle-{period}", orbit=pts)


def _mixed_attractor_seeds(eps: ErrorAngle, grid: int = 24, steps: int = 3000) -> list[BlochVector]:
    """End points of plane orbits that neither purify nor reach C0."""
    from .core import bloch_step_arrays

    g = (np.arange(grid) + 0.5) / grid * 2.0 - 1.0
    U, W = np.meshgrid(g, g)
    m = U * U + W * W < 1.0
    u, w = U[m], W[m]
    v = np.zeros_like(u)
    for _ in range(steps):
        u, v, w = bloch_step_arrays(u, v, w, eps)
    n2 = u * u + v * v + w * w
    keep = (n2 < 1.0 - 1e-3) & (n2 > 1e-6)
    return [BlochVector(float(a), float(b), float(c)) for a, b, c in zip(u[keep], v[keep], w[keep])]


def _long_cycles(eps: ErrorAngle, max_tries: int = 6) -> list[PeriodicPoint]:
    found: list[PeriodicPoint] = []
    tries = 0
    for seed in _mixed_attractor_seeds(eps):
        if any(min(q.distance(seed) for q in c.orbit) < 5e-3 for c in found):
            continue
        if tries >= max_tries:
            break
        tries += 1
        try:
            cyc = detect_mixed_attractor(seed, eps)
        except NotFound:
            continue
        if cyc.purity > 1.0 - 1e-6 or cyc.stability is Stability.REPELLING:
            continue
        if any(min(q.distance(cyc.location) for q in c.orbit) < 5e-3 for c in found):
            continue
        found.append(cyc)
    return found


@lru_cache(maxsize=128)
def _inventory_cached(e: float) -> AttractorInventory:
    eps = ErrorAngle(e)
    pure = pure_attractors(eps)
    c0 = c0_point(eps)
    mixed = invariant_plane_fixed_points(eps)
    longc = [] if c0.stability is Stability.ATTRACTING else _long_cycles(eps)
    return AttractorInventory(eps, pure, mixed, c0, longc)


def attractor_inventory(eps: ErrorAngle | float) -> AttractorInventory:
    """Every attractor relevant to basin classification at this error angle."""
    return _inventory_cached(as_angle(eps).epsilon)
