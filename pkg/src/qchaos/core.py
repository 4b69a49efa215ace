"""Forward maps of the CNOT + faulty-Hadamard protocol and the shared value types.

Pure states are carried by a point ``z`` of the Riemann sphere (a Python
``complex`` or the :data:`INFINITY` sentinel), mixed states by a
:class:`BlochVector`. The Bloch map also has an array form,
:func:`bloch_step_arrays`, used by the rasterizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

PHYSICAL_TOL = 1e-9


class NonPureInput(ValueError):
    """Raised when a pure-state conversion receives a mixed state."""


class OffSphere(ValueError):
    """Raised when a Bloch vector does not lie on the requested purity sphere."""


class ProjectionPole(ValueError):
    """Raised when projecting the south pole of a purity sphere."""


class _Infinity:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()
"""The single unsigned point at infinity of the Riemann sphere."""

ExtendedComplex = Union[complex, _Infinity]

# beyond this modulus z**2 overflows; switch to the chart t = 1/z
_LARGE = 1e150
_ROUNDING = 4 * np.finfo(float).eps


def is_infinity(z: object) -> bool:
    return z is INFINITY


@dataclass(frozen=True)
class ErrorAngle:
    """Coherent over/under-rotation of the X_{pi/2} pulse, stored in radians.

    Percent is relative to the ideal 90 degree rotation, so 5 % is 4.5 degrees.
    """

    epsilon: float

    @classmethod
    def from_degrees(cls, deg: float) -> "ErrorAngle":
        return cls(math.radians(deg))

    @classmethod
    def from_percent(cls, pct: float) -> "ErrorAngle":
        return cls(pct / 100.0 * (math.pi / 2))

    @classmethod
    def parse(cls, value: float, unit: str = "deg") -> "ErrorAngle":
        if unit == "deg":
            return cls.from_degrees(value)
        if unit == "pct":
            return cls.from_percent(value)
        if unit == "rad":
            return cls(float(value))
        raise ValueError(f"unknown angle unit {unit!r} (expected deg, pct or rad)")

    @property
    def degrees(self) -> float:
        return math.degrees(self.epsilon)

    @property
    def percent(self) -> float:
        return 100.0 * self.epsilon / (math.pi / 2)

    @property
    def theta(self) -> float:
        """Half-angle pi/4 + eps/2 appearing in the faulty Hadamard."""
        return math.pi / 4 + self.epsilon / 2

    def __float__(self) -> float:
        return self.epsilon


def as_angle(eps: ErrorAngle | float) -> ErrorAngle:
    """Accept either an :class:`ErrorAngle` or a bare radian value."""
    return eps if isinstance(eps, ErrorAngle) else ErrorAngle(float(eps))


@dataclass(frozen=True)
class BlochVector:
    u: float
    v: float
    w: float

    @classmethod
    def from_array(cls, a) -> "BlochVector":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])

    @property
    def norm_sq(self) -> float:
        return self.u * self.u + self.v * self.v + self.w * self.w

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return self.norm_sq <= 1.0 + tol

    def distance(self, other: "BlochVector") -> float:
        return math.sqrt(
            (self.u - other.u) ** 2 + (self.v - other.v) ** 2 + (self.w - other.w) ** 2
        )

    def __iter__(self):
        yield self.u
        yield self.v
        yield self.w


def purity(s: BlochVector) -> float:
    """Tr(rho^2) = (1 + |r|^2) / 2."""
    return 0.5 * (1.0 + s.norm_sq)


def _sin_cos(eps: ErrorAngle | float) -> tuple[float, float]:
    th = as_angle(eps).theta
    return math.sin(th), math.cos(th)


def f_eps(z: ExtendedComplex, eps: ErrorAngle | float) -> ExtendedComplex:
    """Pure-state map (sin - z^2 cos) / (cos + z^2 sin), total on the Riemann sphere."""
    s, c = _sin_cos(eps)
    if z is INFINITY:
        return INFINITY if s == 0 else complex(-c / s)
    z = complex(z)
    if abs(z) > _LARGE:
        t = 1.0 / z
        t2 = t * t
        num, den = s * t2 - c, c * t2 + s
        scale = abs(c * t2) + abs(s)
    else:
        z2 = z * z
        num, den = s - c * z2, c + s * z2
        scale = abs(c) + abs(s * z2)
    # denominator indistinguishable from zero at its own rounding level
    if abs(den) <= _ROUNDING * scale:
        return INFINITY
    out = num / den
    if not (math.isfinite(out.real) and math.isfinite(out.imag)):
        return INFINITY
    return out


def f_eps_derivative(z: complex, eps: ErrorAngle | float) -> complex:
    """d f_eps / dz = -2 z / (cos + z^2 sin)^2 (uses sin^2 + cos^2 = 1)."""
    s, c = _sin_cos(eps)
    z = complex(z)
    return -2.0 * z / (c + s * z * z) ** 2


def bloch_step(s: BlochVector, eps: ErrorAngle | float) -> BlochVector:
    """One protocol step on a (possibly mixed) Bloch vector."""
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    den = 1.0 + s.w * s.w
    a = s.u * s.u - s.v * s.v
    return BlochVector(
        (2.0 * s.w * ce + a * se) / den,
        -2.0 * s.u * s.v / den,
        (a * ce - 2.0 * s.w * se) / den,
    )


def bloch_step_arrays(u, v, w, eps: ErrorAngle | float):
    """Vectorised :func:`bloch_step` on coordinate arrays; returns new arrays."""
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    den = 1.0 + w * w
    a = u * u - v * v
    return (2.0 * w * ce + a * se) / den, -2.0 * u * v / den, (a * ce - 2.0 * w * se) / den


def iterate(s: BlochVector, eps: ErrorAngle | float, n: int) -> BlochVector:
    for _ in range(n):
        s = bloch_step(s, eps)
    return s


def z_to_bloch(z: ExtendedComplex) -> BlochVector:
    """Bloch vector of the state proportional to |0> + z|1>."""
    if z is INFINITY:
        return BlochVector(0.0, 0.0, -1.0)
    z = complex(z)
    r = abs(z)
    if r > _LARGE:
        t = 1.0 / z
        # same formulas in the chart t = 1/z, conj taken for the phase
        n = 1.0 + abs(t) ** 2
        tc = t.conjugate()
        return BlochVector(2.0 * tc.real / n, 2.0 * tc.imag / n, (abs(t) ** 2 - 1.0) / n)
    n = 1.0 + r * r
    return BlochVector(2.0 * z.real / n, 2.0 * z.imag / n, (1.0 - r * r) / n)


def bloch_to_z(s: BlochVector, tol: float = PHYSICAL_TOL) -> ExtendedComplex:
    """Riemann parameter (u + iv) / (1 + w) of a pure state."""
    if abs(purity(s) - 1.0) > tol:
        raise NonPureInput(f"purity {purity(s):.12g} differs from 1 by more than {tol:g}")
    if 1.0 + s.w <= 0.0:
        return INFINITY
    if 1.0 + s.w < 1e-8:
        # (u+iv)/(1+w) loses precision near the south pole; use (1-w)/(u-iv)
        d = complex(s.u, -s.v)
        if d == 0:
            return INFINITY
        return (1.0 - s.w) / d
    return complex(s.u, s.v) / (1.0 + s.w)


def stereographic_project(
    s: BlochVector, P: float, tol: float = PHYSICAL_TOL
) -> tuple[float, float]:
    """Project from the south pole of the purity-P sphere onto the w = 0 plane."""
    if P <= 0.5:
        raise OffSphere(f"purity sphere needs P > 1/2, got {P}")
    R = math.sqrt(2.0 * P - 1.0)
    if abs(s.norm_sq - R * R) > tol:
        raise OffSphere(f"|r|^2 = {s.norm_sq:.12g} but the P={P} sphere has {R * R:.12g}")
    den = R + s.w
    if abs(den) <= tol and s.u * s.u + s.v * s.v <= tol:
        raise ProjectionPole("south pole of the purity sphere has no finite projection")
    return s.u / den, s.v / den


def inverse_stereographic(x, y, P: float):
    """Point(s) on the purity-P sphere whose projection is (x, y). Accepts arrays."""
    R = math.sqrt(2.0 * P - 1.0)
    q = x * x + y * y
    return R * 2.0 * x / (1.0 + q), R * 2.0 * y / (1.0 + q), R * (1.0 - q) / (1.0 + q)
