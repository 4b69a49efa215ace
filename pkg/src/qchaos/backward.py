"""Backward iteration: inverse maps, Julia and quasi-Julia clouds, critical purity."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    INFINITY,
    PHYSICAL_TOL,
    BlochVector,
    ErrorAngle,
    ExtendedComplex,
    as_angle,
    bloch_step,
    bloch_step_arrays,
    purity,
)
from .stability import NoC3, find_c3, real_pure_fixed_point

MAX_FULL_TREE_DEPTH = 24
ROUND_TRIP_TOL = 1e-9


class DepthTooLarge(ValueError):
    pass


class DeadEnd(RuntimeError):
    """Every backward branch left the Bloch ball before the requested depth."""


class Mode(str, enum.Enum):
    FULL_TREE = "full"
    RANDOM_BRANCH = "random"


def _sc(eps):
    th = as_angle(eps).theta
    return math.sin(th), math.cos(th)


def inverse_f(z: ExtendedComplex, eps: ErrorAngle | float) -> tuple[ExtendedComplex, ExtendedComplex]:
    """Both preimages under f_eps; at a branch point the single preimage is doubled."""
    s, c = _sc(eps)
    if z is INFINITY:
        r = complex(-c / s) if s != 0 else INFINITY
    else:
        z = complex(z)
        num, den = s - z * c, c + z * s
        if abs(den) <= 4 * np.finfo(float).eps * (abs(c) + abs(z * s)):
            r = INFINITY
        else:
            r = num / den
    if r is INFINITY:
        return INFINITY, INFINITY
    y = complex(np.sqrt(complex(r)))
    return y, -y


def inverse_f_array(z: np.ndarray, eps: ErrorAngle | float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`inverse_f`; infinity is carried as complex(inf, 0)."""
    s, c = _sc(eps)
    z = np.asarray(z, dtype=complex)
    is_inf = ~np.isfinite(z)
    zz = np.where(is_inf, 0.0, z)
    num, den = s - zz * c, c + zz * s
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    pole = np.abs(den) <= 4 * np.finfo(float).eps * (abs(c) + np.abs(zz * s))
    r = np.where(is_inf, -c / s if s != 0 else np.inf, r)
    r = np.where(pole & ~is_inf, np.inf, r)
    y = np.sqrt(r)
    y = np.where(np.isfinite(r), y, complex(np.inf, 0.0))
    return y, np.where(np.isfinite(y), -y, y)


def inverse_bloch_arrays(U, V, W, eps: ErrorAngle | float, tol: float = PHYSICAL_TOL):
    """Candidate preimages of many targets at once.

    Returns ``(u, v, w, ok_plus, ok_minus)``: the ``+`` candidate is
    ``(u, v, w)``, the ``-`` candidate ``(-u, -v, w)``; masks flag those that
    are physical and map forward onto the target to ROUND_TRIP_TOL.
    """
    e = as_angle(eps).epsilon
    ce, se = math.cos(e), math.sin(e)
    U, V, W = (np.asarray(a, dtype=float) for a in (U, V, W))
    # rotate the target so that 2w/(1+w^2) = X and (u^2 - v^2)/(1+w^2) = Y
    X = np.clip(U * ce - W * se, -1.0, 1.0)
    Y = U * se + W * ce
    rA, rB = np.sqrt(1.0 - X), np.sqrt(1.0 + X)
    # (1 - sqrt(A/B)) / (1 + sqrt(A/B)) written to stay finite at B = 0
    w = (rB - rA) / (rB + rA)
    root = np.sqrt((1.0 + w * w) * (Y + 1j * V))
    u, v = root.real, -root.imag

    def _ok(uu, vv):
        phys = uu * uu + vv * vv + w * w <= 1.0 + tol
        fu, fv, fw = bloch_step_arrays(uu, vv, w, e)
        back = np.maximum(np.maximum(np.abs(fu - U), np.abs(fv - V)), np.abs(fw - W))
        return phys & (back <= ROUND_TRIP_TOL)

    return u, v, w, _ok(u, v), _ok(-u, -v)


def inverse_bloch(
    t: BlochVector, eps: ErrorAngle | float, tol: float = PHYSICAL_TOL
) -> list[BlochVector]:
    """Physical preimages of ``t`` (0, 1 or 2 of them, duplicates merged)."""
    u, v, w, okp, okm = inverse_bloch_arrays([t.u], [t.v], [t.w], eps, tol)
    out = []
    if okp[0]:
        out.append(BlochVector(float(u[0]), float(v[0]), float(w[0])))
    if okm[0]:
        cand = BlochVector(float(-u[0]) + 0.0, float(-v[0]) + 0.0, float(w[0]))
        if not out or out[0].distance(cand) > 1e-12:
            out.append(cand)
    return out


# --------------------------------------------------------------------------
# clouds


@dataclass
class PointCloud:
    """Backward-iteration samples.

    ``points`` is a complex array (pure clouds, ``inf`` for the point at
    infinity) or an (N, 3) array of Bloch vectors (mixed clouds).
    """

    points: np.ndarray
    pure: bool
    eps: ErrorAngle
    depth: int
    mode: Mode
    seed: int | None
    start: object
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def bloch(self) -> np.ndarray:
        if not self.pure:
            return self.points
        z = self.points
        fin = np.isfinite(z)
        zz = np.where(fin, z, 0.0)
        n = 1.0 + np.abs(zz) ** 2
        out = np.stack([2 * zz.real / n, 2 * zz.imag / n, (2.0 - n) / n], axis=1)
        out[~fin] = (0.0, 0.0, -1.0)
        return out

    def purities(self) -> np.ndarray:
        b = self.bloch()
        return 0.5 * (1.0 + (b * b).sum(axis=1))


def _branch_bits(seed: int, stream: int, n: int) -> np.ndarray:
    """n branch choices from a Philox stream keyed by (seed, stream); bit i is step i."""
    bg = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    return np.random.Generator(bg).integers(0, 2, size=n, dtype=np.uint8)


def _check_depth(depth: int, mode: Mode) -> None:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if mode is Mode.FULL_TREE and depth > MAX_FULL_TREE_DEPTH:
        raise DepthTooLarge(f"FULL_TREE needs 2^depth points; depth {depth} > {MAX_FULL_TREE_DEPTH}")


def julia_cloud(
    eps: ErrorAngle | float,
    depth: int = 50_000,
    mode: Mode | str = Mode.RANDOM_BRANCH,
    seed: int = 0,
    transient: int = 20,
    orbits: int = 1,
    threads: int | None = None,
) -> PointCloud:
    """Julia set of f_eps by backward iteration from the real repelling fixed point.

    FULL_TREE returns the 2^depth preimages at level ``depth``. RANDOM_BRANCH
    walks ``orbits`` independent backward orbits of ``depth`` points each,
    after discarding ``transient`` steps.
    """
    eps = as_angle(eps)
    mode = Mode(mode)
    _check_depth(depth, mode)
    start = real_pure_fixed_point(eps).z
    if mode is Mode.FULL_TREE:
        level = np.array([start], dtype=complex)
        for _ in range(depth):
            a, b = inverse_f_array(level, eps)
            level = np.concatenate([a, b])
        return PointCloud(level, True, eps, depth, mode, None, start)

    def walk(k: int) -> np.ndarray:
        bits = _branch_bits(seed, k, transient + depth)
        z = complex(start)
        out = np.empty(depth, dtype=complex)
        s, c = _sc(eps)
        for i, bit in enumerate(bits):
            a, b = inverse_f(z, eps)
            z = b if bit else a
            if i >= transient:
                out[i - transient] = complex(np.inf, 0.0) if z is INFINITY else z
        return out

    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(walk, range(orbits)))
    return PointCloud(
        np.concatenate(parts), True, eps, depth, mode, seed, start, {"transient": transient, "orbits": orbits}
    )


def quasi_julia_cloud(
    start: BlochVector,
    eps: ErrorAngle | float,
    depth: int = 50_000,
    mode: Mode | str = Mode.RANDOM_BRANCH,
    seed: int = 0,
    transient: int = 0,
    orbits: int = 1,
    threads: int | None = None,
) -> PointCloud:
    """Backward orbits of a mixed start point, pruning non-physical branches.

    In RANDOM_BRANCH mode the random sign is used when both branches are
    valid and the surviving one otherwise; an orbit with no valid branch
    ends there. DeadEnd is raised only when nothing survives at all. No
    transient is dropped by default: the start point (C3) already belongs
    to the set, and the least pure points sit within a few steps of it.
    """
    eps = as_angle(eps)
    mode = Mode(mode)
    _check_depth(depth, mode)
    if mode is Mode.FULL_TREE:
        U = np.array([start.u])
        V = np.array([start.v])
        W = np.array([start.w])
        for level in range(depth):
            u, v, w, okp, okm = inverse_bloch_arrays(U, V, W, eps)
            U = np.concatenate([u[okp], -u[okm]])
            V = np.concatenate([v[okp], -v[okm]])
            W = np.concatenate([w[okp], w[okm]])
            if U.size == 0:
                raise DeadEnd(f"all branches pruned at depth {level + 1}")
        return PointCloud(np.stack([U, V, W], axis=1), False, eps, depth, mode, None, start)

    def walk(k: int) -> np.ndarray:
        bits = _branch_bits(seed, k, transient + depth)
        x = start
        out = np.empty((depth, 3))
        n = 0
        for i, bit in enumerate(bits):
            pre = inverse_bloch(x, eps)
            if not pre:
                break
            x = pre[int(bit) % len(pre)]
            if i >= transient:
                out[n] = (x.u, x.v, x.w)
                n += 1
        return out[:n]

    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(walk, range(orbits)))
    pts = np.concatenate(parts) if parts else np.empty((0, 3))
    if len(pts) == 0:
        raise DeadEnd("every backward orbit died before leaving the transient")
    return PointCloud(
        pts, False, eps, depth, mode, seed, start, {"transient": transient, "orbits": orbits}
    )


def constant_branch_orbit(
    start: BlochVector, eps: ErrorAngle | float, sign: int, steps: int = 400
) -> list[BlochVector]:
    """Backward orbit that always takes the same square-root branch (+1 or -1)."""
    x = start
    out = [x]
    for _ in range(steps):
        u, v, w, okp, okm = inverse_bloch_arrays([x.u], [x.v], [x.w], eps)
        if sign > 0 and okp[0]:
            x = BlochVector(float(u[0]), float(v[0]), float(w[0]))
        elif sign < 0 and okm[0]:
            x = BlochVector(float(-u[0]), float(-v[0]), float(w[0]))
        else:
            break
        out.append(x)
    return out


# --------------------------------------------------------------------------
# critical purity


@dataclass(frozen=True)
class CriticalPurityReport:
    eps: ErrorAngle
    p3: float
    p_c: float
    argmin: BlochVector
    depth: int
    # valid preimages off the invariant plane whose purity undercuts p_c
    violations: tuple[tuple[BlochVector, float, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            "eps": self.eps.epsilon,
            "eps_deg": self.eps.degrees,
            "p3": self.p3,
            "p_c": self.p_c,
            "argmin_point": [self.argmin.u, self.argmin.v, self.argmin.w],
            "depth": self.depth,
            "off_plane_violations": [
                {"point": [p.u, p.v, p.w], "purity": q, "depth": d} for p, q, d in self.violations
            ],
        }


def critical_purity_report(eps: ErrorAngle | float, depth: int = 4) -> CriticalPurityReport:
    """Lowest purity among C3 and its valid preimages on the invariant plane.

    The whole preimage tree is enumerated to ``depth``; preimages that leave
    the v = 0 plane are kept for the record. They do occur (they have u = 0),
    and when one of them is less pure than the in-plane minimum it is listed
    under ``violations`` rather than being allowed to set p_c.
    """
    eps = as_angle(eps)
    c3 = find_c3(eps).location
    best_p, best_x = purity(c3), c3
    viol: list[tuple[BlochVector, float, int]] = []
    frontier = [c3]
    for d in range(1, depth + 1):
        nxt = []
        for t in frontier:
            for p in inverse_bloch(t, eps):
                nxt.append(p)
                q = purity(p)
                if abs(p.v) <= 1e-12:
                    if q < best_p:
                        best_p, best_x = q, p
                else:
                    viol.append((p, q, d))
        frontier = nxt
    viol = [(p, q, d) for p, q, d in viol if q < best_p]
    return CriticalPurityReport(eps, purity(c3), best_p, best_x, depth, tuple(viol))


def critical_purity(eps: ErrorAngle | float, depth: int = 4) -> float:
    return critical_purity_report(eps, depth).p_c


__all__ = [
    "DeadEnd",
    "DepthTooLarge",
    "Mode",
    "NoC3",
    "PointCloud",
    "CriticalPurityReport",
    "inverse_f",
    "inverse_f_array",
    "inverse_bloch",
    "inverse_bloch_arrays",
    "julia_cloud",
    "quasi_julia_cloud",
    "constant_branch_orbit",
    "critical_purity",
    "critical_purity_report",
]
