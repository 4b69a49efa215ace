"""Basin-boundary extraction, box-counting dimension and the purity scan.

Two estimators of the critical purity are offered. ``"tau"`` applies the
threshold 1 + (d_plateau - 1)/2 to the dimension curve. ``"contact"`` asks
directly whether the two pure basins still touch anywhere on the purity
sphere: an EVEN/ODD pixel pair counts only if it survives re-rendering the
neighbourhood at finer resolution, so thin C0 slivers that merely fall
below one pixel are not mistaken for a boundary.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basins import (
    DEFAULT_MAX_ITER,
    DEFAULT_R,
    ClassificationGrid,
    Kind,
    Surface,
    default_threads,
    render,
)
from .core import ErrorAngle, as_angle
from .stability import attractor_inventory

DEFAULT_SIZES = (2, 4, 8, 16, 32, 64)
SPHERE_VIEWPORT = (-2.4, 2.4, -2.4, 2.4)

_PURE = (Kind.TO_C1_EVEN, Kind.TO_C1_ODD, Kind.TO_SINGLE_PURE)


class EmptyMask(ValueError):
    pass


class NoTransition(LookupError):
    pass


class BoundaryPolicy(str, enum.Enum):
    PURE_ONLY = "pure"
    WITH_C0 = "with-c0"


@dataclass
class BoundaryMask:
    width: int
    height: int
    bits: np.ndarray  # (height, width) bool

    @classmethod
    def from_array(cls, bits) -> "BoundaryMask":
        b = np.asarray(bits, dtype=bool)
        return cls(b.shape[1], b.shape[0], b)

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class DimensionEstimate:
    d: float
    stderr: float
    box_sizes: tuple[int, ...]
    counts: tuple[float, ...]
    fit_r2: float

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "stderr": self.stderr,
            "box_sizes": list(self.box_sizes),
            "counts": list(self.counts),
            "fit_r2": self.fit_r2,
        }


def _labels(grid_or_kinds) -> np.ndarray:
    return grid_or_kinds.kinds if isinstance(grid_or_kinds, ClassificationGrid) else np.asarray(grid_or_kinds)


def _relevant(kinds: np.ndarray, policy: BoundaryPolicy) -> np.ndarray:
    allowed = list(_PURE)
    if policy is BoundaryPolicy.WITH_C0:
        allowed += [Kind.TO_C0, Kind.TO_MIXED_CYCLE]
    return np.isin(kinds, [int(k) for k in allowed])


def extract_boundary(grid, policy: BoundaryPolicy | str = BoundaryPolicy.PURE_ONLY) -> BoundaryMask:
    """Pixels with a 4-neighbour carrying a different relevant label.

    With the default policy only the pure basins count, so pixels on the
    interface with C0 or with non-converged pixels are not boundary.
    """
    policy = BoundaryPolicy(policy)
    k = _labels(grid)
    ok = _relevant(k, policy)
    bits = np.zeros(k.shape, dtype=bool)
    # horizontal and vertical neighbour pairs
    for a, b in (
        ((slice(None), slice(1, None)), (slice(None), slice(None, -1))),
        ((slice(1, None), slice(None)), (slice(None, -1), slice(None))),
    ):
        diff = ok[a] & ok[b] & (k[a] != k[b])
        bits[a] |= diff
        bits[b] |= diff
    return BoundaryMask.from_array(bits)


def _box_count(bits: np.ndarray, size: int, oy: int = 0, ox: int = 0) -> int:
    h, w = bits.shape
    b = bits
    if oy or ox:
        b = np.pad(bits, ((oy, 0), (ox, 0)))
        h, w = b.shape
    H, W = -(-h // size) * size, -(-w // size) * size
    padded = np.zeros((H, W), dtype=bool)
    padded[:h, :w] = b
    return int(padded.reshape(H // size, size, W // size, size).any(axis=(1, 3)).sum())


def box_count_dimension(
    mask: BoundaryMask, sizes: Sequence[int] = DEFAULT_SIZES, offsets: bool = False
) -> DimensionEstimate:
    """Least-squares slope of log N(s) against log(1/s).

    Boxes are anchored at the raster origin; ``offsets`` averages the counts
    over the four half-box shifts of the grid.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 4:
        raise ValueError("need at least four box sizes")
    if mask.count == 0:
        raise EmptyMask("boundary mask has no pixels")
    counts = []
    for s in sizes:
        if offsets and s > 1:
            h = s // 2
            counts.append(float(np.mean([_box_count(mask.bits, s, oy, ox) for oy in (0, h) for ox in (0, h)])))
        else:
            counts.append(float(_box_count(mask.bits, s)))
    x = np.log(1.0 / np.array(sizes, dtype=float))
    y = np.log(np.array(counts))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    resid = y - A @ coef
    n = len(x)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 and sxx > 0 else 0.0
    return DimensionEstimate(slope, stderr, sizes, tuple(counts), r2)


# --------------------------------------------------------------------------
# synthetic calibration masks


def line_mask(n: int = 1024) -> BoundaryMask:
    return BoundaryMask.from_array(np.eye(n, dtype=bool))


def disk_mask(n: int = 1024) -> BoundaryMask:
    y, x = np.indices((n, n)) + 0.5
    c = n / 2.0
    return BoundaryMask.from_array((x - c) ** 2 + (y - c) ** 2 <= (0.45 * n) ** 2)


def sierpinski_carpet(depth: int = 5, cell: int = 1) -> BoundaryMask:
    """Carpet of side 3^depth cells, each ``cell`` pixels wide."""
    a = np.ones((1, 1), dtype=bool)
    for _ in range(depth):
        z = np.zeros_like(a)
        a = np.block([[a, a, a], [a, z, a], [a, a, a]])
    return BoundaryMask.from_array(np.kron(a, np.ones((cell, cell), dtype=bool)))


# --------------------------------------------------------------------------
# contact between the pure basins


def _contact_pairs(kinds: np.ndarray) -> list[tuple[int, int, int, int]]:
    """(row, col, row2, col2) of 4-adjacent EVEN/ODD pixel pairs."""
    even, odd = int(Kind.TO_C1_EVEN), int(Kind.TO_C1_ODD)
    out = []
    h = (kinds[:, 1:] != kinds[:, :-1]) & np.isin(kinds[:, 1:], [even, odd]) & np.isin(kinds[:, :-1], [even, odd])
    for r, c in zip(*np.nonzero(h)):
        out.append((int(r), int(c), int(r), int(c) + 1))
    v = (kinds[1:, :] != kinds[:-1, :]) & np.isin(kinds[1:, :], [even, odd]) & np.isin(kinds[:-1, :], [even, odd])
    for r, c in zip(*np.nonzero(v)):
        out.append((int(r), int(c), int(r) + 1, int(c)))
    return out


def verify_contact(
    grid: ClassificationGrid,
    levels: int = 5,
    zoom: int = 8,
    window: int = 4,
    max_pairs: int = 64,
    fanout: int = 8,
    threads: int | None = None,
) -> bool:
    """True when some EVEN/ODD adjacency persists under repeated zoom-in.

    Each candidate pair is re-rendered on a ``window``-pixel neighbourhood at
    ``zoom`` times the resolution, ``levels`` times over; it is accepted
    once an adjacent EVEN/ODD pair is still present at the finest level.
    At most ``max_pairs`` candidates are tried at the top level and
    ``fanout`` below it, which bounds the work when there is no contact.
    Stops at the first verified contact.
    """
    pairs = _contact_pairs(grid.kinds)
    if not pairs:
        return False
    step = max(1, len(pairs) // max_pairs)
    dx, dy = grid.pixel_size()
    X, Y = grid.coords()

    def persists(cx, cy, pdx, pdy, level) -> bool:
        half_x, half_y = window * pdx / 2, window * pdy / 2
        vp = (cx - half_x, cx + half_x, cy - half_y, cy + half_y)
        n = window * zoom
        g = render(grid.surface, vp, n, n, grid.epsilon, grid.r, grid.max_iter, threads=1, inventory=grid.attractors)
        sub = _contact_pairs(g.kinds)
        if not sub:
            return False
        if level + 1 >= levels:
            return True
        fx, fy = g.pixel_size()
        gx, gy = g.coords()
        for r1, c1, r2, c2 in sub[:: max(1, len(sub) // fanout)][:fanout]:
            mx = 0.5 * (gx[r1, c1] + gx[r2, c2])
            my = 0.5 * (gy[r1, c1] + gy[r2, c2])
            if persists(mx, my, fx, fy, level + 1):
                return True
        return False

    for r1, c1, r2, c2 in pairs[::step][:max_pairs]:
        cx = 0.5 * (X[r1, c1] + X[r2, c2])
        cy = 0.5 * (Y[r1, c1] + Y[r2, c2])
        if persists(cx, cy, dx, dy, 0):
            return True
    return False


# --------------------------------------------------------------------------
# purity scan


@dataclass
class ScanPoint:
    purity: float
    estimate: DimensionEstimate | None
    boundary_pixels: int
    contact: bool | None = None
    counts: dict = field(default_factory=dict)

    @property
    def d(self) -> float:
        return self.estimate.d if self.estimate is not None else float("nan")

    def row(self) -> dict:
        e = self.estimate
        return {
            "P": self.purity,
            "d": e.d if e else float("nan"),
            "stderr": e.stderr if e else float("nan"),
            "fit_r2": e.fit_r2 if e else float("nan"),
            "boundary_pixels": self.boundary_pixels,
            "contact": "" if self.contact is None else int(self.contact),
        }


def scan_point(
    eps: ErrorAngle | float,
    P: float,
    res: int = 512,
    viewport=SPHERE_VIEWPORT,
    r: float = DEFAULT_R,
    max_iter: int = DEFAULT_MAX_ITER,
    sizes: Sequence[int] = DEFAULT_SIZES,
    contact: bool = True,
    threads: int | None = None,
    offsets: bool = False,
) -> ScanPoint:
    eps = as_angle(eps)
    g = render(Surface.sphere(P), viewport, res, res, eps, r, max_iter, threads=threads)
    mask = extract_boundary(g)
    try:
        est = box_count_dimension(mask, sizes, offsets)
    except EmptyMask:
        est = None
    touch = verify_contact(g, threads=threads) if contact else None
    return ScanPoint(P, est, mask.count, touch, g.counts())


def dimension_vs_purity(
    eps: ErrorAngle | float,
    purities: Sequence[float],
    res: int = 512,
    viewport=SPHERE_VIEWPORT,
    r: float = DEFAULT_R,
    max_iter: int = DEFAULT_MAX_ITER,
    sizes: Sequence[int] = DEFAULT_SIZES,
    contact: bool = True,
    threads: int | None = None,
) -> list[ScanPoint]:
    """Boundary dimension on each purity sphere. Purities run in parallel, one render each."""
    eps = as_angle(eps)
    attractor_inventory(eps)  # build the cached inventory before fanning out
    threads = threads or default_threads()
    for P in purities:
        if not (0.5 < P <= 1.0):
            raise ValueError(f"purity {P} outside (1/2, 1]")

    def one(P):
        return scan_point(eps, P, res, viewport, r, max_iter, sizes, contact, threads=1)

    if threads <= 1:
        return [one(P) for P in purities]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(one, purities))


@dataclass(frozen=True)
class CriticalEstimate:
    p_c_est: float
    uncertainty: float
    method: str
    bracket: tuple[float, float]
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {
            "p_c_est": self.p_c_est,
            "uncertainty": self.uncertainty,
            "method": self.method,
            "bracket": list(self.bracket),
            "threshold": self.threshold,
        }


def _grid_step(ps: Sequence[float]) -> float:
    d = np.diff(sorted(ps))
    return float(d.min()) if len(d) else 0.0


def _bisect(lo: float, hi: float, above: Callable[[float], bool], resolution: float) -> tuple[float, float]:
    """Shrink [lo, hi] (lo below, hi above the transition) to ``resolution``."""
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if above(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def estimate_critical_purity_from_scan(
    curve: Sequence[ScanPoint],
    method: str = "contact",
    probe: Callable[[float], ScanPoint] | None = None,
    resolution: float | None = None,
) -> CriticalEstimate:
    """Locate the purity where the fractal pure-basin boundary disappears.

    ``method="contact"``: the transition lies between the lowest purity of
    the top run of samples whose pure basins still touch and the sample just
    below it. ``method="tau"``: scanning down from P = 1, the first sample
    whose d falls below 1 + (d_plateau - 1)/2 (an empty boundary counts as
    below), with d_plateau the median of the samples above it.

    ``probe(P)`` evaluates an extra purity; when given, the bracket is
    bisected down to ``resolution`` (default: half the grid step). The
    estimate is the bracket midpoint and the uncertainty the grid step.
    """
    pts = sorted(curve, key=lambda p: p.purity, reverse=True)
    if len(pts) < 2:
        raise NoTransition("need at least two purity samples")
    step = _grid_step([p.purity for p in pts])
    resolution = resolution if resolution is not None else step / 2
    threshold = None
    if method == "contact":
        if any(p.contact is None for p in pts):
            raise ValueError("contact method needs a scan run with contact verification")

        def above(p: ScanPoint) -> bool:
            return bool(p.contact)

    elif method == "tau":
        top = [p.d for p in pts[: max(2, len(pts) // 4)] if p.estimate is not None]
        if not top:
            raise NoTransition("no boundary at the highest purities")
        plateau = float(np.median(top))
        threshold = 1.0 + (plateau - 1.0) / 2.0

        def above(p: ScanPoint) -> bool:
            return p.estimate is not None and p.d >= threshold

    else:
        raise ValueError(f"unknown method {method!r}")

    if not above(pts[0]):
        raise NoTransition("highest purity sample is already below the transition")
    k = 0
    while k + 1 < len(pts) and above(pts[k + 1]):
        k += 1
    if k + 1 == len(pts):
        raise NoTransition("curve never crosses the transition")
    hi, lo = pts[k].purity, pts[k + 1].purity
    if probe is not None:
        lo, hi = _bisect(lo, hi, lambda P: above(probe(P)), resolution)
    return CriticalEstimate(0.5 * (lo + hi), step, method, (lo, hi), threshold)
