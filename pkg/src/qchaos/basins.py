"""Basin classification by forward iteration, raster renders and Monte Carlo sampling."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import BlochVector, ErrorAngle, as_angle, bloch_step_arrays, inverse_stereographic
from .stability import AttractorInventory, PeriodicPoint, attractor_inventory

DEFAULT_R = 1e-3
DEFAULT_MAX_ITER = 200
MC_MAX_ITER = 1000
CHUNK = 1 << 16


class Kind(enum.IntEnum):
    TO_C1_EVEN = 0
    TO_C1_ODD = 1
    TO_C0 = 2
    TO_SINGLE_PURE = 3
    TO_MIXED_CYCLE = 4
    NON_CONVERGED = 5


# light/dark blue for the two parities of the C1 pair, red for C0
PALETTE = {
    Kind.TO_C1_EVEN: (135, 206, 250),
    Kind.TO_C1_ODD: (0, 0, 139),
    Kind.TO_C0: (220, 20, 60),
    Kind.TO_SINGLE_PURE: (65, 105, 225),
    Kind.TO_MIXED_CYCLE: (139, 0, 0),
    Kind.NON_CONVERGED: (0, 0, 0),
}


class InvalidViewport(ValueError):
    pass


def default_threads() -> int:
    env = os.environ.get("QCHAOS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ClassificationLabel:
    kind: Kind
    iterations: int


@dataclass(frozen=True)
class Surface:
    """The invariant plane (x = u, y = w) or the purity-P sphere seen stereographically."""

    kind: str  # "plane" or "sphere"
    purity: float = 1.0

    @classmethod
    def plane(cls) -> "Surface":
        return cls("plane")

    @classmethod
    def sphere(cls, P: float) -> "Surface":
        if not (0.5 < P <= 1.0):
            raise InvalidViewport(f"sphere purity must lie in (1/2, 1], got {P}")
        return cls("sphere", float(P))


class _Targets:
    """Attractor balls in the form the vectorised classifier wants."""

    def __init__(self, inv: AttractorInventory, r: float):
        self.r2 = r * r
        self.c1 = None
        pair = inv.c1
        if pair is not None:
            self.c1 = (pair[0].location.as_array(), pair[1].location.as_array())
        sp = inv.single_pure
        self.single = sp.location.as_array() if sp is not None else None
        self.c0 = inv.c0_attracting
        self.tree = None
        self.cycle_pts = None
        pts = [p.as_array() for c in inv.detected_long_cycles for p in (c.orbit or (c.location,))]
        if pts:
            arr = np.array(pts)
            if len(arr) > 64:
                from scipy.spatial import cKDTree

                self.tree = cKDTree(arr)
            else:
                self.cycle_pts = arr
        self.r = r

    @staticmethod
    def _in_ball(u, v, w, p, r2):
        return (u - p[0]) ** 2 + (v - p[1]) ** 2 + (w - p[2]) ** 2 <= r2

    def hit(self, u, v, w, it: int, kinds: np.ndarray) -> np.ndarray:
        """Fill ``kinds`` for the points that reach an attractor now; return the hit mask."""
        hit = np.zeros(u.shape, dtype=bool)
        if self.c1 is not None:
            m = self._in_ball(u, v, w, self.c1[0], self.r2)
            kinds[m] = Kind.TO_C1_EVEN if it % 2 == 0 else Kind.TO_C1_ODD
            hit |= m
        if self.single is not None:
            m = self._in_ball(u, v, w, self.single, self.r2) & ~hit
            kinds[m] = Kind.TO_SINGLE_PURE
            hit |= m
        if self.c0:
            m = (u * u + v * v + w * w <= self.r2) & ~hit
            kinds[m] = Kind.TO_C0
            hit |= m
        if self.tree is not None or self.cycle_pts is not None:
            rest = ~hit
            if rest.any():
                pts = np.stack([u[rest], v[rest], w[rest]], axis=1)
                if self.tree is not None:
                    d, _ = self.tree.query(pts, k=1, distance_upper_bound=self.r * 1.0000001)
                    near = np.isfinite(d)
                else:
                    d2 = ((pts[:, None, :] - self.cycle_pts[None, :, :]) ** 2).sum(axis=2)
                    near = d2.min(axis=1) <= self.r2
                idx = np.flatnonzero(rest)[near]
                kinds[idx] = Kind.TO_MIXED_CYCLE
                hit[idx] = True
        return hit


def classify_arrays(u, v, w, eps, inv: AttractorInventory, r: float = DEFAULT_R, max_iter: int = DEFAULT_MAX_ITER):
    """Classify many starting states. Returns ``(kinds int8, iterations int32)``.

    The first entry into an attractor's r-ball decides. For the C1 pair only
    C1^1's ball is decisive, and the parity of the step count at entry gives
    EVEN/ODD; passing through C1^2 just continues the orbit (it reaches C1^1
    one step later anyway).
    """
    eps = as_angle(eps)
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    w = np.array(w, dtype=float)
    n = u.size
    kinds = np.full(n, Kind.NON_CONVERGED, dtype=np.int8)
    iters = np.full(n, max_iter, dtype=np.int32)
    targets = _Targets(inv, r)
    idx = np.arange(n)
    for it in range(max_iter + 1):
        sub = np.empty(idx.size, dtype=np.int8)
        hit = targets.hit(u, v, w, it, sub)
        if hit.any():
            kinds[idx[hit]] = sub[hit]
            iters[idx[hit]] = it
            keep = ~hit
            idx, u, v, w = idx[keep], u[keep], v[keep], w[keep]
        if idx.size == 0 or it == max_iter:
            break
        u, v, w = bloch_step_arrays(u, v, w, eps)
    return kinds, iters


def classify(
    s: BlochVector,
    eps: ErrorAngle | float,
    inv: AttractorInventory | None = None,
    r: float = DEFAULT_R,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ClassificationLabel:
    inv = inv if inv is not None else attractor_inventory(eps)
    k, i = classify_arrays([s.u], [s.v], [s.w], eps, inv, r, max_iter)
    return ClassificationLabel(Kind(int(k[0])), int(i[0]))


def _chunked_classify(u, v, w, eps, inv, r, max_iter, threads):
    """Fixed-size chunks so the result does not depend on the worker count."""
    n = u.size
    kinds = np.empty(n, dtype=np.int8)
    iters = np.empty(n, dtype=np.int32)
    bounds = [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]

    def job(b):
        a, e = b
        kinds[a:e], iters[a:e] = classify_arrays(u[a:e], v[a:e], w[a:e], eps, inv, r, max_iter)

    threads = threads or default_threads()
    if threads <= 1 or len(bounds) <= 1:
        for b in bounds:
            job(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(job, bounds))
    return kinds, iters


# --------------------------------------------------------------------------
# rasters


@dataclass
class ClassificationGrid:
    width: int
    height: int
    viewport: tuple[float, float, float, float]
    surface: Surface
    kinds: np.ndarray  # (height, width) int8, row 0 at the top
    iterations: np.ndarray  # (height, width) int32
    epsilon: ErrorAngle
    attractors: AttractorInventory
    r: float
    max_iter: int

    def label(self, row: int, col: int) -> ClassificationLabel:
        return ClassificationLabel(Kind(int(self.kinds[row, col])), int(self.iterations[row, col]))

    def counts(self) -> dict[str, int]:
        return {k.name: int((self.kinds == k).sum()) for k in Kind}

    def pixel_size(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.viewport
        return (x1 - x0) / self.width, (y1 - y0) / self.height

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return pixel_coords(self.viewport, self.width, self.height)

    def to_rgb(self) -> np.ndarray:
        lut = np.zeros((len(Kind), 3), dtype=np.uint8)
        for k, c in PALETTE.items():
            lut[int(k)] = c
        return lut[self.kinds]

    def write_ppm(self, path) -> None:
        rgb = self.to_rgb()
        with open(path, "wb") as fh:
            fh.write(f"P6\n{self.width} {self.height}\n255\n".encode("ascii"))
            fh.write(rgb.tobytes())

    def write_csv(self, path) -> None:
        rows, cols = np.indices((self.height, self.width))
        names = np.array([k.name for k in Kind])
        with open(path, "w", encoding="ascii") as fh:
            fh.write("x_index,y_index,kind,iterations\n")
            for x, y, k, it in zip(
                cols.ravel(), rows.ravel(), names[self.kinds.ravel()], self.iterations.ravel()
            ):
                fh.write(f"{x},{y},{k},{it}\n")


def pixel_coords(viewport, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates, (height, width) arrays; row 0 is the top (largest y).

    Coordinates are laid out symmetrically about the viewport centre so that
    a viewport centred on 0 is exactly antisymmetric under mirroring.
    """
    x0, x1, y0, y1 = viewport
    dx, dy = (x1 - x0) / width, (y1 - y0) / height
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    xs = cx + (np.arange(width) - (width - 1) / 2.0) * dx
    ys = cy - (np.arange(height) - (height - 1) / 2.0) * dy
    return np.meshgrid(xs, ys)


def _check_viewport(viewport, width, height):
    if len(viewport) != 4 or not all(math.isfinite(float(a)) for a in viewport):
        raise InvalidViewport(f"viewport must be four finite numbers, got {viewport!r}")
    x0, x1, y0, y1 = (float(a) for a in viewport)
    if not (x0 < x1 and y0 < y1):
        raise InvalidViewport(f"empty viewport {viewport!r}")
    if width < 1 or height < 1:
        raise InvalidViewport(f"resolution must be positive, got {width}x{height}")
    return x0, x1, y0, y1


def render(
    surface: Surface,
    viewport,
    width: int,
    height: int,
    eps: ErrorAngle | float,
    r: float = DEFAULT_R,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int | None = None,
    inventory: AttractorInventory | None = None,
) -> ClassificationGrid:
    """Classify every pixel of a viewport on the plane or a purity sphere."""
    eps = as_angle(eps)
    vp = _check_viewport(viewport, width, height)
    inv = inventory if inventory is not None else attractor_inventory(eps)
    X, Y = pixel_coords(vp, width, height)
    x, y = X.ravel(), Y.ravel()
    if surface.kind == "plane":
        inside = x * x + y * y <= 1.0
        u, v, w = x[inside], np.zeros(int(inside.sum())), y[inside]
    elif surface.kind == "sphere":
        if not (0.5 < surface.purity <= 1.0):
            raise InvalidViewport(f"sphere purity must lie in (1/2, 1], got {surface.purity}")
        inside = np.ones(x.size, dtype=bool)
        u, v, w = inverse_stereographic(x, y, surface.purity)
    else:
        raise InvalidViewport(f"unknown surface {surface.kind!r}")
    kinds = np.full(x.size, Kind.NON_CONVERGED, dtype=np.int8)
    iters = np.zeros(x.size, dtype=np.int32)
    k, i = _chunked_classify(u, v, w, eps, inv, r, max_iter, threads)
    kinds[inside], iters[inside] = k, i
    return ClassificationGrid(
        width,
        height,
        vp,
        surface,
        kinds.reshape(height, width),
        iters.reshape(height, width),
        eps,
        inv,
        r,
        max_iter,
    )


# --------------------------------------------------------------------------
# Monte Carlo


def sample_ball(seed: int, start: int, count: int, measure: str = "volume") -> np.ndarray:
    """Samples ``start .. start+count-1`` of a counter-based stream, as (count, 3).

    Each sample owns four Philox outputs addressed by its index, so any
    partition of the index range reproduces the same points.
    """
    bg = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64))
    # a Philox draw yields 4 uint64; one draw per sample
    bg.advance(start)
    raw = np.random.Generator(bg).random((count, 4))
    # direction: uniform on S^2
    cos_t = 2.0 * raw[:, 0] - 1.0
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * raw[:, 1]
    if measure == "volume":
        rad = np.cbrt(raw[:, 2])
    elif measure == "radial":
        rad = raw[:, 2]
    else:
        raise ValueError(f"unknown sampling measure {measure!r}")
    return np.stack([rad * sin_t * np.cos(phi), rad * sin_t * np.sin(phi), rad * cos_t], axis=1)


def ideal_displacement(eps: ErrorAngle | float) -> float:
    """How far the attractors at eps sit from their error-free positions."""
    inv0, inv = attractor_inventory(0.0), attractor_inventory(eps)
    c1_0 = inv0.c1
    disp = 0.0
    if inv.c1 is not None:
        for p, q in zip(inv.c1, c1_0):
            disp = max(disp, p.location.distance(q.location))
    elif inv.single_pure is not None:
        disp = min(inv.single_pure.location.distance(q.location) for q in c1_0)
    return disp


def auto_radius(eps: ErrorAngle | float) -> float:
    """Smallest sensible ball around the error-free attractors: 1.5x the displacement."""
    return max(DEFAULT_R, 1.5 * ideal_displacement(eps))


@dataclass(frozen=True)
class MonteCarloResult:
    eps: ErrorAngle
    n: int
    seed: int
    r: float
    max_iter: int
    measure: str
    delta: float
    purified_pct: float
    purified_pct_reference: float
    label_counts: dict
    reference_counts: dict

    def to_dict(self) -> dict:
        return {
            "eps": self.eps.epsilon,
            "eps_deg": self.eps.degrees,
            "delta": self.delta,
            "purified_pct": self.purified_pct,
            "purified_pct_reference": self.purified_pct_reference,
            "n": self.n,
            "seed": self.seed,
            "r": self.r,
            "max_iter": self.max_iter,
            "measure": self.measure,
            "label_counts": self.label_counts,
            "reference_counts": self.reference_counts,
        }


_PURIFIED = (Kind.TO_C1_EVEN, Kind.TO_C1_ODD, Kind.TO_SINGLE_PURE)


def monte_carlo_divergence(
    eps: ErrorAngle | float,
    n: int = 1_000_000,
    r: float | str = "auto",
    max_iter: int = MC_MAX_ITER,
    seed: int = 0,
    measure: str = "volume",
    threads: int | None = None,
) -> MonteCarloResult:
    """Fraction of random initial states whose attractor changes when eps is switched on.

    Both runs look for the error-free attractor positions (the displacement
    caused by eps is absorbed by the radius r, which must not be smaller
    than it; ``r="auto"`` picks 1.5x the displacement).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = as_angle(eps)
    if r == "auto":
        r = auto_radius(eps)
    r = float(r)
    inv0 = attractor_inventory(0.0)
    threads = threads or default_threads()
    bounds = [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]
    out_e = np.empty(n, dtype=np.int8)
    out_0 = np.empty(n, dtype=np.int8)

    def job(b):
        a, e = b
        s = sample_ball(seed, a, e - a, measure)
        out_e[a:e], _ = classify_arrays(s[:, 0], s[:, 1], s[:, 2], eps, inv0, r, max_iter)
        if eps.epsilon == 0.0:
            out_0[a:e] = out_e[a:e]
        else:
            out_0[a:e], _ = classify_arrays(s[:, 0], s[:, 1], s[:, 2], 0.0, inv0, r, max_iter)

    if threads <= 1 or len(bounds) <= 1:
        for b in bounds:
            job(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(job, bounds))
    delta = float((out_e != out_0).mean())

    def pct(a):
        return float(100.0 * np.isin(a, [int(k) for k in _PURIFIED]).mean())

    def counts(a):
        return {k.name: int((a == k).sum()) for k in Kind}

    return MonteCarloResult(
        eps, n, seed, r, max_iter, measure, delta, pct(out_e), pct(out_0), counts(out_e), counts(out_0)
    )
