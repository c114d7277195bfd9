"""
Refractive-index profiles.

Two kinds of profile are handled here:

* :class:`IndexProfile` -- a sampled 2D map n(x, y) on a regular grid, used for
  the waveguide under test (measured data or the synthetic graded-index stand-in).
* :class:`RadialFiberSpec` -- a circular power-law fiber, evaluated analytically
  by :func:`fiber_index`.

All lengths are in micrometres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "IndexProfile",
    "RadialFiberSpec",
    "ProfileError",
    "STEP_INDEX",
    "load_profile",
    "save_profile",
    "write_grid_csv",
    "synth_gi_profile",
    "fiber_index",
    "slab_profile",
    "parabolic_profile",
]

STEP_INDEX = math.inf
"""Grading exponent sentinel for a step-index fiber."""

INDEX_MIN, INDEX_MAX = 1.0, 3.0


class ProfileError(ValueError):
    """Raised for malformed or physically invalid index profiles."""


@dataclass(frozen=True, eq=False)
class IndexProfile:
    """Regularly sampled 2D refractive-index map.

    ``grid[i, j]`` is the index at ``x = x0 + j*dx``, ``y = y0 + i*dy``.
    A grid with a single column (or row) describes a structure that is
    invariant along x (or y); the mode solver treats that axis as extruded.
    """

    x0: float
    y0: float
    dx: float
    dy: float
    grid: np.ndarray
    wavelength_ref: float = 0.85

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        if grid.ndim != 2 or grid.size == 0:
            raise ProfileError("index grid must be a non-empty 2D array")
        if not (self.dx > 0 and self.dy > 0):
            raise ProfileError(f"grid steps must be positive, got dx={self.dx}, dy={self.dy}")
        if not np.all(np.isfinite(grid)):
            raise ProfileError("index grid contains non-finite values")
        lo, hi = grid.min(), grid.max()
        if lo < INDEX_MIN or hi > INDEX_MAX:
            raise ProfileError(f"index out of [{INDEX_MIN}, {INDEX_MAX}]: min={lo}, max={hi}")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.grid.shape[1])

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.grid.shape[0])

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` coordinate arrays shaped like :attr:`grid`."""
        return np.meshgrid(self.x, self.y)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def n_max(self) -> float:
        return float(self.grid.max())

    @property
    def n_clad(self) -> float:
        """Cladding index, taken as the median of the window-edge samples."""
        g = self.grid
        ny, nx = g.shape
        if ny == 1 or nx == 1:
            edge = np.array([g.flat[0], g.flat[-1]])
        else:
            edge = np.concatenate([g[0, :], g[-1, :], g[1:-1, 0], g[1:-1, -1]])
        return float(np.median(edge))

    @property
    def delta_n(self) -> float:
        return self.n_max - self.n_clad

    def value_at(self, x: float, y: float) -> float:
        """Index at the grid sample nearest to ``(x, y)``."""
        j = int(np.clip(round((x - self.x0) / self.dx), 0, self.grid.shape[1] - 1))
        i = int(np.clip(round((y - self.y0) / self.dy), 0, self.grid.shape[0] - 1))
        return float(self.grid[i, j])

    def peak_position(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.grid), self.grid.shape)
        return float(self.x[j]), float(self.y[i])


@dataclass(frozen=True)
class RadialFiberSpec:
    """Circular power-law fiber: core radius ``a`` (um), ``na``, ``n_clad``, exponent ``alpha``."""

    a: float = 25.0
    na: float = 0.2
    n_clad: float = 1.45
    alpha: float = 2.0

    def __post_init__(self):
        if not self.a > 0:
            raise ProfileError(f"core radius must be positive, got {self.a}")
        if not 0 < self.na < 1:
            raise ProfileError(f"numerical aperture must lie in (0, 1), got {self.na}")
        if not self.alpha > 0:
            raise ProfileError(f"grading exponent must be positive, got {self.alpha}")

    @property
    def n_core(self) -> float:
        return math.sqrt(self.n_clad**2 + self.na**2)

    @property
    def is_step(self) -> bool:
        return math.isinf(self.alpha)

    def v_number(self, wavelength: float) -> float:
        return 2 * math.pi * self.a * self.na / wavelength


def fiber_index(spec: RadialFiberSpec, r):
    """Index of a power-law fiber at radius ``r``.

    n(r)^2 = n1^2 - NA^2 (r/a)^alpha inside the core and n_clad outside, with
    n1^2 = n_clad^2 + NA^2. ``alpha = STEP_INDEX`` gives a step profile.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ProfileError("radius must be non-negative")
    n1sq = spec.n_clad**2 + spec.na**2
    if spec.is_step:
        nsq = np.where(r <= spec.a, n1sq, spec.n_clad**2)
    else:
        rho = np.minimum(r / spec.a, 1.0)
        nsq = n1sq - spec.na**2 * rho**spec.alpha
        nsq = np.where(r <= spec.a, nsq, spec.n_clad**2)
    n = np.sqrt(nsq)
    return float(n) if n.ndim == 0 else n


def synth_gi_profile(
    core_size=(35.0, 35.0),
    n_clad: float = 1.51,
    delta_n: float = 0.01,
    peak_offset=(0.0, 10.0),
    *,
    step: float = 0.25,
    margin: float = 15.0,
    width_top: float = 0.55,
    width_bottom: float = 0.95,
    sg_order: float = 2.0,
    smoothing: float = 1.0,
    wavelength_ref: float = 0.85,
) -> IndexProfile:
    """Synthetic graded-index waveguide with an off-centre index maximum.

    The normalised shape is the product of a horizontal super-Gaussian, whose
    width narrows toward the peak side of the core (giving a triangle-like
    outline), and a two-sided vertical bell that peaks at ``peak_offset[1]``
    and falls off faster on the short side. The shape is clipped to the
    rectangular core, smoothed with a Gaussian kernel of width ``smoothing``
    and rescaled so that max(n) = n_clad + delta_n.

    Parameters
    ----------
    core_size : (float, float)
        Core width and height in um, centred on the origin.
    peak_offset : (float, float)
        Position of the index maximum; must lie inside the core.
    step : float
        Grid step in both directions.
    margin : float
        Cladding padding on each side of the core (at least 10 um).
    width_top, width_bottom : float
        Horizontal 1/e half-width, as a fraction of the core half-width, at
        the peak-side and far-side core edges.
    """
    if delta_n < 0:
        raise ProfileError(f"delta_n must be non-negative, got {delta_n}")
    wx, wy = map(float, core_size)
    if wx <= 0 or wy <= 0:
        raise ProfileError("core size must be positive")
    if margin < 10.0:
        raise ProfileError(f"cladding margin must be at least 10 um, got {margin}")
    hx, hy = wx / 2, wy / 2
    px, py = map(float, peak_offset)
    if not (abs(px) < hx and abs(py) < hy):
        raise ProfileError(f"peak offset {peak_offset} lies outside the core")

    # odd sample counts keep the grid symmetric about the origin
    half_x = int(math.ceil((hx + margin) / step))
    half_y = int(math.ceil((hy + margin) / step))
    x = step * np.arange(-half_x, half_x + 1)
    y = step * np.arange(-half_y, half_y + 1)
    X, Y = np.meshgrid(x, y)

    if delta_n == 0:
        grid = np.full(X.shape, n_clad)
        return IndexProfile(float(x[0]), float(y[0]), step, step, grid, wavelength_ref)

    # work in a frame where the peak is on the +u side, so mirrored peaks give mirrored grids
    sgn = 1.0 if py >= 0 else -1.0
    U, pu = sgn * Y, sgn * py

    s_near = 0.8 * (hy - pu)
    s_far = 0.75 * (hy + pu)
    frac = np.clip((U + hy) / (2 * hy), 0.0, 1.0)
    sx = hx * (width_bottom + (width_top - width_bottom) * frac)
    horizontal = np.exp(-(np.abs(X - px) / sx) ** sg_order)
    outside = (np.abs(X) > hx) | (np.abs(Y) > hy)

    def build(centre):
        s = np.where(U >= centre, s_near, s_far)
        shape = horizontal * np.exp(-(((U - centre) / s) ** 2))
        shape[outside] = 0.0
        if smoothing > 0:
            shape = gaussian_filter(shape, smoothing / step, mode="nearest")
        return shape

    # smoothing an asymmetric bell drags its maximum toward the wide side;
    # nudge the construction centre until the smoothed peak sits on target
    centre = pu
    for _ in range(8):
        shape = build(centre)
        i, _j = np.unravel_index(np.argmax(shape), shape.shape)
        miss = pu - U[i, 0]
        if abs(miss) <= step / 2:
            break
        centre = float(np.clip(centre + miss, -hy + step, hy - step))
    shape /= shape.max()
    grid = n_clad + delta_n * shape
    return IndexProfile(float(x[0]), float(y[0]), step, step, grid, wavelength_ref)


def load_profile(path) -> IndexProfile:
    """Read a profile in the CSV grid format.

    Line 1 is ``# x0,y0,dx,dy,wavelength_um``; each following line is one row
    of index values at constant y.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ProfileError("malformed header: expected '# x0,y0,dx,dy,wavelength_um'")
    try:
        x0, y0, dx, dy, wl = (float(v) for v in lines[0][1:].split(","))
    except ValueError as exc:
        raise ProfileError(f"malformed header: {lines[0]!r}") from exc
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        try:
            rows.append([float(v) for v in ln.split(",")])
        except ValueError as exc:
            raise ProfileError(f"line {k}: non-numeric entry") from exc
    if not rows:
        raise ProfileError("profile has no data rows")
    ncol = len(rows[0])
    for k, row in enumerate(rows, start=2):
        if len(row) != ncol:
            raise ProfileError(f"non-rectangular grid: line {k} has {len(row)} columns, expected {ncol}")
    return IndexProfile(x0, y0, dx, dy, np.array(rows), wl)


def write_grid_csv(path, grid, x0: float, y0: float, dx: float, dy: float, wavelength: float) -> None:
    """Write any 2D real grid in the profile CSV format (shortest round-trip float repr)."""
    head = "# " + ",".join(repr(float(v)) for v in (x0, y0, dx, dy, wavelength))
    body = "\n".join(",".join(repr(float(v)) for v in row) for row in np.asarray(grid))
    Path(path).write_text(head + "\n" + body + "\n", encoding="utf-8")


def save_profile(profile: IndexProfile, path) -> None:
    """Write ``profile`` in the CSV grid format."""
    write_grid_csv(path, profile.grid, profile.x0, profile.y0, profile.dx, profile.dy, profile.wavelength_ref)


def slab_profile(
    core: float, n_core: float, n_clad: float, *, margin: float = 15.0, step: float = 0.25,
    wavelength_ref: float = 0.85,
) -> IndexProfile:
    """Symmetric slab, invariant along x, as a single-column profile.

    Samples sit at cell centres so the core/cladding interfaces fall midway
    between samples.
    """
    half = core / 2 + margin
    n = int(round(2 * half / step))
    y = -half + step * (np.arange(n) + 0.5)
    col = np.where(np.abs(y) < core / 2, n_core, n_clad)
    return IndexProfile(0.0, float(y[0]), 1.0, step, col[:, None], wavelength_ref)


def parabolic_profile(
    n0: float, na: float, scale: float, half_width: float, step: float,
    wavelength_ref: float = 0.85,
) -> IndexProfile:
    """Untruncated parabolic profile n^2 = n0^2 - na^2 (r/scale)^2 on a square window."""
    m = int(round(half_width / step))
    x = step * np.arange(-m, m + 1)
    X, Y = np.meshgrid(x, x)
    grid = np.sqrt(n0**2 - na**2 * (X**2 + Y**2) / scale**2)
    return IndexProfile(float(x[0]), float(x[0]), step, step, grid, wavelength_ref)
