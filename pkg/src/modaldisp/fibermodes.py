"""
LP modes of circular fibers.

Step-index fibers are solved from the Bessel characteristic equation

    u J_{m-1}(u) / J_m(u) = -w K_{m-1}(w) / K_m(w),   u^2 + w^2 = V^2.

Power-law (graded) fibers are solved per azimuthal order m as a symmetric
tridiagonal eigenproblem for the radial equation

    (1/r) (r R')' - m^2/r^2 R + k0^2 n(r)^2 R = beta^2 R

on a cell-centred grid capped with R = 0 at r = 3a.

Radial order n starts at 0, so the principal mode number m + 2n + 1 is 1 for
the fundamental mode. Each (m, n) with m > 0 appears twice, as a cos and a
sin orientation; polarisation is not counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import jv, kve

from .profile import RadialFiberSpec, fiber_index

__all__ = [
    "FiberMode",
    "FiberModeSet",
    "FiberModeError",
    "pmn",
    "solve_lp_modes",
    "eval_field",
    "fiber_fields",
]

RADIAL_STEP = 0.05
CAP_FACTOR = 3.0


class FiberModeError(RuntimeError):
    """Failure to find or evaluate LP modes."""


def pmn(m: int, n: int) -> int:
    """Principal mode number of LP(m, n), with n counted from 0."""
    if m < 0 or n < 0:
        raise ValueError(f"mode indices must be non-negative, got m={m}, n={n}")
    return m + 2 * n + 1


@dataclass(frozen=True, eq=False)
class FiberMode:
    """One oriented LP mode with a tabulated radial profile.

    ``radial[j]`` is R(r[j]); the field is R(r) cos(m phi) or R(r) sin(m phi),
    normalised so that the integral of |E|^2 over the plane is 1.
    """

    m: int
    n: int
    orientation: str
    n_eff: float
    r: np.ndarray
    radial: np.ndarray

    @property
    def pmn(self) -> int:
        return pmn(self.m, self.n)

    def radial_at(self, rr) -> np.ndarray:
        """Interpolated radial profile; zero beyond the tabulated range."""
        r0 = 0.0
        if self.m == 0:
            R0 = (9 * self.radial[0] - self.radial[1]) / 8
        else:
            R0 = 0.0
        rs = np.concatenate([[r0], self.r])
        Rs = np.concatenate([[R0], self.radial])
        return np.interp(rr, rs, Rs, right=0.0)


@dataclass(frozen=True, eq=False)
class FiberModeSet:
    spec: RadialFiberSpec
    wavelength: float
    modes: tuple

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def max_pmn(self) -> int:
        return max((md.pmn for md in self.modes), default=0)

    @property
    def pmns(self) -> np.ndarray:
        return np.array([md.pmn for md in self.modes], dtype=int)

    @property
    def n_eff(self) -> np.ndarray:
        return np.array([md.n_eff for md in self.modes])


def _radial_grid(spec: RadialFiberSpec, step: float) -> np.ndarray:
    count = int(math.ceil(CAP_FACTOR * spec.a / step))
    return step * (np.arange(count) + 0.5)


def _normalise(r, R, m, step):
    ang = 2 * math.pi if m == 0 else math.pi
    R = R / math.sqrt(ang * np.sum(R**2 * r) * step)
    # sign convention: positive on axis side
    if R[np.argmax(np.abs(R))] < 0:
        R = -R
    return R


def _graded_roots(spec, wavelength, step):
    """Yield (m, n, n_eff, r, R) for a power-law profile."""
    k0 = 2 * math.pi / wavelength
    r = _radial_grid(spec, step)
    nsq = fiber_index(spec, r) ** 2
    r_half = r + step / 2  # r_{j+1/2}
    r_minus = r - step / 2  # r_{j-1/2}; zero for the first cell
    lower = (k0 * spec.n_clad) ** 2
    upper = (k0 * spec.n_core) ** 2
    base = -(r_half + r_minus) / (step**2 * r) + k0**2 * nsq
    off = r_half[:-1] / (step**2 * np.sqrt(r[:-1] * r[1:]))
    m = 0
    while True:
        diag = base - m**2 / r**2
        w, v = eigh_tridiagonal(diag, off, select="v", select_range=(lower, upper))
        if w.size == 0:
            break
        order = np.argsort(-w)
        for n, idx in enumerate(order):
            R = v[:, idx] / np.sqrt(r)
            yield m, n, math.sqrt(w[idx]) / k0, r, _normalise(r, R, m, step)
        m += 1


def _char_eq(u, m, V):
    w = math.sqrt(max(V * V - u * u, 0.0))
    if w == 0.0:
        return u * jv(m - 1, u)
    ratio = kve(abs(m - 1), w) / kve(m, w)
    return u * jv(m - 1, u) + w * jv(m, u) * ratio


def _step_roots(spec, wavelength, step):
    """Yield (m, n, n_eff, r, R) for a step-index profile."""
    k0 = 2 * math.pi / wavelength
    V = spec.v_number(wavelength)
    a = spec.a
    r = _radial_grid(spec, step)
    inside = r <= a
    m = 0
    while True:
        grid = np.linspace(1e-9, V * (1 - 1e-12), max(64, int(40 * V)))
        vals = np.array([_char_eq(u, m, V) for u in grid])
        roots = []
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            try:
                roots.append(brentq(_char_eq, grid[i], grid[i + 1], args=(m, V), xtol=1e-14))
            except ValueError as exc:
                raise FiberModeError(f"root finder failed for m={m}, near u={grid[i]:.4f}") from exc
        if not roots:
            break
        for n, u in enumerate(sorted(roots)):
            w = math.sqrt(V * V - u * u)
            R = np.empty_like(r)
            R[inside] = jv(m, u * r[inside] / a) / jv(m, u)
            # kve(m, x) = K_m(x) e^x, so the ratio below is K_m(w r/a) / K_m(w)
            R[~inside] = kve(m, w * r[~inside] / a) / kve(m, w) * np.exp(-w * (r[~inside] / a - 1))
            beta = math.sqrt((k0 * spec.n_core) ** 2 - (u / a) ** 2)
            yield m, n, beta / k0, r, _normalise(r, R, m, step)
        m += 1


def solve_lp_modes(
    spec: RadialFiberSpec, wavelength: float, *, radial_step: float = RADIAL_STEP
) -> FiberModeSet:
    """All guided LP modes of ``spec`` at ``wavelength`` (um).

    Modes are ordered by ascending PMN, then m, then orientation (cos first).
    """
    if wavelength <= 0 or spec.v_number(wavelength) <= 0:
        raise FiberModeError("V-number must be positive")
    solver = _step_roots if spec.is_step else _graded_roots
    modes = []
    for m, n, n_eff, r, R in solver(spec, wavelength, radial_step):
        R.setflags(write=False)
        for orient in ("cos",) if m == 0 else ("cos", "sin"):
            modes.append(FiberMode(m, n, orient, float(n_eff), r, R))
    modes.sort(key=lambda md: (md.pmn, md.m, md.orientation != "cos"))
    return FiberModeSet(spec, wavelength, tuple(modes))


def _angular(m: int, z: np.ndarray, orientation: str) -> np.ndarray:
    """cos(m phi) or sin(m phi) from the unit phasor z = exp(i phi), exact on nodal lines."""
    zm = np.ones_like(z)
    for _ in range(m):
        zm = zm * z
    return zm.real if orientation == "cos" else zm.imag


def _polar(x, y, offset):
    dx = np.asarray(x, dtype=float) - offset[0]
    dy = np.asarray(y, dtype=float) - offset[1]
    rr = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(rr > 0, (dx + 1j * dy) / rr, 1.0 + 0j)
    return rr, z


def eval_field(mode: FiberMode, x, y, offset=(0.0, 0.0)):
    """Field of ``mode`` at points ``(x, y)`` for a fiber centred at ``offset``."""
    rr, z = _polar(x, y, offset)
    return mode.radial_at(rr) * _angular(mode.m, z, mode.orientation)


def fiber_fields(modeset: FiberModeSet, x, y, offset=(0.0, 0.0), indices: Optional[list] = None):
    """Fields of many modes on the same points, stacked along axis 0."""
    rr, z = _polar(x, y, offset)
    idx = range(len(modeset)) if indices is None else indices
    out = np.empty((len(idx),) + np.shape(rr))
    zpow = {0: np.ones_like(z)}
    cache = {}
    for k, i in enumerate(idx):
        md = modeset[i]
        if md.m not in zpow:
            top = max(zpow)
            for mm in range(top + 1, md.m + 1):
                zpow[mm] = zpow[mm - 1] * z
        key = (md.m, md.n)
        if key not in cache:
            cache[key] = md.radial_at(rr)
        ang = zpow[md.m].real if md.orientation == "cos" else zpow[md.m].imag
        out[k] = cache[key] * ang
    return out


def write_fiber_modes_csv(modeset: FiberModeSet, path) -> None:
    """Fiber mode-set table: m, n, orientation, pmn, n_eff."""
    lines = ["m,n,orientation,pmn,n_eff"]
    for md in modeset:
        lines.append(f"{md.m},{md.n},{md.orientation},{md.pmn},{md.n_eff!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
