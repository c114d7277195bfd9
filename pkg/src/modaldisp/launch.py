"""
Launch conditions and mode power coupling.

Power coupled from launch field j into waveguide mode i is the normalised
overlap

    c_ij = |<E_i, E_j>|^2 / (<E_i, E_i> <E_j, E_j>)

and fiber-mode contributions add incoherently, p_i = sum_j c_ij p_j.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .fibermodes import FiberModeSet, fiber_fields
from .modesolver import WaveguideModeSet
from .profile import IndexProfile

__all__ = [
    "LaunchError",
    "ModePowerDistribution",
    "CouplingMatrix",
    "GaussianBeam",
    "FiberBeam",
    "LaunchSpec",
    "MPD_PRESETS",
    "mpd_preset",
    "gaussian_field",
    "coupling_coefficient",
    "coupling_matrix",
    "waveguide_mpd",
    "read_mpd_csv",
    "write_mpd_csv",
]

MPD_PRESETS = {"no_mm": 15, "mm": 22}
"""PMN cutoffs: patchcord without / with a mode mixer."""

FWHM_TO_W = 1 / math.sqrt(2 * math.log(2))


class LaunchError(ValueError):
    """Invalid launch definition or field."""


@dataclass(frozen=True, eq=False)
class ModePowerDistribution:
    """Non-negative power per mode; ``total`` is the summed (coupled) power."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.array(self.powers, dtype=float)
        if p.ndim != 1:
            raise LaunchError("mode powers must be a 1D vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise LaunchError("mode powers must be finite and non-negative")
        if p.sum() > 1 + 1e-9:
            raise LaunchError(f"mode powers sum to {p.sum()}, above 1")
        p.setflags(write=False)
        object.__setattr__(self, "powers", p)

    def __len__(self):
        return len(self.powers)

    @property
    def total(self) -> float:
        return float(self.powers.sum())


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """``c[i, j]``: fraction of launch field j's power coupled into waveguide mode i."""

    c: np.ndarray

    @property
    def shape(self):
        return self.c.shape

    def column_sums(self) -> np.ndarray:
        return self.c.sum(axis=0)


@dataclass(frozen=True)
class GaussianBeam:
    """Restricted launch: Gaussian spot with intensity FWHM ``fwhm`` (um)."""

    fwhm: float = 4.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise LaunchError(f"Gaussian FWHM must be positive, got {self.fwhm}")


@dataclass(frozen=True, eq=False)
class FiberBeam:
    """Multimode-fiber launch: fiber modes carrying ``mpd`` (sums to 1)."""

    modeset: FiberModeSet
    mpd: ModePowerDistribution

    def __post_init__(self):
        if len(self.mpd) != len(self.modeset):
            raise LaunchError("MPD length does not match the fiber mode count")
        if abs(self.mpd.total - 1.0) > 1e-9:
            raise LaunchError(f"launch MPD must sum to 1, got {self.mpd.total}")


@dataclass(frozen=True, eq=False)
class LaunchSpec:
    beam: Union[GaussianBeam, FiberBeam]
    offset: tuple = (0.0, 0.0)

    def at(self, offset) -> "LaunchSpec":
        return replace(self, offset=(float(offset[0]), float(offset[1])))

    @property
    def source_powers(self) -> ModePowerDistribution:
        if isinstance(self.beam, GaussianBeam):
            return ModePowerDistribution(np.ones(1))
        return self.beam.mpd


def mpd_preset(kind: str, fiber_modeset: FiberModeSet) -> ModePowerDistribution:
    """Uniform power over fiber modes with PMN at or below the preset cutoff."""
    if kind not in MPD_PRESETS:
        raise LaunchError(f"unknown MPD preset {kind!r}; expected one of {sorted(MPD_PRESETS)}")
    included = fiber_modeset.pmns <= MPD_PRESETS[kind]
    count = int(included.sum())
    if count == 0:
        raise LaunchError(f"no fiber modes with PMN <= {MPD_PRESETS[kind]}")
    return ModePowerDistribution(np.where(included, 1.0 / count, 0.0))


def _grid_xy(grid):
    if isinstance(grid, IndexProfile):
        X, Y = grid.mesh()
        return X, Y, grid.dx, grid.dy
    X, Y = (np.asarray(a, dtype=float) for a in grid)
    dx = float(np.diff(X[0])[0]) if X.shape[1] > 1 else 1.0
    dy = float(np.diff(Y[:, 0])[0]) if Y.shape[0] > 1 else 1.0
    return X, Y, dx, dy


def gaussian_field(fwhm: float, offset, grid) -> np.ndarray:
    """Gaussian launch field E = exp(-r^2/w^2) with intensity FWHM ``fwhm``.

    Normalised over the whole plane (integral of |E|^2 is 1), so a spot that
    falls partly outside the window keeps its true power. ``grid`` is an
    :class:`IndexProfile` or a pair of meshgrid arrays ``(X, Y)``.
    """
    X, Y, dx, dy = _grid_xy(grid)
    if not fwhm > 0:
        raise LaunchError(f"Gaussian FWHM must be positive, got {fwhm}")
    if fwhm < 8 * max(dx, dy):
        raise LaunchError(f"grid under-resolves FWHM {fwhm} um: need step <= {fwhm / 8} um")
    w = fwhm * FWHM_TO_W
    r2 = (X - offset[0]) ** 2 + (Y - offset[1]) ** 2
    return np.sqrt(2 / (math.pi * w**2)) * np.exp(-r2 / w**2)


def coupling_coefficient(e_w, e_launch, dA: float = 1.0) -> float:
    """Normalised power overlap of two real fields sampled on the same grid."""
    e_w = np.asarray(e_w, dtype=float)
    e_launch = np.asarray(e_launch, dtype=float)
    if e_w.shape != e_launch.shape:
        raise LaunchError("fields are not on the same grid")
    nw = np.sum(e_w**2) * dA
    nl = np.sum(e_launch**2) * dA
    if nw == 0 or nl == 0:
        raise LaunchError("zero-energy field")
    return float((np.sum(e_w * e_launch) * dA) ** 2 / (nw * nl))


def _launch_fields(modeset: WaveguideModeSet, launch: LaunchSpec) -> np.ndarray:
    profile = modeset.profile
    X, Y = profile.mesh()
    if isinstance(launch.beam, GaussianBeam):
        return gaussian_field(launch.beam.fwhm, launch.offset, profile)[None]
    ox, oy = launch.offset
    x, y = profile.x, profile.y
    if not (x[0] <= ox <= x[-1] and y[0] <= oy <= y[-1]):
        raise LaunchError(f"fiber offset {launch.offset} lies outside the waveguide window")
    return fiber_fields(launch.beam.modeset, X, Y, launch.offset)


def coupling_matrix(modeset: WaveguideModeSet, launch: LaunchSpec) -> CouplingMatrix:
    """Coupling coefficients from every launch field into every waveguide mode.

    Launch fields are unit-power over the full plane; the window only truncates
    the overlap, so the part of a launch field falling outside the window
    couples to nothing instead of being renormalised away.
    """
    profile = modeset.profile
    dA = profile.cell_area
    F = _launch_fields(modeset, launch)
    F = F.reshape(len(F), -1)
    if len(modeset) == 0:
        return CouplingMatrix(np.zeros((0, len(F))))
    W = modeset.fields.reshape(len(modeset), -1)
    overlap = (W @ F.T) * dA
    norm_w = np.sum(W**2, axis=1) * dA
    norm_f = np.maximum(np.sum(F**2, axis=1) * dA, 1.0)
    c = overlap**2 / np.outer(norm_w, norm_f)
    return CouplingMatrix(np.clip(c, 0.0, 1.0))


def waveguide_mpd(c: CouplingMatrix, p_f: ModePowerDistribution) -> ModePowerDistribution:
    """Waveguide mode powers p_w = c @ p_f (incoherent sum over launch modes)."""
    cm = c.c if isinstance(c, CouplingMatrix) else np.asarray(c, dtype=float)
    pf = p_f.powers if isinstance(p_f, ModePowerDistribution) else np.asarray(p_f, dtype=float)
    if cm.shape[1] != len(pf):
        raise LaunchError(f"dimension mismatch: coupling has {cm.shape[1]} columns, MPD has {len(pf)}")
    return ModePowerDistribution(cm @ pf)


def read_mpd_csv(path, fiber_modeset: Optional[FiberModeSet] = None) -> ModePowerDistribution:
    """Read an MPD table keyed by ``mode_index`` or by ``m, n, orientation``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise LaunchError("empty MPD file")
    if "mode_index" in rows[0]:
        size = len(fiber_modeset) if fiber_modeset is not None else 1 + max(int(r["mode_index"]) for r in rows)
        p = np.zeros(size)
        for r in rows:
            p[int(r["mode_index"])] = float(r["power"])
        return ModePowerDistribution(p)
    if fiber_modeset is None:
        raise LaunchError("an (m, n, orientation) MPD needs the fiber mode set")
    lookup = {(md.m, md.n, md.orientation): k for k, md in enumerate(fiber_modeset)}
    p = np.zeros(len(fiber_modeset))
    for r in rows:
        key = (int(r["m"]), int(r["n"]), r["orientation"].strip())
        if key not in lookup:
            raise LaunchError(f"MPD row for unknown fiber mode {key}")
        p[lookup[key]] = float(r["power"])
    return ModePowerDistribution(p)


def write_mpd_csv(mpd: ModePowerDistribution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("mode_index,power\n")
        for i, p in enumerate(mpd.powers):
            fh.write(f"{i},{float(p)!r}\n")
