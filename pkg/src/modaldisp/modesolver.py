"""
Scalar finite-difference mode solver for 2D index profiles.

The transverse Helmholtz operator

    A = d2/dx2 + d2/dy2 + k0^2 n(x, y)^2

is discretised with the 5-point stencil on the profile grid, with the field
forced to zero just outside the window (Dirichlet). Guided modes are the
eigenvectors of ``A`` with eigenvalue beta^2 above (k0 n_clad)^2; they are
found with shift-invert Lanczos (ARPACK) targeting the top of the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .profile import IndexProfile, write_grid_csv

__all__ = [
    "WaveguideMode",
    "WaveguideModeSet",
    "ModeSolverError",
    "WindowClippingError",
    "ModeMatchError",
    "helmholtz_operator",
    "solve_modes",
    "solve_lowest",
    "group_indices",
    "match_modes",
    "overlap_matrix",
    "write_modes_csv",
]

GUIDED_EPS = 1e-5
CLIP_TOL = 1e-6
DENSE_LIMIT = 2000
MATCH_THRESHOLD = 0.5


class ModeSolverError(RuntimeError):
    """Eigensolver failure (non-convergence, bad input)."""


class WindowClippingError(ModeSolverError):
    """The fundamental mode does not decay before reaching the window edge."""


class ModeMatchError(ModeSolverError):
    """Modes of two sets could not be paired by field overlap."""

    def __init__(self, unmatched):
        self.unmatched = list(unmatched)
        super().__init__(f"unmatched mode(s) {self.unmatched}: overlap below {MATCH_THRESHOLD}")


@dataclass(frozen=True, eq=False)
class WaveguideMode:
    """One guided mode: grid-normalised real field (sum |E|^2 dA = 1) and n_eff."""

    field: np.ndarray
    n_eff: float
    index: int
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class WaveguideModeSet:
    modes: tuple
    wavelength: float
    profile: IndexProfile
    n_group: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def n_eff(self) -> np.ndarray:
        return np.array([m.n_eff for m in self.modes])

    @property
    def fields(self) -> np.ndarray:
        """Fields stacked as ``(n_modes, ny, nx)``."""
        if not self.modes:
            return np.zeros((0,) + self.profile.shape)
        return np.stack([m.field for m in self.modes])

    def with_group_index(self, n_group) -> "WaveguideModeSet":
        n_group = np.asarray(n_group, dtype=float)
        if n_group.shape != (len(self),):
            raise ValueError("n_group must have one entry per mode")
        return replace(self, n_group=n_group)


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def helmholtz_operator(profile: IndexProfile, wavelength: float) -> sp.csr_matrix:
    """Sparse symmetric matrix of the discrete scalar Helmholtz operator.

    Unknowns are ordered row-major like ``profile.grid``. An axis with a
    single sample is treated as invariant (no derivative along it).
    """
    ny, nx = profile.shape
    k0 = 2 * math.pi / wavelength
    lap = sp.csr_matrix((nx * ny, nx * ny))
    if nx > 1:
        lap = lap + sp.kron(sp.identity(ny), _second_difference(nx, profile.dx))
    if ny > 1:
        lap = lap + sp.kron(_second_difference(ny, profile.dy), sp.identity(nx))
    pot = sp.diags((k0 * profile.grid.ravel()) ** 2)
    return sp.csr_matrix(lap + pot)


def _count_estimate(profile: IndexProfile, k0: float) -> int:
    """Rough number of guided modes from phase-space volume."""
    excess = np.clip(profile.grid**2 - profile.n_clad**2, 0, None)
    ny, nx = profile.shape
    if nx == 1 or ny == 1:
        h = profile.dy if nx == 1 else profile.dx
        return int(k0 / math.pi * np.sum(np.sqrt(excess)) * h) + 1
    return int(k0**2 / (4 * math.pi) * excess.sum() * profile.cell_area) + 1


def _top_eigenpairs(A: sp.csr_matrix, k: int, sigma: float):
    """Largest ``k`` eigenpairs of symmetric ``A``, sorted by descending eigenvalue."""
    n = A.shape[0]
    k = min(k, n)
    if n <= DENSE_LIMIT or k >= n - 1:
        w, v = scipy.linalg.eigh(A.toarray(), subset_by_index=[n - k, n - 1])
    else:
        # fixed start vector keeps ARPACK deterministic
        v0 = np.cos(0.5 + np.arange(n) * 0.7071)
        try:
            w, v = eigsh(A, k=k, sigma=sigma, which="LM", v0=v0, tol=0, maxiter=50 * n)
        except ArpackNoConvergence as exc:
            raise ModeSolverError(f"eigensolver did not converge for k={k}") from exc
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def _assemble(profile, wavelength, A, w, v, start_index=0) -> list:
    k0 = 2 * math.pi / wavelength
    dA = _quadrature_area(profile)
    _X, Y = profile.mesh()
    modes = []
    for idx in range(len(w)):
        vec = v[:, idx]
        res = np.linalg.norm(A @ vec - w[idx] * vec) / abs(w[idx] * np.linalg.norm(vec))
        field = vec.reshape(profile.shape)
        field = field / math.sqrt(np.sum(field**2) * dA)
        flat = field.ravel()
        if flat[np.argmax(np.abs(flat))] < 0:
            field = -field
        modes.append((float(math.sqrt(max(w[idx], 0.0)) / k0), field, float(res)))
    # descending n_eff; exact ties go to the mode with the higher centroid
    centroid = [float(np.sum(f**2 * Y) * dA) for _, f, _ in modes]
    order = sorted(range(len(modes)), key=lambda i: (-modes[i][0], -centroid[i]))
    out = []
    for rank, i in enumerate(order):
        n_eff, field, res = modes[i]
        field.setflags(write=False)
        out.append(WaveguideMode(field=field, n_eff=n_eff, index=start_index + rank, residual=res))
    return out


def _quadrature_area(profile: IndexProfile) -> float:
    ny, nx = profile.shape
    if nx == 1 and ny == 1:
        return 1.0
    if nx == 1:
        return profile.dy
    if ny == 1:
        return profile.dx
    return profile.cell_area


def _check_window(profile: IndexProfile, field: np.ndarray) -> None:
    ny, nx = profile.shape
    a = np.abs(field)
    edge = []
    if ny > 1:
        edge += [a[0, :], a[-1, :]]
    if nx > 1:
        edge += [a[:, 0], a[:, -1]]
    if not edge:
        return
    ratio = max(e.max() for e in edge) / a.max()
    if ratio > CLIP_TOL:
        raise WindowClippingError(
            f"window clipping: fundamental-mode field at the boundary is {ratio:.2e} of its peak"
        )


def solve_modes(
    profile: IndexProfile,
    wavelength: float,
    max_modes: int = 400,
    *,
    guided_eps: float = GUIDED_EPS,
    check_window: bool = True,
) -> WaveguideModeSet:
    """Guided scalar modes of ``profile`` at ``wavelength`` (um).

    Returns every mode with n_eff > n_clad + guided_eps, at most ``max_modes``,
    ordered by descending n_eff.

    Raises
    ------
    WindowClippingError
        If the fundamental mode is not negligible at the window edge.
    ModeSolverError
        If the eigensolver fails to converge.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    n_clad = profile.n_clad
    if profile.n_max <= n_clad + guided_eps or max_modes < 1:
        return WaveguideModeSet((), wavelength, profile)

    k0 = 2 * math.pi / wavelength
    A = helmholtz_operator(profile, wavelength)
    sigma = (k0 * profile.n_max) ** 2
    threshold = (k0 * (n_clad + guided_eps)) ** 2
    n_unknowns = A.shape[0]

    k = min(max_modes + 1, max(8, int(1.25 * _count_estimate(profile, k0)) + 4), n_unknowns)
    while True:
        w, v = _top_eigenpairs(A, k, sigma)
        n_guided = int(np.sum(w > threshold))
        if n_guided < k or k > max_modes or k >= n_unknowns:
            break
        k = min(2 * k, max_modes + 1, n_unknowns)
    n_keep = min(n_guided, max_modes)
    modes = _assemble(profile, wavelength, A, w[:n_keep], v[:, :n_keep])
    if check_window and modes:
        _check_window(profile, modes[0].field)
    return WaveguideModeSet(tuple(modes), wavelength, profile)


def solve_lowest(profile: IndexProfile, wavelength: float, count: int) -> WaveguideModeSet:
    """The ``count`` modes with the largest n_eff, guided or not (used for pairing)."""
    k0 = 2 * math.pi / wavelength
    A = helmholtz_operator(profile, wavelength)
    w, v = _top_eigenpairs(A, count, (k0 * profile.n_max) ** 2)
    return WaveguideModeSet(tuple(_assemble(profile, wavelength, A, w, v)), wavelength, profile)


def overlap_matrix(set_a: WaveguideModeSet, set_b: WaveguideModeSet) -> np.ndarray:
    """Field overlaps <E_a, E_b> on the shared grid, shape ``(len(a), len(b))``."""
    fa, fb = set_a.fields, set_b.fields
    if fa.shape[1:] != fb.shape[1:]:
        raise ValueError("mode sets do not share a grid")
    dA = _quadrature_area(set_a.profile)
    return (fa.reshape(len(fa), -1) @ fb.reshape(len(fb), -1).T) * dA


def match_modes(set_a: WaveguideModeSet, set_b: WaveguideModeSet) -> np.ndarray:
    """Pair each mode of ``set_a`` with a mode of ``set_b`` by greedy maximum |overlap|.

    Returns ``pairing`` with ``set_b[pairing[i]]`` matching ``set_a[i]``.
    Every pair must reach |<E_a, E_b>|^2 >= 0.5, otherwise :class:`ModeMatchError`.
    """
    if len(set_a) == 0:
        return np.zeros(0, dtype=int)
    ov = overlap_matrix(set_a, set_b) ** 2
    pairing = np.full(len(set_a), -1, dtype=int)
    work = ov.copy()
    for _ in range(min(work.shape)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        if work[i, j] < MATCH_THRESHOLD:
            break
        pairing[i] = j
        work[i, :] = -1.0
        work[:, j] = -1.0
    unmatched = np.flatnonzero(pairing < 0)
    if unmatched.size:
        raise ModeMatchError(unmatched.tolist())
    return pairing


def _shift_index(profile: IndexProfile, dn: float) -> IndexProfile:
    if dn == 0:
        return profile
    return replace(profile, grid=profile.grid + dn)


def group_indices(
    profile: IndexProfile,
    wavelength: float,
    dlambda: float = 1e-3,
    modeset: Optional[WaveguideModeSet] = None,
    *,
    material_slope: float = 0.0,
    extra: int = 4,
) -> WaveguideModeSet:
    """Fill in group indices n_g = n_eff - lambda0 * dn_eff/dlambda.

    The derivative is a central difference over ``lambda0 +- dlambda``; modes at
    the side wavelengths are paired to ``modeset`` by field overlap so that
    crossings in the n_eff ordering do not scramble the result.
    ``material_slope`` (1/um) adds a uniform linear material dispersion dn/dlambda.
    """
    if dlambda <= 0:
        raise ValueError(f"dlambda must be positive, got {dlambda}")
    if modeset is None:
        modeset = solve_modes(profile, wavelength)
    n = len(modeset)
    if n == 0:
        return modeset.with_group_index(np.zeros(0))
    count = n + extra
    side = []
    for sgn in (-1.0, 1.0):
        p = _shift_index(profile, sgn * dlambda * material_slope)
        s = solve_lowest(p, wavelength + sgn * dlambda, count)
        side.append(s.n_eff[match_modes(modeset, s)])
    dn_dl = (side[1] - side[0]) / (2 * dlambda)
    return modeset.with_group_index(modeset.n_eff - wavelength * dn_dl)


def write_modes_csv(modeset: WaveguideModeSet, path, field_dir=None) -> None:
    """Mode table (mode_index, n_eff, n_group) plus optional per-mode field grids.

    Fields go to ``field_dir/mode_XXXX.csv`` in the profile grid format.
    """
    ng = modeset.n_group
    lines = ["mode_index,n_eff,n_group"]
    for k, md in enumerate(modeset):
        g = "" if ng is None else repr(float(ng[k]))
        lines.append(f"{md.index},{float(md.n_eff)!r},{g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if field_dir is not None:
        out = Path(field_dir)
        out.mkdir(parents=True, exist_ok=True)
        p = modeset.profile
        for md in modeset:
            write_grid_csv(out / f"mode_{md.index:04d}.csv", md.field, p.x0, p.y0, p.dx, p.dy, modeset.wavelength)
