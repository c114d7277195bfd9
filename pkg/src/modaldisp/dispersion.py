"""
Modal dispersion: impulse response, frequency response and -3 dB bandwidth.

Each guided mode i carries power p_i, survives the mode-selective loss with
factor a_i in {0, 1}, and arrives after t_i = L n_group_i / c. The impulse
response is the binned sum of p_i a_i delta(t - t_i); its Fourier transform
gives H(f), and the bandwidth is the lowest frequency where |H(f)|/|H(0)|
drops to the threshold (0.5 by default, i.e. -3 dB of optical power).
"""

from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .launch import LaunchSpec, ModePowerDistribution, coupling_matrix, waveguide_mpd
from .modesolver import WaveguideModeSet, group_indices, solve_modes
from .profile import IndexProfile

__all__ = [
    "C_LIGHT",
    "DispersionError",
    "LossModel",
    "ChannelResponse",
    "ScanRow",
    "Scenario",
    "delays",
    "impulse_response",
    "bandwidth",
    "simulate_link",
    "scan_offsets",
    "fit_loss_model",
    "LossFit",
    "write_scan_csv",
    "read_power_csv",
]

C_LIGHT = 2.99792458e8  # m/s
MIN_BIN_PS = 0.01
BINS_PER_SPREAD = 2048
PAD_FACTOR = 8
POWER_THRESHOLD = 0.5
AMPLITUDE_THRESHOLD = 1 / math.sqrt(2)


class DispersionError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossModel:
    """Step mode-selective loss: the first ``cutoff_index`` modes (by descending
    n_eff) pass, the rest are removed. ``None`` passes every mode."""

    cutoff_index: Optional[int] = None
    kind: str = "step"

    def __post_init__(self):
        if self.kind != "step":
            raise ValueError(f"unsupported loss model kind {self.kind!r}")
        if self.cutoff_index is not None and self.cutoff_index < 0:
            raise ValueError("cutoff_index must be non-negative")

    def transmission(self, n_modes: int) -> np.ndarray:
        a = np.ones(n_modes)
        if self.cutoff_index is not None:
            a[self.cutoff_index:] = 0.0
        return a


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    t: np.ndarray  # ps, bin centres
    h: np.ndarray  # power per bin
    bin_width: float  # ps
    length: float = 0.0  # m
    coupled_power: float = 0.0  # before mode-selective loss
    surviving_power: float = 0.0  # after
    f: Optional[np.ndarray] = None  # GHz
    H: Optional[np.ndarray] = None
    f3db: Optional[float] = None  # GHz, inf when above the grid Nyquist
    exceeds_nyquist: bool = False
    threshold: float = POWER_THRESHOLD

    @property
    def blp(self) -> Optional[float]:
        """Bandwidth-length product in GHz*m."""
        if self.f3db is None:
            return None
        return self.f3db * self.length


def delays(n_group, length: float) -> np.ndarray:
    """Modal group delays in ps for a link of ``length`` metres."""
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    return np.asarray(n_group, dtype=float) * length / C_LIGHT * 1e12


def impulse_response(
    p_w, loss: LossModel, t, bin_width: Optional[float] = None, *, length: float = 0.0
) -> ChannelResponse:
    """Bin surviving mode powers at their delays.

    Bins are centred on multiples of ``bin_width`` with the earliest surviving
    arrival at t = 0. The default bin width is max(spread/2048, 0.01 ps).
    """
    p = p_w.powers if isinstance(p_w, ModePowerDistribution) else np.asarray(p_w, dtype=float)
    t = np.asarray(t, dtype=float)
    if p.shape != t.shape:
        raise ValueError("mode powers and delays must have the same length")
    kept = p * loss.transmission(len(p))
    alive = kept > 0
    if not np.any(alive):
        raise DispersionError("no propagating power: every powered mode is removed by the loss model")
    t0 = t[alive].min()
    spread = t[alive].max() - t0
    if bin_width is None:
        bin_width = max(spread / BINS_PER_SPREAD, MIN_BIN_PS)
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    k = np.floor((t[alive] - t0) / bin_width + 0.5).astype(int)
    h = np.bincount(k, weights=kept[alive], minlength=k.max() + 1)
    return ChannelResponse(
        t=bin_width * np.arange(len(h)),
        h=h,
        bin_width=float(bin_width),
        length=length,
        coupled_power=float(p.sum()),
        surviving_power=float(kept.sum()),
    )


def _dtft(h, bin_width, f_ghz):
    n = np.arange(len(h))
    phase = -2j * math.pi * np.outer(f_ghz * 1e-3 * bin_width, n)
    return np.exp(phase) @ h


def bandwidth(resp: ChannelResponse, threshold: float = POWER_THRESHOLD) -> ChannelResponse:
    """Return ``resp`` with H(f) and the bandwidth filled in.

    H is the FFT of h zero-padded to at least 8x its support. The first
    crossing of |H|/|H(0)| below ``threshold`` is bracketed on the FFT grid,
    resampled finely inside the bracket by direct transform, and located by
    linear interpolation. If |H| stays above the threshold up to the grid
    Nyquist frequency the bandwidth is ``inf`` and ``exceeds_nyquist`` is set.
    """
    h = resp.h
    if h.size == 0 or h.sum() <= 0:
        raise DispersionError("empty impulse response")
    nfft = 1 << max(10, int(math.ceil(math.log2(PAD_FACTOR * len(h)))))
    H = np.fft.rfft(h, nfft)
    f = np.fft.rfftfreq(nfft, resp.bin_width) * 1e3
    mag = np.abs(H) / abs(H[0])
    below = np.flatnonzero(mag < threshold)
    if below.size == 0:
        f3db, flag = math.inf, True
    else:
        k = below[0]
        fine = np.linspace(f[k - 1], f[k], 65)
        mfine = np.abs(_dtft(h, resp.bin_width, fine)) / abs(H[0])
        j = int(np.flatnonzero(mfine < threshold)[0])
        m0, m1 = mfine[j - 1], mfine[j]
        f3db = float(fine[j - 1] + (m0 - threshold) / (m0 - m1) * (fine[j] - fine[j - 1]))
        flag = False
    return ChannelResponse(
        t=resp.t, h=resp.h, bin_width=resp.bin_width, length=resp.length,
        coupled_power=resp.coupled_power, surviving_power=resp.surviving_power,
        f=f, H=H, f3db=f3db, exceeds_nyquist=flag, threshold=threshold,
    )


@dataclass(frozen=True)
class ScanRow:
    offset_x: float
    offset_y: float
    f3db: float
    blp: float
    coupled_power: float  # before loss
    received_power: float  # after loss
    coupled_power_db: float = 0.0  # received power relative to the scan maximum


class Scenario:
    """A waveguide, wavelength, link length, launch and loss model.

    The mode set (with group indices) is solved once on first use and shared
    by every offset evaluated through this scenario.
    """

    def __init__(
        self,
        profile: IndexProfile,
        wavelength: float,
        length: float,
        launch: LaunchSpec,
        loss: LossModel = LossModel(),
        *,
        max_modes: int = 400,
        dlambda: float = 1e-3,
        material_slope: float = 0.0,
        bin_width: Optional[float] = None,
        threshold: float = POWER_THRESHOLD,
        scan: Optional[Sequence] = None,
        modeset: Optional[WaveguideModeSet] = None,
    ):
        self.profile = profile
        self.wavelength = wavelength
        self.length = length
        self.launch = launch
        self.loss = loss
        self.max_modes = max_modes
        self.dlambda = dlambda
        self.material_slope = material_slope
        self.bin_width = bin_width
        self.threshold = threshold
        self.scan = None if scan is None else [tuple(map(float, o)) for o in scan]
        self._modeset = modeset
        self._lock = threading.Lock()

    @property
    def modeset(self) -> WaveguideModeSet:
        with self._lock:
            if self._modeset is None:
                ms = solve_modes(self.profile, self.wavelength, self.max_modes)
                self._modeset = group_indices(
                    self.profile, self.wavelength, self.dlambda, ms, material_slope=self.material_slope
                )
            elif self._modeset.n_group is None:
                self._modeset = group_indices(
                    self.profile, self.wavelength, self.dlambda, self._modeset,
                    material_slope=self.material_slope,
                )
            return self._modeset

    def with_(self, **changes) -> "Scenario":
        """Copy with some attributes replaced; the solved mode set is reused."""
        kw = dict(
            profile=self.profile, wavelength=self.wavelength, length=self.length, launch=self.launch,
            loss=self.loss, max_modes=self.max_modes, dlambda=self.dlambda,
            material_slope=self.material_slope, bin_width=self.bin_width,
            threshold=self.threshold, scan=self.scan,
        )
        if not {"profile", "wavelength", "max_modes", "dlambda", "material_slope"} & changes.keys():
            kw["modeset"] = self.modeset
        kw.update(changes)
        return Scenario(**kw)

    def mode_powers(self, offset=None) -> ModePowerDistribution:
        launch = self.launch if offset is None else self.launch.at(offset)
        c = coupling_matrix(self.modeset, launch)
        return waveguide_mpd(c, launch.source_powers)

    def response(self, offset=None, p_w: Optional[ModePowerDistribution] = None) -> ChannelResponse:
        ms = self.modeset
        if len(ms) == 0:
            raise DispersionError("profile supports no guided modes")
        if p_w is None:
            p_w = self.mode_powers(offset)
        t = delays(ms.n_group, self.length)
        resp = impulse_response(p_w, self.loss, t, self.bin_width, length=self.length)
        return bandwidth(resp, self.threshold)


def simulate_link(
    profile: IndexProfile, wavelength: float, length: float, launch: LaunchSpec,
    loss: LossModel = LossModel(), **options,
) -> ChannelResponse:
    """End-to-end: modes, group indices, coupling, MPD, delays, impulse response, bandwidth."""
    return Scenario(profile, wavelength, length, launch, loss, **options).response()


def _db(p, ref):
    return 10 * math.log10(max(p, 1e-300) / ref) if ref > 0 else -math.inf


def scan_offsets(scenario: Scenario, offsets: Sequence, threads: Optional[int] = None) -> list:
    """Bandwidth, BLP and received power at each launch offset.

    Rows come back in input order; ``coupled_power_db`` is the received
    (post-loss) power relative to the largest value in the scan.
    """
    offsets = [(float(o[0]), float(o[1])) for o in offsets]
    scenario.modeset  # solve once before fanning out

    def run(off):
        resp = scenario.response(off)
        return resp.f3db, resp.coupled_power, resp.surviving_power

    if threads is not None and threads > 1 and len(offsets) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, offsets))
    else:
        results = [run(o) for o in offsets]
    ref = max(r[2] for r in results) if results else 0.0
    return [
        ScanRow(o[0], o[1], f3, f3 * scenario.length, cp, rp, _db(rp, ref))
        for o, (f3, cp, rp) in zip(offsets, results)
    ]


@dataclass(frozen=True)
class LossFit:
    loss: LossModel
    rmse: float
    rmse_by_cutoff: np.ndarray


def fit_loss_model(measured, scenario: Scenario) -> LossFit:
    """Fit the step-loss cutoff to a measured received-power curve.

    ``measured`` holds rows ``(offset_x, offset_y, power_db)``. For every cutoff
    1..N the simulated received power at the measured offsets is normalised to
    its maximum and compared in dB with the (likewise normalised) measurement;
    the cutoff with the lowest RMSE wins, ties going to the lowest cutoff.
    """
    rows = np.asarray(measured, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 3:
        raise ValueError("measured data must be rows of (offset_x, offset_y, power_db)")
    if len(rows) < 3:
        raise ValueError(f"need at least 3 measured points, got {len(rows)}")
    if scenario.scan:
        sc = np.asarray(scenario.scan)
        lo, hi = sc.min(axis=0), sc.max(axis=0)
    else:
        p = scenario.profile
        lo, hi = np.array([p.x[0], p.y[0]]), np.array([p.x[-1], p.y[-1]])
    tol = 1e-9
    if np.any(rows[:, :2] < lo - tol) or np.any(rows[:, :2] > hi + tol):
        raise ValueError("measured offsets fall outside the scenario scan range")

    n = len(scenario.modeset)
    if n == 0:
        raise DispersionError("profile supports no guided modes")
    P = np.array([scenario.mode_powers((x, y)).powers for x, y, _ in rows])
    received = np.cumsum(P, axis=1)  # column k-1: power kept with cutoff k
    sim_db = 10 * np.log10(np.maximum(received, 1e-300) / np.maximum(received.max(axis=0), 1e-300))
    meas_db = rows[:, 2] - rows[:, 2].max()
    rmse = np.sqrt(np.mean((sim_db - meas_db[:, None]) ** 2, axis=0))
    best = rmse.min()
    k = int(np.flatnonzero(rmse <= best * (1 + 1e-12) + 1e-15)[0]) + 1
    return LossFit(LossModel(k), float(rmse[k - 1]), rmse)


def write_scan_csv(rows: Sequence[ScanRow], path_or_file) -> None:
    """Scan table: offset_x_um, offset_y_um, f3db_ghz, blp_ghz_m, coupled_power_db."""
    lines = ["offset_x_um,offset_y_um,f3db_ghz,blp_ghz_m,coupled_power_db"]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (r.offset_x, r.offset_y, r.f3db, r.blp, r.coupled_power_db)))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def read_power_csv(path) -> np.ndarray:
    """Measured received power: columns offset_x_um, offset_y_um, power_db."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return np.array([[float(r["offset_x_um"]), float(r["offset_y_um"]), float(r["power_db"])] for r in rows])
    except KeyError as exc:
        raise ValueError(f"power table is missing column {exc}") from exc
