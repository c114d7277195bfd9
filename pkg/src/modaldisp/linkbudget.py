"""Optical link power budget.

Receiver sensitivity is modelled as the power ``q`` times above the noise
floor ``NEP * sqrt(BW)``. The factor ``q`` lumps together everything the
noise density alone does not set (target BER, extinction ratio, penalties);
:data:`DEFAULT_Q` is calibrated so that a 38 pW/sqrt(Hz), 60 GHz receiver
has a sensitivity of -3 dBm.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

__all__ = [
    "BudgetSpec",
    "BudgetReport",
    "BudgetError",
    "sensitivity",
    "calibrate_q",
    "budget",
    "DEFAULT_Q",
    "read_budget_json",
    "write_budget_json",
]

# sensitivity and path loss are rounded to this many dB decimals so decimal inputs stay exact
DB_DECIMALS = 9


class BudgetError(ValueError):
    pass


def sensitivity(nep: float, bw: float, q: float) -> float:
    """Receiver sensitivity in dBm.

    Parameters
    ----------
    nep : float
        Noise-equivalent power in pW/sqrt(Hz).
    bw : float
        Receiver bandwidth in GHz.
    q : float
        Ratio of the required signal power to the noise power.
    """
    if not (nep > 0 and bw > 0 and q > 0):
        raise BudgetError(f"sensitivity needs positive inputs, got nep={nep}, bw={bw}, q={q}")
    noise_mw = nep * 1e-12 * math.sqrt(bw * 1e9) * 1e3
    return 10 * math.log10(q * noise_mw)


def calibrate_q(target_dbm: float, nep: float, bw: float) -> float:
    """The ``q`` for which :func:`sensitivity` returns ``target_dbm``."""
    return 10 ** (target_dbm / 10) / 10 ** (sensitivity(nep, bw, 1.0) / 10)


CALIBRATION = {"target_dbm": -3.0, "nep": 38.0, "bw": 60.0}
DEFAULT_Q = calibrate_q(CALIBRATION["target_dbm"], CALIBRATION["nep"], CALIBRATION["bw"])


@dataclass(frozen=True)
class BudgetSpec:
    """Link parameters. Powers in dBm, ``wg_loss`` in dB/cm, ``length`` in cm."""

    launch_power: float = 6.0
    nep: float = 38.0
    rx_bandwidth: float = 60.0
    q_factor: float = DEFAULT_Q
    wg_loss: float = 0.04
    length: float = 100.0
    other_losses: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise BudgetError(f"{f.name}: expected a finite number, got {v!r}")
        if self.nep < 0:
            raise BudgetError("nep: must be >= 0")
        if self.rx_bandwidth <= 0:
            raise BudgetError("rx_bandwidth: must be > 0")
        if self.length < 0:
            raise BudgetError("length: must be >= 0")
        if self.q_factor <= 0:
            raise BudgetError("q_factor: must be > 0")


@dataclass(frozen=True)
class BudgetReport:
    budget_db: float
    path_loss_db: float
    margin_db: float
    feasible: bool
    sensitivity_dbm: float

    def to_dict(self) -> dict:
        return asdict(self)


def budget(spec: BudgetSpec) -> BudgetReport:
    """Power budget, path loss and margin of a link."""
    if spec.nep == 0:
        sens = -math.inf  # noiseless receiver
    else:
        sens = round(sensitivity(spec.nep, spec.rx_bandwidth, spec.q_factor), DB_DECIMALS)
    total = spec.launch_power - sens
    path = round(spec.wg_loss * spec.length + spec.other_losses, DB_DECIMALS)
    margin = total - path
    return BudgetReport(total, path, margin, bool(margin >= 0), sens)


def read_budget_json(path) -> BudgetSpec:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return BudgetSpec(**data)


def write_budget_json(report: BudgetReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
