"""Modal dispersion toolkit for multimode optical waveguides."""

__version__ = "0.1.0"

from .dispersion import (
    ChannelResponse,
    DispersionError,
    LossFit,
    LossModel,
    ScanRow,
    Scenario,
    bandwidth,
    delays,
    fit_loss_model,
    impulse_response,
    scan_offsets,
    simulate_link,
)
from .fibermodes import FiberMode, FiberModeSet, pmn, solve_lp_modes
from .launch import (
    CouplingMatrix,
    FiberBeam,
    GaussianBeam,
    LaunchSpec,
    ModePowerDistribution,
    coupling_coefficient,
    coupling_matrix,
    gaussian_field,
    mpd_preset,
    waveguide_mpd,
)
from .linkbudget import DEFAULT_Q, BudgetSpec, budget, calibrate_q, sensitivity
from .modesolver import (
    WaveguideMode,
    WaveguideModeSet,
    group_indices,
    match_modes,
    solve_lowest,
    solve_modes,
)
from .profile import (
    IndexProfile,
    RadialFiberSpec,
    load_profile,
    save_profile,
    synth_gi_profile,
)
from .pulseanalysis import PulseFit, Trace, fit_autocorrelation, link_bandwidth
