"""Bandwidth versus horizontal launch offset for a fiber launch, with and without a mode mixer.

Uses a 0.5 um grid so it runs in well under a minute.
"""

import numpy as np

from modaldisp import (FiberBeam, LaunchSpec, LossModel, RadialFiberSpec, Scenario, mpd_preset,
                       scan_offsets, solve_lp_modes, synth_gi_profile)

profile = synth_gi_profile(step=0.5)
fiber = solve_lp_modes(RadialFiberSpec(), 0.85)
xs = np.arange(-20, 20.01, 5.0)
shared = None
for preset in ("no_mm", "mm"):
    launch = LaunchSpec(FiberBeam(fiber, mpd_preset(preset, fiber)))
    sc = Scenario(profile, 0.85, 1.055, launch, LossModel(40), modeset=shared)
    shared = sc.modeset
    rows = scan_offsets(sc, [(x, 0.0) for x in xs])
    print(preset)
    for r in rows:
        print(f"  x = {r.offset_x:6.1f} um  f3dB = {r.f3db:8.1f} GHz  rel. power = {r.coupled_power_db:6.2f} dB")
