"""Bandwidth-length product map for a small Gaussian spot scanned over the core facet."""

import numpy as np

from modaldisp import GaussianBeam, LaunchSpec, Scenario, scan_offsets, synth_gi_profile

profile = synth_gi_profile(step=0.5)
sc = Scenario(profile, 0.787, 0.192, LaunchSpec(GaussianBeam(4.0)))
grid = np.arange(-16, 16.01, 4.0)
rows = scan_offsets(sc, [(x, y) for y in grid for x in grid])
blp = np.array([r.blp for r in rows]).reshape(len(grid), len(grid))

print("BLP in GHz*m, rows from top (y = +16) to bottom; 'inf' means |H| never reached 0.5")
for y, row in zip(grid[::-1], blp[::-1]):
    print(f"y={y:5.1f} " + " ".join(f"{v:6.0f}" if np.isfinite(v) else "   inf" for v in row))
print("index peak at", profile.peak_position())
