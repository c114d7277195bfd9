"""LP mode census of a 50 um graded-index fiber at 850 nm, grouped by PMN."""

from collections import Counter

from modaldisp import RadialFiberSpec, solve_lp_modes

fs = solve_lp_modes(RadialFiberSpec(a=25.0, na=0.2, alpha=2.0), 0.85)
print(f"{len(fs)} LP modes (orientations counted), max PMN {fs.max_pmn}")
for pmn, count in sorted(Counter(fs.pmns.tolist()).items()):
    print(f"  PMN {pmn:2d}: {count:2d} modes")
