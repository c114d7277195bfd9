"""Power budget of a 1 m polymer waveguide link, and how the margin falls with length."""

from dataclasses import replace

from modaldisp import BudgetSpec, budget

spec = BudgetSpec(launch_power=6.0, nep=38.0, rx_bandwidth=60.0, wg_loss=0.04, length=100.0)
r = budget(spec)
print(f"sensitivity {r.sensitivity_dbm} dBm, budget {r.budget_db} dB, path {r.path_loss_db} dB, margin {r.margin_db} dB")
for cm in (50, 100, 200, 300):
    m = budget(replace(spec, length=float(cm))).margin_db
    print(f"  {cm:4d} cm: margin {m:5.2f} dB")
