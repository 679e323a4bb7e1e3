"""
A week in closed loop
=====================

Run the full controller stack and the thermostat benchmark on the same
synthetic week, then compare them with the comparison-day method and look
at when each one buys its electricity.
"""

import warnings

import numpy as np

from hpmpc.evaluation import (
    day_records,
    peak_block_analysis,
    production_pattern,
    savings_report,
)
from hpmpc.plant import HpPlantConfig, run_closed_loop
from hpmpc.scenarios import synthetic_scenario

# %% Same weather and prices for both controllers
sc = synthetic_scenario(days=7, seed=7)
plant = HpPlantConfig(block_space_heating_only=True)
mpc = run_closed_loop(sc, "mpc", seed=1, plant=plant)
bench = run_closed_loop(sc, "benchmark", seed=1, plant=plant)
M, B = day_records(mpc), day_records(bench)

# %% Daily costs
print("day   benchmark EUR   mpc EUR   mean T_a")
for b, m in zip(B, M):
    print(f"{b.date[-3:]}   {b.cost:13.2f}   {m.cost:7.2f}   {b.mean_T_a:8.1f}")

# %% Comparison-day savings: each MPC day is priced against similar benchmark days
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    report = savings_report(M, B)
print({k: round(v, 3) if isinstance(v, float) else v for k, v in report.summary().items()})

# %% Where in the day the electricity goes
for name, days in (("benchmark", B), ("mpc", M)):
    share = production_pattern(days, use="E_HP")
    bars = "".join(" .:-=+*#%@"[min(9, int(s * 60))] for s in share)
    print(f"{name:>9} |{bars}|  peak 17-21: {share[17:21].sum():.1%}")

# %% How much of that would simply blocking the evening peak have earned?
pb = peak_block_analysis(B, M, report.reduction)
print(f"peak block alone: {pb.reduction:.2f} EUR, {pb.fraction_of_mpc:.0%} of the MPC reduction")
print(f"mean room temperature: benchmark {bench.hourly['T_r'].mean():.2f}, "
      f"mpc {mpc.hourly['T_r'].mean():.2f}, lowest mpc hour {np.min(mpc.hourly['T_r']):.2f}")
