"""
One day-ahead heating plan
==========================

Build a synthetic winter day, solve the supervisory mixed-integer problem
once from a comfortable starting state, and print the hourly plan next to
the buy price.  The cheap night hours fill up and the evening peak stays
empty.
"""

import numpy as np

from hpmpc.building import discretize, disturbance_vector, steady_state
from hpmpc.efficiency import APPENDIX_B_FITS
from hpmpc.scenarios import synthetic_scenario
from hpmpc.supervisory import (
    MiocpSpec,
    build_miocp,
    heat_budget,
    solve_branch_and_bound,
    validate_solution,
)

# %% A scenario: weather, spot prices and household load for one day
sc = synthetic_scenario(days=1, seed=7)
N = 24
w = sc.forecast
buy, sell = sc.buy()[:N], sc.sell()[:N]

# %% The planning problem uses the hourly house model and the efficiency curve
spec = MiocpSpec(
    N, discretize(sc.house, 3600.0), APPENDIX_B_FITS["2023-01-27"], buy, sell,
    disturbance_vector(w.T_a[:N], w.I_dir[:N], w.cloud[:N]),
    sc.comfort.T_ref, sc.comfort.c_cmf,
    P_pv=sc.pv_forecast()[:N], P_app=sc.P_app[:N],
)
x0 = steady_state(sc.house, sc.house.U_a * (22.0 - w.T_a[0]), [w.T_a[0], 0.0, 0.0])
mip = build_miocp(spec, x0, t0=0)
sol = solve_branch_and_bound(mip, gap_tol=1e-4)
check = validate_solution(spec, x0, 0, sol)
print(f"status {sol.status}, {sol.nodes} nodes, objective {sol.objective:.3f} EUR, "
      f"validator {'ok' if check.ok else check.violations}")

# %% Hourly plan
print("hour  buy EUR/kWh  on  P_hp W  heat Wh  T_room")
for k in range(N):
    print(f"{k:4d}  {buy[k]:11.3f}  {int(sol.delta[k]):2d}  {sol.P_hp[k]:6.0f}  "
          f"{heat_budget(sol)[k]:7.0f}  {sol.T_r[k + 1]:6.2f}")

peak = sol.P_hp[17:21].sum()
print(f"planned compressor power in 17:00-21:00: {peak:.0f} W")
print(f"mean price paid {np.average(buy, weights=sol.P_hp + 1e-9):.3f} vs day mean {buy.mean():.3f}")
