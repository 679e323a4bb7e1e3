"""
Fitting the three models
========================

Identify the house, the heat-pump efficiency curve and the PV model from
the bundled synthetic measurement sets, and compare with the values used to
generate them.
"""

import numpy as np

from hpmpc.building import fit_thermal_params
from hpmpc.efficiency import APPENDIX_B_FITS, fit_efficiency, heat_from_power
from hpmpc.forecasting import WeatherSeries, fit_pv_model
from hpmpc.sample_data import house_samples, hp_samples, pv_samples
from hpmpc.scenarios import DEFAULT_HOUSE, DEFAULT_PV

# %% Heat-pump efficiency: heat output as a function of electric power
s = hp_samples(seed=0)
fit = fit_efficiency(s)
truth = APPENDIX_B_FITS["2023-01-27"]
grid = np.linspace(300, 2500, 5)
print(f"efficiency fit R2 {fit.r2:.4f}, forward temperature {fit.T_F_bar:.1f} C")
for P in grid:
    print(f"  P {P:6.0f} W  fitted {heat_from_power(P, 0.0, fit):6.0f} W  "
          f"true {heat_from_power(P, 0.0, truth):6.0f} W")

# %% The same data with a handful of gross outliers, fitted robustly
bad = dict(s)
bad["Q_hp"] = s["Q_hp"].copy()
bad["Q_hp"][::25] *= 0.3
robust = fit_efficiency(bad, robust=True, seed=1)
plain = fit_efficiency(bad)
err = lambda f: np.max(np.abs(heat_from_power(grid, 0.0, f) - heat_from_power(grid, 0.0, truth)))  # noqa: E731
print(f"with outliers: plain fit off by {err(plain):.0f} W, robust fit by {err(robust):.0f} W")

# %% House: six thermal parameters from a gappy room-temperature log
h = house_samples(seed=0)
th = fit_thermal_params(h)
print("house parameter  fitted      true")
for name, a, b in zip(("C_r", "C_f", "U_r", "U_a", "g_s1", "g_s2"),
                      th.params.as_array(), DEFAULT_HOUSE.as_array()):
    print(f"  {name:5s}  {a:14.4g}  {b:10.4g}")
print("prediction RMSE by horizon (5-min steps):", {k: round(v, 3) for k, v in th.rmse.items()})

# %% PV: linear in clear-sky and raw irradiance
p = pv_samples(seed=0)
pv = fit_pv_model(WeatherSeries(p["time"], p["T_a"], p["I_dir"], p["cloud"]), p["P_pv"])
print("PV model", pv, "generator", DEFAULT_PV)
