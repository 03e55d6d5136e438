"""
A synthetic robot that heats up
===============================

Joint torques drive a first-order thermal model per motor. This script
generates one composite torque profile, simulates the seven motor
temperatures and shows which joints heat the most.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from jointtherm.plant import (DEFAULT_TORQUE_AMPLITUDE, default_joint_params, generate_torque_profile, simulate_plant,
                              steady_state_temperature)

# Every joint gets its own R, C and k. Joints 2 and 4 carry the largest
# loads, so they are given the largest heating.
params = default_joint_params()
for j, (p, amp) in enumerate(zip(params, DEFAULT_TORQUE_AMPLITUDE), start=1):
    rise = steady_state_temperature(p, amp) - p.ambient_temperature
    print(f"motor {j}: time constant {p.time_constant:5.1f} s, "
          f"steady rise at full torque ({amp:g} N m) {rise:4.2f} degC")

# A composite profile switches between holds, ramps, random walks,
# sinusoids and rest periods at random instants.
torques = generate_torque_profile("composite", seed=7, duration=600.0, dt=1.0)
print("regime switches at samples", torques.breaks)

temps = simulate_plant(params, torques)
rise = temps.values.max(axis=0) - 22.0
print("peak rise per motor [degC]:", np.round(rise, 2))
print("hottest motors:", sorted(int(j) + 1 for j in np.argsort(rise)[-2:]))

fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
for j in (1, 3):
    axes[0].plot(torques.time, torques.values[:, j], label=f"motor {j + 1}")
    axes[1].plot(temps.time, temps.values[:, j], label=f"motor {j + 1}")
axes[0].set_ylabel("torque [N m]")
axes[1].set_ylabel("temperature [°C]")
axes[1].set_xlabel("time [s]")
axes[0].legend()
fig.tight_layout()
fig.savefig("thermal_plant.svg", metadata={"Date": None})
print("wrote thermal_plant.svg")
