"""
Dynamic plant versus rigid kinematics
=====================================

The dynamic plant hangs a point mass on two elastic, tension-only cables.
The ideal plant puts the effector exactly where the servo axis lengths say.
Over a direct connection the difference between the two is the price of
elasticity and gravity sag.
"""

import numpy as np

from cdpr import reference_robot
from cdpr.netloop import run_experiment
from cdpr.plant import PlantConfig
from cdpr.trajectory import plan_square

robot = reference_robot()

for speed in (100, 1000):
    plan = plan_square((750, 850), 200, speed)
    dyn = run_experiment(robot, plan, plant_cfg=PlantConfig(mode="dynamic")).arrays()
    ideal = run_experiment(robot, plan, plant_cfg=PlantConfig(mode="ideal")).arrays()
    gap = np.hypot(*(dyn["meas"] - ideal["meas"]).T)
    sag = np.nanmean(ideal["meas"][:, 1] - dyn["meas"][:, 1])
    print(f"{speed:>5} mm/s: max gap {np.nanmax(gap):.3f} mm, mean sag {sag:.3f} mm, "
          f"peak tension {np.nanmax(dyn['tensions']):.2f} N")
