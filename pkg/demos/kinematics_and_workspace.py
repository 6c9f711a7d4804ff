"""
Kinematics, statics and the static workspace
============================================

Cable lengths for a pose, the pose back from the lengths, the tensions that
hold the effector against gravity, and a coarse picture of where those
tensions stay within limits.
"""

import numpy as np

from cdpr import (forward_kinematics_closed, inverse_kinematics, is_feasible, reference_robot,
                  solve_tensions, workspace_scan)

robot = reference_robot()
print("anchors:", robot.anchor_array.tolist())
print("attachments:", robot.attachments.tolist())

# centre of the frame: both cables at 45 degrees
lengths = inverse_kinematics(robot, (750, 750))
print("IK(750, 750) =", lengths.round(4))
print("FK back      =", forward_kinematics_closed(robot, lengths))

# the symmetric pose shares the weight equally; moving left shifts load to cable 1
for pose in [(750, 750), (600, 800), (750, 1435), (-200, 700)]:
    ok, t = is_feasible(robot, pose)
    print(f"{pose}: tensions {np.round(t, 3)} N -> {'feasible' if ok else 'infeasible'}")

# a 50 mm scan is enough to see the shape
wmap = workspace_scan(robot, spacing=50)
for row in wmap.feasible[::-1]:
    print("".join("#" if f else "." for f in row))
print(f"{wmap.feasible_count} of {wmap.feasible.size} nodes feasible")

# tension grows without bound as the cables flatten near the top edge
for y in (1000, 1300, 1400, 1430):
    print(y, solve_tensions(robot, (750, y)).round(2))
