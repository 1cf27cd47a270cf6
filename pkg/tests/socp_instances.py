"""Hand-derived SOCP regression instances with known solutions.

Each instance carries its closed-form optimum (worked out on paper; the
derivation is sketched in the comment above each builder).  The set doubles
as the solver regression suite: every `optimal` instance must be solved to a
KKT residual of at most 1e-6, every `infeasible` one must be flagged.
"""

from collections import namedtuple

import numpy as np

from cfisac.socp import SocpProblem

Instance = namedtuple(
    "Instance", "name problem expected_status expected_objective expected_x"
)

_SQ2 = np.sqrt(2.0)
_SQ3 = np.sqrt(3.0)

INSTANCES = []


def _add(name, problem, status, objective=None, x=None):
    INSTANCES.append(Instance(name, problem, status, objective, x))


# 1. min x1 s.t. ||(x1, x2)|| <= 1: optimum at (-1, 0), value -1.
_add(
    "ball_min_coord",
    SocpProblem(2, objective=[1.0, 0.0],
                soc_constraints=[(np.eye(2), np.zeros(2), np.zeros(2), 1.0)]),
    "optimal", -1.0, np.array([-1.0, 0.0]),
)

# 2. min x + y s.t. ||(x, y)|| <= 1: optimum at -(1,1)/sqrt(2), value -sqrt(2).
_add(
    "ball_sum",
    SocpProblem(2, objective=[1.0, 1.0],
                soc_constraints=[(np.eye(2), np.zeros(2), np.zeros(2), 1.0)]),
    "optimal", -_SQ2, -np.ones(2) / _SQ2,
)

# 3. min c.x s.t. ||x - p|| <= r  has optimum c.p - r||c|| at p - r c/||c||.
#    c = (1, 2), p = (3, 4), r = 2:  value 11 - 2 sqrt(5).
_add(
    "shifted_ball",
    SocpProblem(2, objective=[1.0, 2.0],
                soc_constraints=[(np.eye(2), [-3.0, -4.0], np.zeros(2), 2.0)]),
    "optimal", 11.0 - 2.0 * np.sqrt(5.0),
    np.array([3.0, 4.0]) - 2.0 * np.array([1.0, 2.0]) / np.sqrt(5.0),
)

# 4. Same family: c = (-1, 1, 2), p = (1, 0, -1), r = 1/2: value -3 - sqrt(6)/2.
_add(
    "shifted_ball_3d",
    SocpProblem(3, objective=[-1.0, 1.0, 2.0],
                soc_constraints=[(np.eye(3), [-1.0, 0.0, 1.0], np.zeros(3), 0.5)]),
    "optimal", -3.0 - 0.5 * np.sqrt(6.0),
    np.array([1.0, 0.0, -1.0]) - 0.5 * np.array([-1.0, 1.0, 2.0]) / np.sqrt(6.0),
)

# 5. LP box: min -x - 2y s.t. x <= 1, y <= 1, x, y >= 0: value -3 at (1, 1).
_add(
    "lp_box",
    SocpProblem(2, objective=[-1.0, -2.0],
                linear_inequalities=[([1.0, 0.0], 1.0), ([0.0, 1.0], 1.0)],
                nonneg_mask=[True, True]),
    "optimal", -3.0, np.ones(2),
)

# 6. LP infeasible: x >= 2 while x + y <= 1 and y >= 0 forces x <= 1.
_add(
    "lp_infeasible",
    SocpProblem(2,
                linear_inequalities=[([-1.0, 0.0], -2.0), ([1.0, 1.0], 1.0)],
                nonneg_mask=[False, True]),
    "infeasible",
)

# 7. 1-D contradiction: x >= 1 and x <= 0.
_add(
    "interval_infeasible",
    SocpProblem(1, linear_inequalities=[([-1.0], -1.0), ([1.0], 0.0)]),
    "infeasible",
)

# 8. Distance epigraph: min t s.t. ||(x-1, y-1)|| <= t, x <= 0, y <= 0.
#    Closest feasible point to (1,1) is (0,0): value sqrt(2).
_add(
    "epigraph_distance",
    SocpProblem(
        3, objective=[0.0, 0.0, 1.0],
        soc_constraints=[(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                          [-1.0, -1.0], [0.0, 0.0, 1.0], 0.0)],
        linear_inequalities=[([1.0, 0.0, 0.0], 0.0), ([0.0, 1.0, 0.0], 0.0)],
    ),
    "optimal", _SQ2, np.array([0.0, 0.0, _SQ2]),
)

# 9. Scalar epigraph: min t s.t. |x - 2| <= t, x >= 3: value 1 at x = 3.
_add(
    "epigraph_abs",
    SocpProblem(
        2, objective=[0.0, 1.0],
        soc_constraints=[(np.array([[1.0, 0.0]]), [-2.0], [0.0, 1.0], 0.0)],
        linear_inequalities=[([-1.0, 0.0], -3.0)],
    ),
    "optimal", 1.0, np.array([3.0, 1.0]),
)

# 10. Cone with affine right side: |x| <= 0.5 + 0.5 x holds iff x in [-1/3, 1]
#     (left branch: -x <= 0.5 + 0.5x -> x >= -1/3).  min x: value -1/3.
_add(
    "affine_cone_min",
    SocpProblem(1, objective=[1.0],
                soc_constraints=[(np.array([[1.0]]), [0.0], [0.5], 0.5)]),
    "optimal", -1.0 / 3.0, np.array([-1.0 / 3.0]),
)

# 11. Same cone, maximize x (min -x): value -1 at x = 1.
_add(
    "affine_cone_max",
    SocpProblem(1, objective=[-1.0],
                soc_constraints=[(np.array([[1.0]]), [0.0], [0.5], 0.5)]),
    "optimal", -1.0, np.array([1.0]),
)

# 12. 3-4-5 triangle: max x s.t. ||(x, y)|| <= 5, y >= 3: x = 4 at y = 3.
_add(
    "pythagoras",
    SocpProblem(2, objective=[-1.0, 0.0],
                soc_constraints=[(np.eye(2), np.zeros(2), np.zeros(2), 5.0)],
                linear_inequalities=[([0.0, -1.0], -3.0)]),
    "optimal", -4.0, np.array([4.0, 3.0]),
)

# 13. Two intervals: |x+1| <= 2 gives [-3, 1], |x-3| <= 3 gives [0, 6];
#     intersection [0, 1].  max x: value -1 at x = 1.
_add(
    "two_intervals",
    SocpProblem(1, objective=[-1.0],
                soc_constraints=[
                    (np.array([[1.0]]), [1.0], [0.0], 2.0),
                    (np.array([[1.0]]), [-3.0], [0.0], 3.0),
                ]),
    "optimal", -1.0, np.array([1.0]),
)

# 14. Cone vs linear contradiction: |x| <= 1 and x >= 2.
_add(
    "cone_infeasible",
    SocpProblem(1,
                soc_constraints=[(np.array([[1.0]]), [0.0], [0.0], 1.0)],
                linear_inequalities=[([-1.0], -2.0)]),
    "infeasible",
)

# 15. min x + y + z s.t. ||(x,y,z)|| <= sqrt(3): value -3 at (-1,-1,-1).
_add(
    "ball3_sum",
    SocpProblem(3, objective=np.ones(3),
                soc_constraints=[(np.eye(3), np.zeros(3), np.zeros(3), _SQ3)]),
    "optimal", -3.0, -np.ones(3),
)

# 16. Mixed: min -x - y s.t. x + y <= 2, |x - y| <= 1, x, y >= 0:
#     the budget binds at (1, 1), value -2.
_add(
    "box_cone_mix",
    SocpProblem(2, objective=[-1.0, -1.0],
                soc_constraints=[(np.array([[1.0, -1.0]]), [0.0],
                                  np.zeros(2), 1.0)],
                linear_inequalities=[([1.0, 1.0], 2.0)],
                nonneg_mask=[True, True]),
    "optimal", -2.0, np.ones(2),
)

# 17. ||(2x, y)|| <= y + 2 squares to 4x^2 <= 4y + 4, i.e. x^2 <= y + 1.
#     With y <= 3: max x = 2 at y = 3, value -2.
_add(
    "parabola_cap",
    SocpProblem(2, objective=[-1.0, 0.0],
                soc_constraints=[(np.array([[2.0, 0.0], [0.0, 1.0]]),
                                  np.zeros(2), [0.0, 1.0], 2.0)],
                linear_inequalities=[([0.0, 1.0], 3.0)]),
    "optimal", -2.0, np.array([2.0, 3.0]),
)

# 18. Ellipse: min 3x + 4y s.t. ||(x, 2y)|| <= 2.  With u = x, v = 2y this is
#     min 3u + 2v over ||(u,v)|| <= 2: value -2 sqrt(13).
_add(
    "weighted_ball",
    SocpProblem(2, objective=[3.0, 4.0],
                soc_constraints=[(np.diag([1.0, 2.0]), np.zeros(2),
                                  np.zeros(2), 2.0)]),
    "optimal", -2.0 * np.sqrt(13.0),
    np.array([-6.0 / np.sqrt(13.0), -2.0 / np.sqrt(13.0)]),
)

# 19. Redundant cones: |x| <= 2 and |x| <= 1, max x: value -1.
_add(
    "redundant_cones",
    SocpProblem(1, objective=[-1.0],
                soc_constraints=[
                    (np.array([[1.0]]), [0.0], [0.0], 2.0),
                    (np.array([[1.0]]), [0.0], [0.0], 1.0),
                ]),
    "optimal", -1.0, np.array([1.0]),
)

# 20. One-sided LP: min x s.t. x >= -4 (written -x <= 4): value -4.
_add(
    "one_sided_lp",
    SocpProblem(1, objective=[1.0],
                linear_inequalities=[([-1.0], 4.0)]),
    "optimal", -4.0, np.array([-4.0]),
)

# 21. Zero-row cone degenerates to the linear inequality 0 <= c.x + d:
#     min x s.t. 0 <= x + 2: value -2.
_add(
    "zero_row_cone",
    SocpProblem(1, objective=[1.0],
                soc_constraints=[(np.zeros((0, 1)), np.zeros(0), [1.0], 2.0)]),
    "optimal", -2.0, np.array([-2.0]),
)

# 22. Simplex corner: min -2x - 3y - z s.t. x + y + z <= 1, x, y, z >= 0:
#     value -3 at (0, 1, 0).
_add(
    "simplex_corner",
    SocpProblem(3, objective=[-2.0, -3.0, -1.0],
                linear_inequalities=[(np.ones(3), 1.0)],
                nonneg_mask=[True, True, True]),
    "optimal", -3.0, np.array([0.0, 1.0, 0.0]),
)

# 23. Shifted epigraph with offset b in the cone: min t s.t.
#     ||(x + 3,)|| <= t + 1, x >= 0, t >= 0: best is x = 0, t = 2.
_add(
    "offset_epigraph",
    SocpProblem(2, objective=[0.0, 1.0],
                soc_constraints=[(np.array([[1.0, 0.0]]), [3.0],
                                  [0.0, 1.0], 1.0)],
                nonneg_mask=[True, True]),
    "optimal", 2.0, np.array([0.0, 2.0]),
)

# 24. Two balls with a single common point region: ||x - 0|| <= 2 and
#     ||x - 3|| <= 2 intersect in [1, 2]; min x: value 1.
_add(
    "lens_min",
    SocpProblem(1, objective=[1.0],
                soc_constraints=[
                    (np.array([[1.0]]), [0.0], [0.0], 2.0),
                    (np.array([[1.0]]), [-3.0], [0.0], 2.0),
                ]),
    "optimal", 1.0, np.array([1.0]),
)


# Feasibility-phase instances: expected minimal shared slack.
SlackInstance = namedtuple("SlackInstance", "name problem expected_slack")

SLACK_INSTANCES = [
    # x >= 1 and x <= 0 both relax by t; the midpoint x = 1/2 needs t = 1/2.
    SlackInstance(
        "half_slack",
        SocpProblem(1, linear_inequalities=[([-1.0], -1.0), ([1.0], 0.0)]),
        0.5,
    ),
    # x >= 3 and x <= 1: gap 2, shared slack 1 at x = 2.
    SlackInstance(
        "unit_slack",
        SocpProblem(1, linear_inequalities=[([-1.0], -3.0), ([1.0], 1.0)]),
        1.0,
    ),
    # Feasible box 0 <= x <= 1: slack 0.
    SlackInstance(
        "feasible_box",
        SocpProblem(1, linear_inequalities=[([1.0], 1.0)],
                    nonneg_mask=[True]),
        0.0,
    ),
    # |x| <= 1 vs x >= 2: relaxed cones |x| <= 1 + t and x >= 2 - t meet
    #  when 1 + t >= 2 - t, so t = 1/2 at x = 3/2.
    SlackInstance(
        "cone_half_slack",
        SocpProblem(1,
                    soc_constraints=[(np.array([[1.0]]), [0.0], [0.0], 1.0)],
                    linear_inequalities=[([-1.0], -2.0)]),
        0.5,
    ),
]
