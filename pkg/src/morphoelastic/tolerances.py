"""Numerical tolerances used across the package.

Everything that decides pass/fail or solver termination lives here so that
the values can be audited in one place.
"""

# tensor algebra
EXP_SERIES_ABS = 1e-12  # |expm(A) - series| <= EXP_SERIES_ABS * (1 + e^|A|)
EXP_DET_REL = 1e-12  # det(expm(A)) vs e^{tr A}
EXP_INVERSE_ABS = 1e-10  # expm(A) @ expm(-A) vs Id, entrywise
DDERIV_FD_REL = 1e-5  # directional derivative of expm vs central differences
DDERIV_FD_STEP = 1e-6
GAUSS_POINTS = 8

# hyperelasticity
FRAME_REL = 1e-12
DW_FD_REL = 1e-6
GROWTH_INV_ABS = 1e-10

# finite elements / minimizer
GRAD_FD_REL = 1e-5
GRAD_FD_STEP = 1e-6
MIN_GTOL = 1e-8  # relative to the energy scale of the initial guess
MIN_STEP_FLOOR = 1e-16
MIN_MAX_ITER = 5000
LBFGS_MEMORY = 20
ARMIJO_C1 = 1e-4

# growth stepping
DET_IDENTITY_REL = 1e-10
LIP_SLACK = 1.01

# nutrient
CG_RTOL = 1e-12
LINEAR_RESIDUAL_REL = 1e-10
