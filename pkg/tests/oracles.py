"""Closed-form reference values, fixed before the numerics were run."""

import numpy as np
from scipy.special import ellipe

# ellipse used throughout: semi-axes a = 1, b = 0.8
A, B = 1.0, 0.8
R0_ELLIPSE = np.sqrt(A ** 2 + B ** 2)                      # sqrt(1.64)
MU2_ELLIPSE = -(A ** 2 - B ** 2) / (A ** 2 + B ** 2)       # mu = MU2 cos 2psi
PERIMETER_ELLIPSE = 4.0 * A * ellipe(1.0 - (B / A) ** 2)
LAMBDA0_ELLIPSE = np.arctanh(B / A)                         # log 3 for (1, 0.8)
FOCAL_C0 = np.sqrt(A ** 2 - B ** 2)                         # 0.6

# circle of unit perimeter, R = 1 / (2 pi)
R_UNIT = 1.0 / (2.0 * np.pi)
ALPHA0_CIRCLE = 1.0 / np.pi
SQUARE_ACTION = -2.0 * np.sqrt(2.0) / np.pi                 # -0.9003163161571061


def circle_chord_action(delta):
    """``A_0`` on the unit-perimeter circle for forward displacement ``delta``."""
    return -np.sin(np.pi * np.asarray(delta)) / np.pi


# M_{1,2} on the ellipse: two traversals of a diameter through x
M12_MIN = -4.0 * A
M12_MAX = -4.0 * B

# W(0.1 cos 3psi) = 2 pi (81 - 36) * 2 * 0.05^2
WIRTINGER_COS3 = 0.45 * np.pi
