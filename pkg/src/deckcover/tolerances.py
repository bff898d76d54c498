"""Shared numerical tolerances."""

GEOMETRY = 1e-9      # chart membership and point identification
QUADRATURE = 1e-9    # path integrals, glueing and period agreement
FINITE_DIFF = 1e-6   # finite-difference residuals
FD_STEP = 1e-6       # default finite-difference step

GL_ORDER = 5         # Gauss-Legendre nodes per polyline edge
SAMPLES = 64         # default samples per path
