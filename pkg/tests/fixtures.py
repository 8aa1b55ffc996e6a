"""Frozen reference values.

Each constant records where it came from.  ``oracles.py`` regenerates the
independent ones; "same-grid" values were produced once by the package on the
stated grid and are frozen here so later changes cannot drift silently.
"""

import math

# --- closed forms ---------------------------------------------------------

#: N=1, p=3, omega=1: phi(x) = sqrt(2) sech(x), mass 4, energy -4/3
SOLITON_P3_AMPLITUDE = math.sqrt(2.0)
SOLITON_P3_MASS = 4.0
SOLITON_P3_ENERGY = -4.0 / 3.0

# --- N=1, p=7, omega=1 ----------------------------------------------------

#: radial conservative finite differences on [0, 12], M = 800 / 1600 and
#: Richardson extrapolation (oracles.py)
ORACLE_LAMBDA_P7 = 2.9050882
#: dense spectral assembly, L=25, n=1024 (same-grid)
LAMBDA_P7 = 2.905088378
#: |(Re chi)^perp| from the finite-difference oracle at M = 1600
ORACLE_PERP_NORM_P7 = 0.430908
#: same quantity on the spectral grid L=25, n=512 (same-grid)
PERP_NORM_P7 = 0.430883
#: |phi|_{L2} = (int sech(3x)^(2/3) 4^(1/3)) ^ (1/2)
PHI_NORM_P7 = 1.4919200

# --- N=2, p=5, omega=1 ----------------------------------------------------

#: collocation (solve_bvp) amplitudes phi(0) (oracles.py)
ORACLE_AMPLITUDES = {
    (2, 3.0): 2.2062008646,
    (2, 5.0): 2.0002899440,
    (3, 3.0): 4.3373876819,
}
#: radial finite-difference eigenvalue on [0, 15], M = 800 / 1600, extrapolated
ORACLE_LAMBDA_2D = 10.771882
#: iterative spectrum on the 128^2 box L=24 (same-grid; h=0.375 under-resolves
#: the localized mode, so this is far from the continuum value)
LAMBDA_2D_128 = 18.467107
#: same wave on 256^2, L=24 (same-grid)
LAMBDA_2D_256 = 11.045

# --- N=2 vortex m=1, p=5, omega=1, 128^2, L=24 ------------------------------

LAMBDA_VORTEX_128 = complex(8.370838, 4.891450)

# --- remainder constant C (100 random v, seed 0) --------------------------

#: max |h(v)|_{L2} / ((|v|_{H2} + |v|_{H2}^{r-2}) |v|_{H2}) on L=40, by n;
#: v = 10^U(-4,-1) times a unit-H2 mix of six Gaussian-cosine modes
REMAINDER_C = {
    3.0: {256: 0.079093, 512: 0.079078, 1024: 0.079078},
    7.0: {256: 1.07345, 512: 1.04604, 1024: 1.04603},
}
