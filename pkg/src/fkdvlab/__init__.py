"""fkdvlab: a pseudospectral laboratory for solitary waves of the
fractional KdV equation u_t - |D|^a u_x + (u^2)_x = 0.

Layers: spectral (grids, |D|^s, norms), groundstate (Petviashvili solver,
scaling, decay), evolution (integrating-factor RK4), modulation (the
decomposition u = sum Q_{c_j}(. - rho_j) + eta), localization (moving
weights, localized mass/energy, monotonicity audits), linearized
(spectrum and coercivity of |D|^a + c - 2Q_c), inequalities (weighted
commutator stress tests), nsoliton (the backward construction experiment).
"""

from .errors import FkdvError
from .spectral import Grid, SpectralField

__all__ = ["FkdvError", "Grid", "SpectralField"]
__version__ = "0.1.0"
