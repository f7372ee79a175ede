"""Spectral laboratory for Navier-Stokes type equations on differential forms."""
__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .exterior import GridForm, SpectralForm, MultiIndexTable, d, d_star, hodge_star, laplacian, wedge  # noqa: E402
from .potentials import HeatParams, Trajectory, leray_project, phi_inverse_d  # noqa: E402
from .nonlinearity import NonlinearitySpec, apply_B, apply_N, builtin  # noqa: E402
from .spaces import NormParams, NormReport  # noqa: E402
from .solver import ProblemSpec, SolveResult, Status, picard_solve  # noqa: E402
