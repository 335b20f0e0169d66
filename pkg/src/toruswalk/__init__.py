"""Random walks on the discrete torus: exact solvers, Monte Carlo engine and experiments."""
__version__ = "0.1.0"

from .steps import (StepDistribution, DistributionError, build_srw, build_lazy_srw,  # noqa: F401
                    build_poisson_jump, build_custom)
from .geometry import Region, TorusPoint, disc, annulus, disc_complement, project  # noqa: F401
