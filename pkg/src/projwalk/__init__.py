"""Random matrix products on projective space: geometry, ensembles, Monte
Carlo estimators, transfer-operator discretizations and zero-one-law probes."""

from . import ensemble, montecarlo, projgeom, transferop
from .errors import ProjwalkError

__version__ = "0.1.0"
__all__ = ["projgeom", "ensemble", "montecarlo", "transferop", "ProjwalkError"]
