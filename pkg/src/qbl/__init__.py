"""Open-system simulator for the para-Benzene quantum battery."""

from .bath import BathSpec, MatsubaraResonanceError
from .config import RunConfig, parse_config
from .evolve import BathSet, Region, RegionSchedule, Trajectory, integrate, make_generator, run_protocol
from .generator import Environment, RedfieldGenerator, build_generator
from .model import ModelParams, build_hamiltonian, dark_density, dark_state, symmetry_operator
from .observables import ergotropy, report

__version__ = "0.1.0"

__all__ = [
    "BathSet", "BathSpec", "Environment", "MatsubaraResonanceError", "ModelParams", "RedfieldGenerator",
    "Region", "RegionSchedule", "RunConfig", "Trajectory", "build_generator", "build_hamiltonian",
    "dark_density", "dark_state", "ergotropy", "integrate", "make_generator", "parse_config", "report",
    "run_protocol", "symmetry_operator",
]
