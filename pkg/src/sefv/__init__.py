"""Finite-volume solver for the stochastic barotropic Euler equations on periodic grids."""

from .ensemble import EnsembleSpec, cesaro_study, convergence_study, coupled_refinement_run, run_ensemble
from .errors import SefvError
from .mesh import Mesh, build_mesh
from .noise import NoiseModel, build_noise
from .physics import EosParams, State
from .problems import SineWave
from .persist import load, persist
from .scheme import SchemeConfig, Trajectory, init_from_functions, run

__all__ = [
    "EnsembleSpec",
    "EosParams",
    "Mesh",
    "NoiseModel",
    "SchemeConfig",
    "SefvError",
    "SineWave",
    "State",
    "Trajectory",
    "build_mesh",
    "build_noise",
    "cesaro_study",
    "convergence_study",
    "coupled_refinement_run",
    "init_from_functions",
    "load",
    "persist",
    "run",
    "run_ensemble",
]
__version__ = "0.1.0"
