"""Decay rates of damped second-order systems versus their spectral abscissa."""
from .modal import (EnergyState, Frequencies, GeneratorMatrix, ModalDamping, StiffnessPerturbation, System,
                    assemble_generator, energy, undamped_eigenpairs)
from .families import (axial_force_stiffness, clamped_free_beam, constant_damping, hinged_beam,
                       indicator_damping, wave_string)
from .gaps import ContourRect, GapProfile, build_contours, check_A1, check_A2, compute_N0, gaps
from .spectrum import EigenSet, full_spectrum, spectral_abscissa
from .contour import projector, resolvent_apply
from .semigroup import evolve, fit_decay_rate, verify_main_theorem

__version__ = "0.1.0"

__all__ = [
    "EnergyState", "Frequencies", "GeneratorMatrix", "ModalDamping", "StiffnessPerturbation", "System",
    "assemble_generator", "energy", "undamped_eigenpairs",
    "axial_force_stiffness", "clamped_free_beam", "constant_damping", "hinged_beam", "indicator_damping",
    "wave_string",
    "ContourRect", "GapProfile", "build_contours", "check_A1", "check_A2", "compute_N0", "gaps",
    "EigenSet", "full_spectrum", "spectral_abscissa",
    "projector", "resolvent_apply",
    "evolve", "fit_decay_rate", "verify_main_theorem",
]
