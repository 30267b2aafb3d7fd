"""trajkit: quantum-trajectory simulations of monitored collective models.

Library layout:

* :mod:`trajkit.linops`       dense spin/boson operators and Fock truncation
* :mod:`trajkit.jump`         quantum-jump trajectory engine
* :mod:`trajkit.lindblad`     density-matrix oracle for trajectory averages
* :mod:`trajkit.models`       the three collective models and their mean field
* :mod:`trajkit.gaussian`     Gaussian-trajectory engine for bosonic lattices
* :mod:`trajkit.binned`       finite-time-resolution (binned) conditional evolution
* :mod:`trajkit.observables`  entropies, magnetizations, channel evaluation
* :mod:`trajkit.analysis`     smoothing, saturation fits, order parameters
* :mod:`trajkit.cli`          batch runner (`trajkit run/scan/fit/...`)
"""

__version__ = "0.1.0"

from .jump import ModelSpec, StateVector, run_ensemble, run_trajectory, step
from .lindblad import DensityMatrix, evolve_density_matrix, lindblad_rhs

__all__ = [
    "__version__",
    "ModelSpec",
    "StateVector",
    "step",
    "run_trajectory",
    "run_ensemble",
    "DensityMatrix",
    "lindblad_rhs",
    "evolve_density_matrix",
]
