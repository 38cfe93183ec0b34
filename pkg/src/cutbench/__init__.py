"""Benchmarking suite for quantum MaxCut solvers.

Provides weighted Ising/MaxCut instance tooling with exhaustive ground-truth
oracles, measurement-feedback coherent Ising machine simulators (continuous
SDE and discrete-map Gaussian models), exact statevector simulation of
annealing-schedule alternating-operator circuits, a Monte Carlo emulator of
Grover-based quantum minimum finding with analytic circuit cost models, and
the shared success-probability / time-to-solution statistics and scaling-law
regressions used to compare them.
"""

__version__ = "0.1.0"
