"""Path-integral simulation of measurements distributed in time.

Modules
-------
core        grids, potentials, wave functions, trajectories
classical   classical paths, actions, semiclassical prefactors
pathint     grid propagation, lattice path sums, kicks and filters
scatter     probe scattering and the joint record amplitude
nslit       N-slit interference with which-path detectors
records     record sampling, statistics and redundancy
validation  built-in acceptance checks
"""
__version__ = "0.1.0"
