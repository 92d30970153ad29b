"""slelab: numerics for Loewner evolution and critical lattice interfaces.

A laboratory for sampling discrete interface models (critical site
percolation on the triangular lattice, loop-erased walks, uniform spanning
trees, the harmonic explorer, the Ising interface), driving them through
chordal Loewner machinery, and estimating the classical observables:
diffusivity of the driving term, crossing probabilities, one-arm and pivotal
exponents, Fourier-Walsh spectra of crossing functions, and dynamical
(Poisson-resampled) percolation correlations.
"""

__version__ = "0.1.0"
