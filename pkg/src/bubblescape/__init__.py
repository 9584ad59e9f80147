"""Concentration landscapes and blow-up rate prediction on CSG domains.

The package computes the exterior inverse-power landscape of a domain, its
critical points, and the reduced-energy expansions that govern bubble
concentration for near-critical elliptic problems with indefinite weight:

* :mod:`bubblescape.geometry` - CSG solids, boundary queries, perturbations;
* :mod:`bubblescape.quadrature` - singular exterior quadrature;
* :mod:`bubblescape.landscape` - dimensional constants and reduced energies;
* :mod:`bubblescape.bubbles` - bubble ansatz, linearization checks, energies;
* :mod:`bubblescape.critpoints` - minima, mountain passes, Morse audits;
* :mod:`bubblescape.cli` - reproducible command-line workflows.
"""

from .errors import ConvergenceError, PreconditionError

__version__ = "0.1.0"

__all__ = ["ConvergenceError", "PreconditionError", "__version__"]
