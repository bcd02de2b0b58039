"""Secret-key-rate lower bounds for qubit QKD protocols with imperfect sources.

Subpackages:
  gmath      G+/G- sandwich functions and binary entropy
  source     device model: phases, side-channel weights, protocol probabilities
  coeffs     virtual-state decomposition coefficients and their upper bounds
  bounds     phase-error bound, per-tag variants and key-rate assembly
  simulator  honest-channel simulation (exact and Monte Carlo) and truth oracle
  cli        sweep / simulate / bound command-line interface
"""

__version__ = "0.1.0"
