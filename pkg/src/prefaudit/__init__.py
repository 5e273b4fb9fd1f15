"""Self-preferencing audit toolkit.

Computes a platform-wide search-visibility index from keyword-rank logs,
fits two-way fixed-effects Poisson panel regressions with two-way clustered
standard errors, runs the conditioning-on-observables and outcome-based
self-preferencing tests plus their robustness battery, and ships a synthetic
marketplace generator with known ground truth for verification.
"""

__version__ = "0.1.0"
