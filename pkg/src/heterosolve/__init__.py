"""heterosolve: distributed linear-system solvers, angular heterogeneity
metrics, convergence-rate bounds, and Monte-Carlo experiment harness."""

__version__ = "0.1.0"
