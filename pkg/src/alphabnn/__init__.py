"""Model-based policy search with alpha-divergence-trained Bayesian neural
networks that take a stochastic input disturbance."""

__version__ = "0.1.0"
