"""Bayesian graph convolutional networks sampled by tempered Langevin MCMC."""

__version__ = "0.1.0"
