"""Bayesian single-factor graphical models."""
