"""Pricing-panel pipeline and two-way fixed-effects event-study estimator."""

__version__ = "1.0.0"
