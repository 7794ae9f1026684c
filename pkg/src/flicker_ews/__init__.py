"""Deep-learning detection of flickering as an early warning of tipping points."""

__version__ = "0.1.0"
