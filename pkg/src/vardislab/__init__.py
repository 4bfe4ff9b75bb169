"""vardislab: beacon-carried variable dissemination, simulated and analysed."""

__version__ = "0.1.0"
