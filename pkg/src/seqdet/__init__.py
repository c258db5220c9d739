"""Channel-aware decentralized sequential detection: simulation and KL analysis."""

__version__ = "0.1.0"
