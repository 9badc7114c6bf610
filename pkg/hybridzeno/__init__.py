"""hybridzeno - Simulation and stability analysis of Zeno solutions to hybrid systems."""

__version__ = "0.1.0"
