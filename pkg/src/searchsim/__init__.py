"""Active multi-target search: SMC-PHD filtering, waypoint planners, and a cloned CNN policy."""

__version__ = "0.1.0"
