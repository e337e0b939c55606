"""Demand-response scheduling for a surrogate air separation unit.

Compares two control architectures over one operating day of hourly
electricity prices: a direct RL agent commanding all plant inputs, and a
hierarchical agent commanding a single production setpoint tracked by a
linear MPC built on an identified plant model.
"""

__version__ = "0.1.0"
