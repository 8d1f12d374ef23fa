"""Large-spin Heisenberg simulator for SO(4)-symmetric Rydberg n-manifolds."""

__version__ = "0.1.0"
