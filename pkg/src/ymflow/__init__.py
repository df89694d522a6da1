"""Pseudospectral gauge-field heat flows on the unit 3-torus.

Samples Gaussian-free-field-like random connections, regularizes them with
the Yang-Mills / DeTurck heat flows, and measures regularized Wilson loop
observables, with exact U(1) formulas available as cross-checks.
"""

from .groups import GroupSpec, U1, SU2

__all__ = ["GroupSpec", "U1", "SU2"]

__version__ = "0.1.0"
