"""Six-vertex model toolkit: Glauber dynamics, exact enumeration and the combinatorics behind slow mixing."""

__version__ = "0.1.0"
