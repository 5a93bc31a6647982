"""Mini-batch SGD with heavy-tailed gradient noise: simulation, limit laws and numerical checks."""

from __future__ import annotations

__version__ = "0.1.0"
