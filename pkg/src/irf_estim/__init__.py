"""Phase estimation from interference power fringes on a sensing RIS."""

__version__ = "0.1.0"
