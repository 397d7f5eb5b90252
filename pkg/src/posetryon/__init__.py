"""PoseTryOn — pose-aware video try-on diffusion at desk scale."""

__version__ = "0.1.0"
