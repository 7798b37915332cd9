"""Config-driven experiment runner."""
from .main import main

__all__ = ["main"]
