"""HTTP service wrapping the core package."""

from .app import app  # noqa: F401
