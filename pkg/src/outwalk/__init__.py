"""outwalk: exact free-group algebra and reproducible random-walk experiments
on automorphism groups and their tree models."""

__version__ = "0.1.0"
