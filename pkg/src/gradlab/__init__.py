"""Diffusion in image, gradient, and Laplacian domains, at desk scale.

The package is organized bottom-up: fields and rngs (field), image and raw
I/O (fieldio), differential operators (diffops), noise schedules (schedule),
Poisson solvers (poisson), forward/reverse diffusion (diffusion), noise
predictors and training (model), histogram/JSD analysis (analysis), and the
command-line front end (cli).
"""

from .field import Field, FieldStats, Rng, field_stats, new_field, sample_gaussian

__all__ = [
    "Field",
    "FieldStats",
    "Rng",
    "new_field",
    "sample_gaussian",
    "field_stats",
]

__version__ = "0.1.0"
