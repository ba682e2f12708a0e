"""Shared session fixtures.

The marginal-mass sweep over the bundled 512x512 image costs tens of
seconds per domain, so it runs once here and is shared by the analysis
tests and the acceptance module.  Both bin counts are recorded in the same
pass so the binning-stability comparison sees identical states.
"""

import numpy as np
import pytest

from gradlab.analysis import default_range, histogram, mass_vector
from gradlab.assets import natural_image
from gradlab.diffusion import DomainKind, forward_closed_form, to_domain
from gradlab.field import Rng, sample_gaussian
from gradlab.schedule import default_schedule


@pytest.fixture(scope="session")
def natural():
    """The bundled texture image as a Field."""
    return natural_image()


@pytest.fixture(scope="session")
def marginal_masses(natural):
    """Per-domain histogram mass rows of every marginal state.

    For each domain the clean image is mapped into the domain once, a
    single unit-noise draw is shared across all timesteps (common random
    numbers, so domain comparisons are not confounded by independent noise
    realizations), and the closed-form marginal at every t = 0..T is
    histogrammed at 128 and at 256 bins.  Returns
    {domain: (mass_128, mass_256)} where each array has one mass vector
    per timestep.
    """
    s = default_schedule()
    out = {}
    for d in DomainKind:
        x0 = to_domain(natural, d)
        eps = sample_gaussian(x0.shape, 1.0, Rng(77))
        lo, hi = default_range(d)
        rows_128 = []
        rows_256 = []
        for t in range(s.T + 1):
            st = forward_closed_form(x0, t, eps, s, d)
            rows_128.append(mass_vector(histogram(st, 128, lo, hi)))
            rows_256.append(mass_vector(histogram(st, 256, lo, hi)))
        out[d] = (np.stack(rows_128), np.stack(rows_256))
    return out
