"""Tests for synthetic fields and the bundled texture image."""

import numpy as np
import pytest

from gradlab.assets import (
    NATURAL_IMAGE_SEED,
    band_field,
    blob_dataset,
    make_natural_image,
    natural_image,
    smooth_field,
    two_blob_image,
)
from gradlab.field import ParameterError, Rng


class TestSmoothField:
    def test_unit_standard_deviation(self):
        f = smooth_field((64, 64, 1), 0.2, Rng(120))
        assert abs(float(f.data.std()) - 1.0) <= 1e-9

    def test_deterministic(self):
        a = smooth_field((16, 16, 1), 0.3, Rng(121))
        b = smooth_field((16, 16, 1), 0.3, Rng(121))
        assert np.array_equal(a.data, b.data)

    def test_rejects_bad_cutoff(self):
        with pytest.raises(ParameterError):
            smooth_field((8, 8, 1), 0.0, Rng(0))


class TestBandField:
    def test_unit_standard_deviation(self):
        arr = band_field(64, 64, 0.1, 0.03, Rng(122))
        assert arr.shape == (64, 64)
        assert abs(float(arr.std()) - 1.0) <= 1e-9

    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            band_field(8, 8, -0.1, 0.03, Rng(0))
        with pytest.raises(ParameterError):
            band_field(8, 8, 0.1, 0.0, Rng(0))


class TestBlobs:
    def test_two_blob_image_properties(self):
        img = two_blob_image(24, 24, Rng(123))
        assert img.shape == (24, 24, 1)
        assert float(img.data.min()) >= 0.0
        assert float(img.data.max()) <= 1.0
        assert np.array_equal(img.data, two_blob_image(24, 24, Rng(123)).data)

    def test_dataset_uses_child_streams(self):
        """Entries come from child streams, so the dataset reproduces and
        its members differ from each other."""
        ds = blob_dataset(4, 12, 12, Rng(124))
        again = blob_dataset(4, 12, 12, Rng(124))
        assert len(ds) == 4
        for a, b in zip(ds, again):
            assert np.array_equal(a.data, b.data)
        assert not np.array_equal(ds[0].data, ds[1].data)

    def test_rejects_empty_dataset(self):
        with pytest.raises(ParameterError):
            blob_dataset(0, 8, 8, Rng(0))


class TestNaturalImage:
    def test_shape_and_range(self, natural):
        assert natural.shape == (512, 512, 1)
        assert float(natural.data.min()) >= 5.0 / 255.0
        assert float(natural.data.max()) <= 250.0 / 255.0

    def test_bundled_file_matches_generator(self, natural):
        """The shipped PGM is exactly what make_natural_image produces, so
        the asset is reproducible from code alone."""
        made = make_natural_image(512, 512, NATURAL_IMAGE_SEED)
        assert np.array_equal(made.data, natural.data)

    def test_generator_is_deterministic(self):
        a = make_natural_image(64, 64, 7)
        b = make_natural_image(64, 64, 7)
        assert np.array_equal(a.data, b.data)

    def test_values_sit_on_the_8bit_grid(self, natural):
        scaled = natural.data * 255.0
        assert np.array_equal(scaled, np.rint(scaled))
