"""End-to-end tests of the command-line front end (invoked in-process)."""

import json
import os

import numpy as np
import pytest

from gradlab.assets import make_natural_image
from gradlab.cli import main
from gradlab.diffusion import DomainKind, to_domain
from gradlab.field import ParameterError
from gradlab.fieldio import read_pgm, read_raw, write_pgm


def _read_json(path):
    with open(path) as f:
        return json.load(f)


def _small_image(tmp_path, side=24, seed=3):
    img = make_natural_image(side, side, seed)
    path = str(tmp_path / "input.pgm")
    write_pgm(path, img)
    return img, path


class TestVarianceCheck:
    def test_passes_and_writes_report(self, tmp_path):
        out = str(tmp_path / "runs")
        rc = main(["variance-check", "--size", "512", "--out", out])
        assert rc == 0
        run = os.path.join(out, "variance-check-seed0")
        report = _read_json(os.path.join(run, "variance_check.json"))
        assert report["pass"] is True
        assert abs(report["measured_gradient_ratio"] - 2.0) <= 0.04
        assert abs(report["measured_laplacian_ratio"] - 1.25) <= 0.025
        config = _read_json(os.path.join(run, "config.json"))
        assert config["command"] == "variance-check"
        assert config["size"] == 512


class TestConfigResolution:
    def test_flags_override_config_file(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"seed": 7, "bins": 32, "size": 64}))
        out = str(tmp_path / "runs")
        rc = main(
            [
                "variance-check",
                "--config",
                str(conf),
                "--seed",
                "9",
                "--out",
                out,
            ]
        )
        assert rc == 0
        resolved = _read_json(os.path.join(out, "variance-check-seed9", "config.json"))
        assert resolved["seed"] == 9
        assert resolved["bins"] == 32
        assert resolved["size"] == 64

    def test_unknown_config_key_rejected(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"sigma_typo": 2.0}))
        with pytest.raises(ParameterError):
            main(["variance-check", "--config", str(conf)])

    def test_unknown_domain_rejected(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"domain": "wavelet"}))
        with pytest.raises(ParameterError):
            main(["train-sample", "--config", str(conf)])


class TestConverge:
    def test_snapshots_and_reports(self, tmp_path):
        img, path = _small_image(tmp_path)
        out = str(tmp_path / "runs")
        main(
            [
                "converge",
                "--image",
                path,
                "--T",
                "60",
                "--bins",
                "32",
                "--timesteps",
                "0,30",
                "--out",
                out,
            ]
        )
        run = os.path.join(out, "converge-seed0")
        summary = _read_json(os.path.join(run, "summary.json"))
        assert set(summary["domains"]) == {"image", "gradient", "laplacian"}
        for name in summary["domains"]:
            assert os.path.exists(os.path.join(run, f"jsd_{name}.csv"))
            assert os.path.exists(os.path.join(run, f"jsd_matrix_{name}.csv"))
            stats = summary["domains"][name]
            assert 0 <= stats["t_converge"] <= 60

        domains = {
            "image": DomainKind.IMAGE,
            "gradient": DomainKind.GRADIENT,
            "laplacian": DomainKind.LAPLACIAN,
        }
        for name, d in domains.items():
            snap = os.path.join(run, f"snapshots_{name}", "state_0000.raw")
            state = read_raw(snap)
            assert np.array_equal(state.data, to_domain(img, d).data)
            manifest = _read_json(
                os.path.join(run, f"snapshots_{name}", "manifest.json")
            )
            assert manifest["timesteps"] == [0, 30]
            assert manifest["schedule"]["T"] == 60
        clean_pgm = os.path.join(run, "snapshots_image", "state_0000.pgm")
        assert np.array_equal(read_pgm(clean_pgm).data, img.data)

    def test_reruns_are_byte_identical(self, tmp_path):
        _, path = _small_image(tmp_path)
        outs = [str(tmp_path / "a"), str(tmp_path / "b")]
        for out in outs:
            main(
                [
                    "converge",
                    "--image",
                    path,
                    "--T",
                    "40",
                    "--bins",
                    "16",
                    "--timesteps",
                    "",
                    "--out",
                    out,
                ]
            )
        for name in ("jsd_image.csv", "jsd_matrix_laplacian.csv", "summary.json"):
            a = open(os.path.join(outs[0], "converge-seed0", name), "rb").read()
            b = open(os.path.join(outs[1], "converge-seed0", name), "rb").read()
            assert a == b


class TestPoissonRoundtrip:
    def test_passes_on_small_image(self, tmp_path):
        _, path = _small_image(tmp_path, side=48, seed=5)
        out = str(tmp_path / "runs")
        rc = main(
            ["poisson-roundtrip", "--image", path, "--max-iter", "4000", "--out", out]
        )
        assert rc == 0
        checks = _read_json(
            os.path.join(out, "poisson-roundtrip-seed0", "poisson_roundtrip.json")
        )
        assert checks["pass"] is True
        assert checks["spectral_relative_error"] <= 1e-8
        assert checks["greens_identity_witness"] <= 1e-6
        assert checks["cg_converged"] is True
        assert checks["nonintegrable_residual"] >= 0.0


class TestTrainSample:
    _FAST = [
        "--steps",
        "60",
        "--size",
        "12",
        "--dataset-size",
        "6",
        "--batch-size",
        "4",
        "--num-samples",
        "1",
        "--T",
        "50",
    ]

    def test_smoke_writes_artifacts(self, tmp_path):
        out = str(tmp_path / "runs")
        main(["train-sample", *self._FAST, "--out", out])
        run = os.path.join(out, "train-sample-seed0")
        for name in (
            "config.json",
            "loss_curve.csv",
            "net.bin",
            "net.json",
            "sample_00_field.raw",
            "sample_00.pgm",
            "train_report.json",
        ):
            assert os.path.exists(os.path.join(run, name)), name
        report = _read_json(os.path.join(run, "train_report.json"))
        assert np.isfinite(report["final_loss"])
        assert np.isfinite(report["zero_baseline"])
        assert report["penalty_final"] is None
        curve = open(os.path.join(run, "loss_curve.csv")).read().splitlines()
        assert curve[0] == "step,loss"
        assert [row.split(",")[0] for row in curve[1:]] == ["50", "60"]

    def test_guided_run_logs_penalty(self, tmp_path):
        out = str(tmp_path / "runs")
        main(
            [
                "train-sample",
                *self._FAST,
                "--lambda",
                "0.1",
                "--lr",
                "1e-4",
                "--out",
                out,
            ]
        )
        run = os.path.join(out, "train-sample-seed0")
        report = _read_json(os.path.join(run, "train_report.json"))
        assert report["penalty_final"] is not None
        assert np.isfinite(report["penalty_final"])
        assert os.path.exists(os.path.join(run, "penalty_curve.csv"))

    def test_learned_reconstructor_artifacts(self, tmp_path):
        out = str(tmp_path / "runs")
        main(
            [
                "train-sample",
                *self._FAST,
                "--learned-reconstructor",
                "--out",
                out,
            ]
        )
        run = os.path.join(out, "train-sample-seed0")
        for name in (
            "reconstructor.bin",
            "reconstructor.json",
            "reconstructor_curve.csv",
            "sample_00_learned.pgm",
        ):
            assert os.path.exists(os.path.join(run, name)), name

    def test_reruns_are_byte_identical(self, tmp_path):
        outs = [str(tmp_path / "a"), str(tmp_path / "b")]
        for out in outs:
            main(["train-sample", *self._FAST, "--out", out])
        for name in ("loss_curve.csv", "net.bin", "sample_00_field.raw"):
            a = open(os.path.join(outs[0], "train-sample-seed0", name), "rb").read()
            b = open(os.path.join(outs[1], "train-sample-seed0", name), "rb").read()
            assert a == b
