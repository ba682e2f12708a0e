"""Command-line front end: runs the experiments end to end.

Four subcommands: variance-check (differential operators really do scale
i.i.d. noise by the advertised constants), converge (cross-domain
histogram convergence timing on an image), poisson-roundtrip (solver
fidelity on an image), and train-sample (toy training, sampling, and
reconstruction).  Every run writes its fully-resolved configuration to
stdout and into the run directory as config.json; re-running with that
file reproduces the outputs byte for byte.  Exit status is 0 exactly when
the command's declared numeric checks pass.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis, assets, fieldio, model, poisson
from .diffops import GradientField, forward_gradient, laplacian_fe
from .diffusion import (
    DomainKind,
    forward_closed_form,
    sample,
    to_domain,
)
from .field import Field, ParameterError, Rng, sample_gaussian
from .model import (
    LossConfig,
    TinyConvNet,
    TrainingDiverged,
    default_reconstructor,
    net_forward,
    save_net,
    train,
    zero_baseline,
)
from .schedule import Schedule, make_schedule

_DOMAIN_NAMES = {
    "image": DomainKind.IMAGE,
    "gradient": DomainKind.GRADIENT,
    "laplacian": DomainKind.LAPLACIAN,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully-resolved parameters of one run.

    Built in four layers: dataclass defaults, per-command defaults, the
    optional JSON config file, then explicit command-line flags, later
    layers winning.  The resolved record is echoed as JSON so any run can
    be replayed exactly.
    """

    command: str
    seed: int = 0
    schedule: str = "linear"
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    domain: str = "laplacian"
    out: str = "runs"
    bins: int = analysis.DEFAULT_BINS
    tol: float = 0.01
    lam: float = 0.0
    steps: int = 2000
    lr: float = 0.05
    sigma: float = 1.0
    size: int = 1024
    reps: int = 1
    image: str = ""
    timesteps: str = "0,500,1000"
    max_iter: int = 2000
    num_samples: int = 4
    dataset_size: int = 24
    batch_size: int = 8
    laplacian_penalty: bool = False
    learned_reconstructor: bool = False

    def domain_kind(self) -> DomainKind:
        return _DOMAIN_NAMES[self.domain]

    def make_schedule(self) -> Schedule:
        return make_schedule(self.schedule, self.T, self.beta_start, self.beta_end)

    def run_dir(self) -> str:
        return os.path.join(self.out, f"{self.command}-seed{self.seed}")

    def snapshot_steps(self) -> list[int]:
        if not self.timesteps.strip():
            return []
        return sorted({int(tok) for tok in self.timesteps.split(",")})


_COMMAND_DEFAULTS: dict[str, dict] = {
    "variance-check": {},
    "converge": {},
    "poisson-roundtrip": {"tol": 1e-8},
    "train-sample": {"size": 16},
}


def _resolve_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    merged: dict = dict(_COMMAND_DEFAULTS[command])
    field_names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    if args.config:
        with open(args.config) as f:
            file_conf = json.load(f)
        for key, val in file_conf.items():
            if key == "command":
                continue
            if key not in field_names:
                raise ParameterError(f"unknown config key {key!r}")
            merged[key] = val
    for key, val in vars(args).items():
        if key in ("config", "func", "command") or val is None:
            continue
        merged[key] = val
    if merged.get("domain", "laplacian") not in _DOMAIN_NAMES:
        raise ParameterError(f"unknown domain {merged['domain']!r}")
    return ExperimentConfig(command=command, **merged)


def _start_run(config: ExperimentConfig) -> str:
    run_dir = config.run_dir()
    os.makedirs(run_dir, exist_ok=True)
    blob = json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True)
    print(blob)
    with open(os.path.join(run_dir, "config.json"), "w") as f:
        f.write(blob + "\n")
    return run_dir


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# variance-check


def cmd_variance_check(config: ExperimentConfig) -> int:
    """Measure how the operators scale i.i.d. noise, against [2, 1.25]."""
    run_dir = _start_run(config)
    rng = Rng(config.seed)
    h = w = config.size
    n_eps = 0.0
    s_eps = 0.0
    n_g = 0.0
    s_g = 0.0
    n_l = 0.0
    s_l = 0.0
    for _ in range(config.reps):
        eps = sample_gaussian((h, w, 1), config.sigma, rng)
        g = forward_gradient(eps)
        lap = laplacian_fe(eps)
        # boundary rows carry the replicate-padding artifacts; measure the
        # interior, where the operators act at full stencil
        gu = g.gu.data[: h - 1]
        gv = g.gv.data[:, : w - 1]
        interior = lap.data[1 : h - 1, 1 : w - 1]
        s_eps += float(np.sum(eps.data**2))
        n_eps += eps.data.size
        s_g += float(np.sum(gu**2) + np.sum(gv**2))
        n_g += gu.size + gv.size
        s_l += float(np.sum(interior**2))
        n_l += interior.size
    var_eps = s_eps / n_eps
    ratio_g = (s_g / n_g) / var_eps
    ratio_l = (s_l / n_l) / var_eps
    ok = abs(ratio_g - 2.0) <= 0.02 * 2.0 and abs(ratio_l - 1.25) <= 0.02 * 1.25
    report = {
        "measured_gradient_ratio": ratio_g,
        "measured_laplacian_ratio": ratio_l,
        "expected": [2.0, 1.25],
        "sample_counts": {"noise": n_eps, "gradient": n_g, "laplacian": n_l},
        "pass": bool(ok),
    }
    _write_json(os.path.join(run_dir, "variance_check.json"), report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# converge


def _load_input_image(config: ExperimentConfig) -> Field:
    if config.image:
        return fieldio.read_image(config.image)
    return assets.natural_image()


def cmd_converge(config: ExperimentConfig) -> int:
    """Cross-domain convergence timing on one image, shared noise seed."""
    run_dir = _start_run(config)
    img = _load_input_image(config)
    s = config.make_schedule()
    snap_steps = [t for t in config.snapshot_steps() if 0 <= t <= s.T]
    summary: dict = {"tol": config.tol, "bins": config.bins, "domains": {}}
    t_conv: dict[str, int] = {}
    for name, d in _DOMAIN_NAMES.items():
        x0 = to_domain(img, d)
        # same seed in every domain: the comparison rides on one noise draw
        eps = sample_gaussian(x0.shape, 1.0, Rng(config.seed))
        lo, hi = analysis.default_range(d)
        snap_dir = os.path.join(run_dir, f"snapshots_{name}")
        if snap_steps:
            os.makedirs(snap_dir, exist_ok=True)
        rows = []
        rows2 = []
        for t in range(s.T + 1):
            st = forward_closed_form(x0, t, eps, s, d)
            rows.append(analysis.mass_vector(analysis.histogram(st, config.bins, lo, hi)))
            rows2.append(
                analysis.mass_vector(analysis.histogram(st, 2 * config.bins, lo, hi))
            )
            if t in snap_steps:
                fieldio.write_raw(os.path.join(snap_dir, f"state_{t:04d}.raw"), st)
                if d is DomainKind.IMAGE:
                    fieldio.write_pgm(os.path.join(snap_dir, f"state_{t:04d}.pgm"), st)
        if snap_steps:
            _write_json(
                os.path.join(snap_dir, "manifest.json"),
                {
                    "domain": name,
                    "schedule": {
                        "kind": config.schedule,
                        "T": config.T,
                        "beta_start": config.beta_start,
                        "beta_end": config.beta_end,
                    },
                    "seed": config.seed,
                    "timesteps": snap_steps,
                },
            )
        rep = analysis.report_from_masses(np.stack(rows), d, config.tol)
        rep2 = analysis.report_from_masses(np.stack(rows2), d, config.tol)
        mat = analysis.jsd_matrix_from_masses(np.stack(rows), d)
        analysis.write_jsd_csv(rep, os.path.join(run_dir, f"jsd_{name}.csv"))
        analysis.write_jsd_matrix_csv(mat, os.path.join(run_dir, f"jsd_matrix_{name}.csv"))
        t_conv[name] = rep.t_converge
        summary["domains"][name] = {
            "t_converge": rep.t_converge,
            "t_converge_doubled_bins": rep2.t_converge,
            "binning_stable": bool(abs(rep.t_converge - rep2.t_converge) <= 0.1 * s.T),
        }
    ordering = t_conv["laplacian"] < t_conv["gradient"] < t_conv["image"]
    summary["ordering_laplacian_gradient_image"] = bool(ordering)
    _write_json(os.path.join(run_dir, "summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if ordering else 1


# ---------------------------------------------------------------------------
# poisson-roundtrip


def cmd_poisson_roundtrip(config: ExperimentConfig) -> int:
    """Solve the image back from its Laplacian and from gradient fields."""
    run_dir = _start_run(config)
    img = _load_input_image(config)
    mean = float(img.data.mean())

    lap = laplacian_fe(img)
    spectral = poisson.solve_poisson_neumann(lap, anchor_mean=mean)
    rel_spectral = float(
        np.linalg.norm(spectral.image.data - img.data) / np.linalg.norm(img.data)
    )

    g = forward_gradient(img)
    cg = poisson.reconstruct_from_gradient(
        g, anchor_mean=mean, tol=config.tol, max_iter=config.max_iter
    )
    # the witness compares the two solvers, so the iterative side is solved
    # well past the gate; at the configured tol its own truncation error
    # (roughly condition number times tol) would swamp the 1e-6 bound
    tight = poisson.reconstruct_from_gradient(
        g,
        anchor_mean=mean,
        tol=min(config.tol, 1e-10),
        max_iter=max(config.max_iter, 4000),
    )
    witness = poisson.greens_identity_check(spectral.image, tight.image)

    # rotating a gradient field (gu, gv) -> (gv, -gu) kills its integrable
    # part, so this solve can only report the least-squares residual
    rot = forward_gradient(sample_gaussian(img.shape, 1.0, Rng(config.seed)))
    swapped = GradientField(gu=rot.gv, gv=Field._wrap(-rot.gu.data))
    lsq = poisson.reconstruct_from_gradient(
        swapped, anchor_mean=0.0, tol=config.tol, max_iter=config.max_iter
    )

    checks = {
        "spectral_relative_error": rel_spectral,
        "spectral_residual": spectral.residual_l2,
        "greens_identity_witness": witness,
        "cg_iterations": cg.iterations,
        "cg_converged": bool(cg.converged),
        "cg_relative_error": float(
            np.linalg.norm(cg.image.data - img.data) / np.linalg.norm(img.data)
        ),
        "nonintegrable_residual": lsq.residual_l2,
        "nonintegrable_converged": bool(lsq.converged),
        "witness_cg_iterations": tight.iterations,
        "witness_cg_converged": bool(tight.converged),
    }
    bound = 1e-6 * max(1.0, float(np.abs(spectral.image.data).max()))
    ok = (
        rel_spectral <= 1e-8
        and witness <= bound
        and cg.converged
        and tight.converged
    )
    checks["pass"] = bool(ok)
    _write_json(os.path.join(run_dir, "poisson_roundtrip.json"), checks)
    print(json.dumps(checks, indent=2, sort_keys=True))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# train-sample


def _loss_steps(total: int) -> list[int]:
    steps = [t for t in range(1, total + 1) if t % model._LOG_EVERY == 0]
    if not steps or steps[-1] != total:
        steps.append(total)
    return steps


def _write_curve(path: str, header: str, total_steps: int, curve) -> None:
    with open(path, "w") as f:
        f.write(f"step,{header}\n")
        for step, val in zip(_loss_steps(total_steps), curve):
            f.write(f"{step},{val:.12g}\n")


def cmd_train_sample(config: ExperimentConfig) -> int:
    """Train the toy net, draw samples, reconstruct, write everything."""
    run_dir = _start_run(config)
    d = config.domain_kind()
    s = config.make_schedule()
    root = Rng(config.seed)
    images = assets.blob_dataset(
        config.dataset_size, config.size, config.size, root.child(2)
    )
    data = [to_domain(x, d) for x in images]
    channels = data[0].channels
    image_mean = float(np.mean([x.data.mean() for x in images]))
    net = TinyConvNet(channels, channels, root.child(3))
    loss_config = LossConfig(
        lam=config.lam,
        laplacian_penalty=config.laplacian_penalty,
        batch_size=config.batch_size,
    )

    try:
        report = train(net, data, s, d, loss_config, config.lr, config.steps, root)
    except TrainingDiverged as diverged:
        partial = diverged.report
        _write_json(
            os.path.join(run_dir, "train_report.json"),
            {
                "final_loss": None,
                "diverged_at_step": partial.steps,
                "loss_curve": list(partial.loss_curve),
            },
        )
        print(f"training diverged: {diverged}", file=sys.stderr)
        return 1

    baseline = zero_baseline(data, s, d, Rng(config.seed), loss_config)
    _write_curve(
        os.path.join(run_dir, "loss_curve.csv"), "loss", config.steps, report.loss_curve
    )
    if report.penalty_curve is not None:
        _write_curve(
            os.path.join(run_dir, "penalty_curve.csv"),
            "penalty",
            config.steps,
            report.penalty_curve,
        )
    save_net(
        net,
        os.path.join(run_dir, "net.bin"),
        os.path.join(run_dir, "net.json"),
        config.seed,
        config.steps,
    )

    rnet = None
    if config.learned_reconstructor and d is not DomainKind.IMAGE:
        rnet = TinyConvNet(channels, images[0].channels, root.child(5))
        rrep = model.train_reconstructor(
            rnet,
            images,
            noise_levels=[0.0, 0.05, 0.1],
            rng=root.child(6),
            lr=config.lr,
            steps=config.steps,
            d=d,
            batch_size=config.batch_size,
        )
        save_net(
            rnet,
            os.path.join(run_dir, "reconstructor.bin"),
            os.path.join(run_dir, "reconstructor.json"),
            config.seed,
            config.steps,
        )
        _write_curve(
            os.path.join(run_dir, "reconstructor_curve.csv"),
            "loss",
            config.steps,
            rrep.loss_curve,
        )

    recon = default_reconstructor(d)
    sample_rng = root.child(4)
    shape = (config.size, config.size, channels)
    for k in range(config.num_samples):
        field = sample(net, s, shape, d, stochastic=True, rng=sample_rng)
        fieldio.write_raw(os.path.join(run_dir, f"sample_{k:02d}_field.raw"), field)
        image = recon.apply(field)
        if d is not DomainKind.IMAGE:
            image = Field._wrap(image.data + image_mean)
        fieldio.write_pgm(os.path.join(run_dir, f"sample_{k:02d}.pgm"), image)
        if rnet is not None:
            learned = net_forward(rnet, field, 0, s)
            learned = Field._wrap(learned.data + image_mean)
            fieldio.write_pgm(
                os.path.join(run_dir, f"sample_{k:02d}_learned.pgm"), learned
            )

    ok = report.final_loss <= 0.7 * baseline
    payload = {
        "final_loss": report.final_loss,
        "zero_baseline": baseline,
        "loss_ratio": report.final_loss / baseline,
        "penalty_final": report.penalty_curve[-1] if report.penalty_curve else None,
        "pass": bool(ok),
    }
    _write_json(os.path.join(run_dir, "train_report.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--schedule", choices=["linear", "constant"])
    p.add_argument("--T", type=int)
    p.add_argument("--beta-start", type=float, dest="beta_start")
    p.add_argument("--beta-end", type=float, dest="beta_end")
    p.add_argument("--domain", choices=sorted(_DOMAIN_NAMES))
    p.add_argument("--bins", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradlab",
        description="diffusion experiments in image, gradient, and Laplacian domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("variance-check", help="operator noise-scale ratios vs [2, 1.25]")
    _add_common(p)
    p.add_argument("--sigma", type=float, help="noise standard deviation (default 1)")
    p.add_argument("--size", type=int, help="field side length (default 1024)")
    p.add_argument("--reps", type=int, help="independent fields to accumulate")
    p.set_defaults(func=cmd_variance_check)

    p = sub.add_parser("converge", help="cross-domain convergence timing")
    _add_common(p)
    p.add_argument("--image", help="input PGM/PPM (default: bundled image)")
    p.add_argument("--timesteps", help="comma-separated snapshot steps")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("poisson-roundtrip", help="solver fidelity on an image")
    _add_common(p)
    p.add_argument("--image", help="input PGM/PPM (default: bundled image)")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.set_defaults(func=cmd_poisson_roundtrip)

    p = sub.add_parser("train-sample", help="train the toy net, then sample")
    _add_common(p)
    p.add_argument("--size", type=int, help="training image side (default 16)")
    p.add_argument("--dataset-size", type=int, dest="dataset_size")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--num-samples", type=int, dest="num_samples")
    p.add_argument(
        "--laplacian-penalty",
        action="store_const",
        const=True,
        dest="laplacian_penalty",
        help="compare Laplacians instead of gradients in the guided term",
    )
    p.add_argument(
        "--learned-reconstructor",
        action="store_const",
        const=True,
        dest="learned_reconstructor",
        help="also train and save the toy field-to-image net",
    )
    p.set_defaults(func=cmd_train_sample)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = _resolve_config(args.command, args)
    return args.func(config)


def entrypoint() -> None:
    try:
        sys.exit(main())
    except (ParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"gradlab: error: {exc}", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
