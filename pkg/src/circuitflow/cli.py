"""Command-line orchestration: solve, train, sample, and the two experiments.

Exit codes: 0 success, 2 validation error (bad config, missing file, size
caps), 3 numerical error (solver gates, overflow, divergence). Every run
writes a manifest.json with the resolved spec, seeds and versions; all CSV
artifacts are byte-reproducible for a fixed spec and seed.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitConfig, config_from_json
from .currents import (
    AnalyticExactCurrent,
    LearnedCurrent,
    OracleDenseCurrent,
    write_currents_csv,
)
from .data import (
    DiscreteDistribution,
    histogram,
    make_1d_pair,
    make_2d_pair,
    read_distribution_csv,
    total_variation,
    write_distribution_csv,
    write_samples_csv,
)
from .errors import NumericalError
from .oracle import (
    build_system,
    conservation_report,
    dump_potentials_csv,
    edge_currents,
    solve,
)
from .potentials import IndependentCoupling
from .regressor import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
    write_loss_trace_csv,
)
from .render import render_distribution
from .sampler import transport_forward_batch, write_forward_trajectories_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

ONE_D_DEFAULTS = {
    "circuit": {"L": 10, "S": 50, "D": 1, "r": 0.1, "R": 100.0},
    "dataset": "oneD",
    "train": {},
    "eval": {"samples": 100_000, "seed": 1, "mode": "exact"},
}
TWO_D_DEFAULTS = {
    "circuit": {"L": 4, "S": 50, "D": 2, "r": 0.1, "R": 10.0},
    "dataset": "twoD",
    "train": {},
    "eval": {"samples": 100_000, "seed": 1, "mode": "exact"},
}


class ExperimentSpec:
    """Resolved experiment description: circuit, dataset, train and eval blocks."""

    def __init__(self, raw: dict, base_dir: Path):
        if "circuit" not in raw:
            raise ValueError("spec is missing the 'circuit' block")
        self.circuit = config_from_json(raw["circuit"])
        self.dataset = raw.get("dataset", "oneD")
        if isinstance(self.dataset, dict):
            for key in ("source", "target"):
                if key not in self.dataset:
                    raise ValueError(f"custom dataset needs a '{key}' CSV path")
                path = base_dir / self.dataset[key]
                if not path.exists():
                    raise ValueError(f"dataset file not found: {path}")
        elif self.dataset not in ("oneD", "twoD"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        self.train = dict(raw.get("train", {}))
        ev = dict(raw.get("eval", {}))
        self.samples = int(ev.get("samples", 100_000))
        self.eval_seed = int(ev.get("seed", 1))
        self.mode = ev.get("mode", "exact")
        if self.mode not in ("exact", "learned", "oracle"):
            raise ValueError(f"unknown eval mode {self.mode!r}")
        if self.samples < 1:
            raise ValueError("eval.samples must be >= 1")
        self.data_seed = int(raw.get("data_seed", 0))
        self.base_dir = base_dir
        self.raw = raw

    def to_json(self) -> dict:
        cfg = self.circuit
        return {
            "circuit": {"L": cfg.L, "S": cfg.S, "D": cfg.D, "r": cfg.r, "R": cfg.R},
            "dataset": self.dataset,
            "data_seed": self.data_seed,
            "train": self.train,
            "eval": {"samples": self.samples, "seed": self.eval_seed, "mode": self.mode},
        }

    def load_pair(self):
        cfg = self.circuit
        if self.dataset == "oneD":
            if cfg.D != 1:
                raise ValueError("oneD dataset needs a D=1 circuit")
            p, q, _, _ = make_1d_pair(S=cfg.S, seed=self.data_seed, n_samples=1)
        elif self.dataset == "twoD":
            if cfg.D != 2:
                raise ValueError("twoD dataset needs a D=2 circuit")
            p, q, _, _ = make_2d_pair(S=cfg.S, seed=self.data_seed, n_samples=1)
        else:
            p = read_distribution_csv(self.base_dir / self.dataset["source"])
            q = read_distribution_csv(self.base_dir / self.dataset["target"])
        if p.n != cfg.n or q.n != cfg.n:
            raise ValueError("dataset tables do not match the circuit state space")
        return p, q


def load_spec(args) -> ExperimentSpec:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ValueError(f"config file not found: {path}")
        raw = json.loads(path.read_text())
        base = path.parent
    else:
        raw = json.loads(json.dumps(args.default_spec))
        base = Path.cwd()
    if args.seed is not None:
        raw.setdefault("train", {})["seed"] = args.seed
        raw.setdefault("eval", {})["seed"] = args.seed
    if args.samples is not None:
        raw.setdefault("eval", {})["samples"] = args.samples
    if getattr(args, "mode", None):
        raw.setdefault("eval", {})["mode"] = args.mode
    return ExperimentSpec(raw, base)


def write_manifest(out: Path, command: str, spec: ExperimentSpec, started: float,
                   extra: dict = None):
    manifest = {
        "command": command,
        "spec": spec.to_json(),
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": np.__version__,
        "started_unix": started,
        "wall_clock_s": time.time() - started,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _ensure_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_field(spec: ExperimentSpec, p, q, checkpoint=None):
    cfg = spec.circuit
    if spec.mode == "exact":
        return AnalyticExactCurrent(cfg, IndependentCoupling(p, q))
    if spec.mode == "oracle":
        solution = solve(build_system(cfg, p, q))
        return OracleDenseCurrent(cfg, edge_currents(solution, cfg), sinks=q)
    if checkpoint is None:
        raise ValueError("learned mode needs --checkpoint")
    params = load_checkpoint(checkpoint, cfg)
    return LearnedCurrent(cfg, params)


def cmd_solve(args) -> int:
    started = time.time()
    spec = load_spec(args)
    out = _ensure_out(args)
    p, q = spec.load_pair()
    cfg = spec.circuit
    solution = solve(build_system(cfg, p, q))
    currents = edge_currents(solution, cfg)
    dump_potentials_csv(out / "potentials.csv", solution)
    write_currents_csv(out / "currents.csv", OracleDenseCurrent(cfg, currents, sinks=q))
    report = conservation_report(currents, p, q)
    report["solve_residual"] = solution.residual
    report["grounded_node"] = solution.grounded_node
    (out / "kirchhoff_report.json").write_text(json.dumps(report, indent=2) + "\n")
    write_manifest(out, "solve", spec, started)
    return EXIT_OK


def _train_to_dir(spec: ExperimentSpec, out: Path):
    p, q = spec.load_pair()
    tc = TrainConfig(**spec.train)
    params, trace = train(spec.circuit, IndependentCoupling(p, q), tc)
    save_checkpoint(out / "checkpoint.json", params, spec.circuit)
    write_loss_trace_csv(out / "loss_trace.csv", trace)
    return params, trace


def cmd_train(args) -> int:
    started = time.time()
    spec = load_spec(args)
    out = _ensure_out(args)
    _, trace = _train_to_dir(spec, out)
    write_manifest(out, "train", spec, started, {
        "final_loss_mean_100": float(trace[-100:].mean()),
        "initial_loss_mean_100": float(trace[:100].mean()),
    })
    return EXIT_OK


def _sample_to_dir(spec: ExperimentSpec, out: Path, field, p, q, tag: str = ""):
    """Transport, then emit samples, per-layer histograms, trajectories, TV report."""
    from .circuit import categories_matrix

    cfg = spec.circuit
    suffix = f"_{tag}" if tag else ""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((spec.eval_seed, 10))))
    starts = p.sample(rng, spec.samples)
    states = transport_forward_batch(field, starts, seed=spec.eval_seed)
    rows = categories_matrix(states[:, -1], cfg)
    write_samples_csv(out / f"generated{suffix}.csv", rows)
    write_forward_trajectories_csv(out / f"trajectories{suffix}.csv", states)
    generated = histogram(rows, cfg)
    write_distribution_csv(out / f"generated_hist{suffix}.csv", generated)
    render_distribution(generated, cfg, out / f"generated{suffix}.svg",
                        f"generated{suffix}")
    for ell in range(cfg.L + 1):
        layer_hist = DiscreteDistribution.from_weights(
            np.bincount(states[:, ell], minlength=cfg.n))
        write_distribution_csv(out / f"layer_hist{suffix}_{ell}.csv", layer_hist)
        render_distribution(layer_hist, cfg, out / f"layer{suffix}_{ell}.svg",
                            f"layer {ell}{suffix}")
    tv = total_variation(generated, q)
    report = {"tv_to_target": tv, "samples": spec.samples, "mode": spec.mode or tag}
    (out / f"tv_report{suffix}.json").write_text(json.dumps(report, indent=2) + "\n")
    return tv


def cmd_sample(args) -> int:
    started = time.time()
    spec = load_spec(args)
    out = _ensure_out(args)
    p, q = spec.load_pair()
    field = _build_field(spec, p, q, checkpoint=args.checkpoint)
    tv = _sample_to_dir(spec, out, field, p, q)
    write_manifest(out, "sample", spec, started, {"tv_to_target": tv})
    return EXIT_OK


def _run_experiment(args, default_spec) -> int:
    started = time.time()
    args.default_spec = default_spec
    spec = load_spec(args)
    out = _ensure_out(args)
    cfg = spec.circuit
    p, q = spec.load_pair()
    write_distribution_csv(out / "source.csv", p)
    write_distribution_csv(out / "target.csv", q)
    render_distribution(p, cfg, out / "source.svg", "source")
    render_distribution(q, cfg, out / "target.svg", "target")

    spec.mode = "exact"
    exact_field = AnalyticExactCurrent(cfg, IndependentCoupling(p, q))
    tv_exact = _sample_to_dir(spec, out, exact_field, p, q, tag="exact")

    params, trace = _train_to_dir(spec, out)
    spec.mode = "learned"
    learned_field = LearnedCurrent(cfg, params)
    tv_learned = _sample_to_dir(spec, out, learned_field, p, q, tag="learned")

    write_manifest(out, args.command, spec, started, {
        "tv_exact": tv_exact,
        "tv_learned": tv_learned,
        "final_loss_mean_100": float(trace[-100:].mean()),
        "initial_loss_mean_100": float(trace[:100].mean()),
    })
    return EXIT_OK


def cmd_experiment_1d(args) -> int:
    return _run_experiment(args, ONE_D_DEFAULTS)


def cmd_experiment_2d(args) -> int:
    return _run_experiment(args, TWO_D_DEFAULTS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circuitflow",
        description="Electric-current transport between discrete distributions "
                    "on layered resistor circuits.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, mode_flag=True):
        sp.add_argument("--config", help="experiment spec JSON")
        sp.add_argument("--seed", type=int, default=None, help="override all seeds")
        sp.add_argument("--samples", type=int, default=None,
                        help="override eval sample count")
        sp.add_argument("--out", required=True, help="output directory")
        if mode_flag:
            sp.add_argument("--mode", choices=["exact", "learned", "oracle"],
                            default=None, help="current field for transport")

    sp = sub.add_parser("solve", help="run the node-voltage oracle, dump "
                                      "potentials/currents and a Kirchhoff report")
    common(sp, mode_flag=False)
    sp.set_defaults(func=cmd_solve, default_spec=ONE_D_DEFAULTS)

    sp = sub.add_parser("train", help="train the current regressor (checkpoint + "
                                      "loss trace)")
    common(sp, mode_flag=False)
    sp.set_defaults(func=cmd_train, default_spec=ONE_D_DEFAULTS)

    sp = sub.add_parser("sample", help="transport samples with the selected "
                                       "current field")
    common(sp)
    sp.add_argument("--checkpoint", help="regressor checkpoint for learned mode")
    sp.set_defaults(func=cmd_sample, default_spec=ONE_D_DEFAULTS)

    sp = sub.add_parser("experiment-1d", help="uniform -> discretized Gaussian, "
                                              "exact and learned transport")
    common(sp, mode_flag=False)
    sp.set_defaults(func=cmd_experiment_1d)

    sp = sub.add_parser("experiment-2d", help="two moons -> swiss roll on a "
                                              "50x50 grid")
    common(sp, mode_flag=False)
    sp.set_defaults(func=cmd_experiment_2d)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, OverflowError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
