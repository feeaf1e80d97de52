"""Command-line interface: dataset generation, training, sweeps, and checks.

Every command takes an existing ``--out`` directory and writes a
``manifest.json`` recording the resolved arguments plus SHA-256 digests of its
inputs and outputs, so any artifact can be reproduced bit-exactly from its
manifest.  Exit codes: 0 success, 1 usage or input error, 2 failed
verification, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import verify as checks
from .data import (
    BENCHMARK_D,
    BENCHMARK_N_PER_CLASS,
    BENCHMARK_SCALES,
    BENCHMARK_SIGMA,
    Dataset,
    benchmark_hierarchy,
    drop_level,
    generate_synthetic,
    load_csv,
    relabel,
    save_csv,
)
from .errors import LhtError, NotConverged, NumericalError, ParseError
from .evaluation import evaluate, report_json
from .hierarchy import LabelHierarchy
from .model import MODES, LhtModel, ModelConfig, save_checkpoint
from .training import TrainConfig, train

__all__ = ["main", "build_parser", "cmd_gen_data", "cmd_train", "cmd_sweep_lambda", "cmd_verify"]

DEFAULT_SWEEP_LAMBDAS = "0,0.5,1,2,5,10,100"
DEFAULT_SWEEP_SEEDS = "0,1,2,3,4"

_MODEL_KEYS = ("hidden_dim", "embedding_dim", "transition_input")
_TRAIN_FLAG_KEYS = (
    "mode",
    "batch_size",
    "epochs",
    "max_steps",
    "lr_backbone",
    "lr_heads",
    "momentum",
    "weight_decay",
    "lam",
    "seed",
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; 2 is reserved for failed verification."""

    def error(self, message: str):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _require_dir(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path}")
    return path


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    out: Path, command: str, args_dict: dict, inputs: dict[str, str], outputs: list[Path]
) -> None:
    manifest = {
        "command": command,
        "args": args_dict,
        "inputs": inputs,
        "outputs": {p.name: _sha256_file(p) for p in outputs},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_data_dir(data_dir: Path) -> tuple[LabelHierarchy, Dataset, Dataset]:
    hier = LabelHierarchy.load(data_dir / "hierarchy.json")
    train_data = load_csv(data_dir / "train.csv", hier, split="train")
    test_data = load_csv(data_dir / "test.csv", hier, split="test")
    return hier, train_data, test_data


def _parse_numbers(text: str, kind, what: str) -> list:
    try:
        values = [kind(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as err:
        raise ParseError(f"expected comma-separated {what}, got {text!r}") from err
    if not values:
        raise ParseError(f"expected at least one value for {what}, got {text!r}")
    return values


# -- gen-data -------------------------------------------------------------------

def cmd_gen_data(args: argparse.Namespace) -> int:
    out = _require_dir(args.out)
    inputs: dict[str, str] = {}
    if args.hierarchy:
        hier = LabelHierarchy.load(args.hierarchy)
        inputs[args.hierarchy] = _sha256_file(Path(args.hierarchy))
    else:
        hier = benchmark_hierarchy()
    if args.scales is not None:
        scales = tuple(_parse_numbers(args.scales, float, "scales"))
    elif args.hierarchy is None:
        scales = BENCHMARK_SCALES
    else:
        scales = None
    train_data, test_data = generate_synthetic(
        hier,
        d=args.d,
        n_per_class=args.n_per_class,
        noise_sigma=args.sigma,
        center_scales=scales,
        seed=args.seed,
    )
    hier.save(out / "hierarchy.json")
    save_csv(train_data, out / "train.csv")
    save_csv(test_data, out / "test.csv")
    resolved = {
        "hierarchy": args.hierarchy,
        "level_sizes": list(hier.level_sizes),
        "d": args.d,
        "n_per_class": args.n_per_class,
        "sigma": args.sigma,
        "scales": None if scales is None else list(scales),
        "seed": args.seed,
    }
    _write_manifest(
        out, "gen-data", resolved, inputs,
        [out / "hierarchy.json", out / "train.csv", out / "test.csv"],
    )
    print(f"wrote hierarchy.json, train.csv, test.csv, manifest.json to {out}")
    return 0


# -- train ----------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    out = _require_dir(args.out)
    data_dir = Path(args.data)
    inputs = {
        name: _sha256_file(data_dir / name)
        for name in ("hierarchy.json", "train.csv", "test.csv")
    }
    hier, train_data, test_data = _load_data_dir(data_dir)

    settings: dict = {}
    if args.config:
        config_path = Path(args.config)
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as err:
            raise ParseError(f"config file {config_path}: {err}") from err
        if not isinstance(raw, dict):
            raise ParseError(f"config file {config_path}: expected a JSON object")
        known = {f.name for f in dataclasses.fields(TrainConfig)} | set(_MODEL_KEYS)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ParseError(f"config file {config_path}: unknown keys {', '.join(unknown)}")
        settings.update(raw)
        inputs[args.config] = _sha256_file(config_path)
    for key in _TRAIN_FLAG_KEYS + _MODEL_KEYS:
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    model_settings = {k: settings.pop(k) for k in _MODEL_KEYS if k in settings}
    config = TrainConfig(**settings)
    config.validate()

    if args.random_hierarchy is not None:
        hier = hier.randomize(args.random_hierarchy)
        train_data = relabel(train_data, hier)
        test_data = relabel(test_data, hier)
    if args.drop_level is not None:
        train_data = drop_level(train_data, args.drop_level)
        test_data = drop_level(test_data, args.drop_level)
        hier = train_data.hierarchy

    model_config = ModelConfig(input_dim=train_data.d, **model_settings)
    model = LhtModel(hier, config.mode, model_config, seed=config.seed)
    result = train(model, train_data, config)
    report = evaluate(model, test_data)

    save_checkpoint(model, out / "checkpoint.bin")
    with open(out / "history.jsonl", "w") as fh:
        for rec in result.history:
            fh.write(
                json.dumps(
                    {
                        "step": rec.step,
                        "lr_backbone": rec.lr_backbone,
                        "lr_heads": rec.lr_heads,
                        "ce_per_level": list(rec.losses.ce_per_level),
                        "ce_total": rec.losses.ce_total,
                        "conf_total": rec.losses.conf_total,
                        "total": rec.losses.total,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    (out / "report.json").write_text(report_json(report))
    resolved = {
        "data": str(data_dir),
        "config": dataclasses.asdict(config),
        "model": dataclasses.asdict(model_config),
        "drop_level": args.drop_level,
        "random_hierarchy": args.random_hierarchy,
    }
    _write_manifest(
        out, "train", resolved, inputs,
        [out / "checkpoint.bin", out / "history.jsonl", out / "report.json"],
    )
    accs = "/".join(f"{a:.4f}" for a in report.acc)
    print(
        f"trained {config.mode} for {len(result.history)} steps; "
        f"test acc {accs}, avg {report.avg_acc:.4f}"
    )
    return 0


# -- sweep-lambda -----------------------------------------------------------------

def _sweep_run(payload: tuple[str, str, float, int, int | None]) -> dict:
    """One (lambda, seed) training run; top-level so worker processes can pickle it."""
    data_dir, mode, lam, seed, epochs = payload
    hier, train_data, test_data = _load_data_dir(Path(data_dir))
    overrides = {} if epochs is None else {"epochs": epochs}
    config = TrainConfig(mode=mode, lam=lam, seed=seed, **overrides)
    model = LhtModel(hier, mode, ModelConfig(input_dim=train_data.d), seed=seed)
    train(model, train_data, config)
    report = evaluate(model, test_data)
    return {"lam": lam, "seed": seed, "acc": list(report.acc), "avg_acc": report.avg_acc}


def cmd_sweep_lambda(args: argparse.Namespace) -> int:
    out = _require_dir(args.out)
    data_dir = Path(args.data)
    inputs = {
        name: _sha256_file(data_dir / name)
        for name in ("hierarchy.json", "train.csv", "test.csv")
    }
    lams = _parse_numbers(args.lambdas, float, "lambda values")
    seeds = _parse_numbers(args.seeds, int, "seeds")
    payloads = [
        (str(data_dir), args.mode, lam, seed, args.epochs) for lam in lams for seed in seeds
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_run, payloads))
    else:
        rows = [_sweep_run(p) for p in payloads]
    rows.sort(key=lambda r: (r["lam"], r["seed"]))

    levels = len(rows[0]["acc"])
    level_cols = [f"acc_level{k}" for k in range(1, levels + 1)]
    runs_lines = ["lambda,seed," + ",".join(level_cols) + ",avg_acc"]
    for row in rows:
        cells = [repr(row["lam"]), str(row["seed"])]
        cells += [repr(a) for a in row["acc"]] + [repr(row["avg_acc"])]
        runs_lines.append(",".join(cells))
    (out / "runs.csv").write_text("\n".join(runs_lines) + "\n")

    summary_header = ["lambda"]
    for col in level_cols + ["avg_acc"]:
        summary_header += [f"{col}_mean", f"{col}_std"]
    summary_lines = [",".join(summary_header)]
    for lam in lams:
        group = [r for r in rows if r["lam"] == lam]
        cells = [repr(lam)]
        for k in range(levels):
            vals = np.array([r["acc"][k] for r in group])
            cells += [repr(float(vals.mean())), repr(float(vals.std()))]
        vals = np.array([r["avg_acc"] for r in group])
        cells += [repr(float(vals.mean())), repr(float(vals.std()))]
        summary_lines.append(",".join(cells))
    (out / "summary.csv").write_text("\n".join(summary_lines) + "\n")

    resolved = {
        "data": str(data_dir),
        "mode": args.mode,
        "lambdas": lams,
        "seeds": seeds,
        "epochs": args.epochs,
        "runs": [[r["lam"], r["seed"]] for r in rows],
    }
    _write_manifest(out, "sweep-lambda", resolved, inputs, [out / "runs.csv", out / "summary.csv"])
    print(f"completed {len(rows)} runs; wrote runs.csv, summary.csv, manifest.json to {out}")
    return 0


# -- verify ---------------------------------------------------------------------

_CHECK_FAMILIES = {
    "gradients": lambda seed: checks.check_gradients(seed),
    "naive-collapse": lambda seed: checks.check_naive_collapse(seed),
    "nll-ce": lambda seed: [checks.check_nll_ce_identity(seed=seed)],
    "lambda-saturation": lambda seed: checks.check_lambda_saturation(seed, strict=False),
}


def cmd_verify(args: argparse.Namespace) -> int:
    if args.only:
        names = [n.strip() for n in args.only.split(",") if n.strip()]
        unknown = [n for n in names if n not in _CHECK_FAMILIES]
        if unknown:
            raise ParseError(
                f"unknown check families: {', '.join(unknown)}; "
                f"choose from {', '.join(_CHECK_FAMILIES)}"
            )
    else:
        names = list(_CHECK_FAMILIES)
    results = []
    for name in names:
        results.extend(_CHECK_FAMILIES[name](args.seed))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} margin={r.margin:.6g} threshold={r.threshold:g} seed={r.seed}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    if args.out:
        out = _require_dir(args.out)
        records = [
            {
                "name": r.name,
                "pass": r.passed,
                "margin": r.margin,
                "threshold": r.threshold,
                "seed": r.seed,
            }
            for r in results
        ]
        (out / "verify.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
        _write_manifest(
            out, "verify", {"seed": args.seed, "only": names}, {}, [out / "verify.json"]
        )
    return 2 if failed else 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lht", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic hierarchical dataset")
    g.add_argument("--out", required=True, help="existing output directory")
    g.add_argument(
        "--hierarchy", default=None,
        help="hierarchy JSON file (default: built-in balanced 8/4/2 preset)",
    )
    g.add_argument("--d", type=int, default=BENCHMARK_D, help="feature dimension")
    g.add_argument("--n-per-class", type=int, default=BENCHMARK_N_PER_CLASS)
    g.add_argument("--sigma", type=float, default=BENCHMARK_SIGMA, help="within-class noise")
    g.add_argument(
        "--scales", default=None,
        help=(
            "comma-separated center scales, finest level first "
            "(default: 1,1.4,1.9 for the built-in hierarchy, 1,2,4,... otherwise)"
        ),
    )
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model and write checkpoint/history/report")
    t.add_argument("--data", required=True, help="directory produced by gen-data")
    t.add_argument("--out", required=True, help="existing output directory")
    t.add_argument("--config", default=None, help="JSON config file; flags override its fields")
    t.add_argument("--mode", choices=MODES, default=None)
    t.add_argument("--lambda", dest="lam", type=float, default=None, help="confusion weight")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--max-steps", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--lr-backbone", type=float, default=None)
    t.add_argument("--lr-heads", type=float, default=None)
    t.add_argument("--momentum", type=float, default=None)
    t.add_argument("--weight-decay", type=float, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--hidden-dim", type=int, default=None)
    t.add_argument("--embedding-dim", type=int, default=None)
    t.add_argument("--transition-input", choices=("slice", "full"), default=None)
    t.add_argument(
        "--drop-level", type=int, default=None, metavar="K",
        help="remove intermediate level K from the hierarchy and labels",
    )
    t.add_argument(
        "--random-hierarchy", type=int, default=None, metavar="SEED",
        help="shuffle parent maps with this seed and relabel the data",
    )
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep-lambda", help="grid of training runs over confusion weights")
    s.add_argument("--data", required=True, help="directory produced by gen-data")
    s.add_argument("--out", required=True, help="existing output directory")
    s.add_argument("--lambdas", default=DEFAULT_SWEEP_LAMBDAS, help="comma-separated values")
    s.add_argument("--seeds", default=DEFAULT_SWEEP_SEEDS, help="comma-separated seeds")
    s.add_argument("--mode", choices=MODES, default="lht_f2c")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    s.set_defaults(func=cmd_sweep_lambda)

    v = sub.add_parser("verify", help="run the formal checks and report pass/fail")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument(
        "--only", default=None,
        help=f"comma-separated subset of: {', '.join(_CHECK_FAMILIES)}",
    )
    v.add_argument("--out", default=None, help="existing directory for verify.json")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotConverged as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except LhtError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
