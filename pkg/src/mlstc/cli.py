"""Command line entry point (``mlstc``).

Exit codes: 0 success, 2 bad configuration or arguments, 3 bad or missing
input data, 4 numerical failure (for example an unreachable target rate).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .baselines import train_lsh, train_pca_hash
from .codec import MLModel, decode_ml_matrix, encode_ml, train_ml, train_single_layer
from .errors import ConfigError, DataError, MLSTCError
from .serialization import load_codes, load_model, save_codes, save_model
from .slb import slb_curve
from .sources import SyntheticSpec, load_fvecs, load_idx, write_fvecs

log = logging.getLogger("mlstc")


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def load_matrix(path) -> np.ndarray:
    """Read an ``(n, N)`` matrix from ``.fvecs``, ``.npy`` or idx (optionally gzipped)."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"{p}: no such file")
    name = p.name.removesuffix(".gz")
    if name.endswith(".fvecs"):
        return load_fvecs(p)
    if name.endswith(".npy"):
        arr = np.load(p)
        if arr.ndim != 2:
            raise DataError(f"{p}: expected a 2-D array, got shape {arr.shape}")
        return arr.astype(float)
    if "idx" in name or "ubyte" in name:
        return load_idx(p)[0]
    raise DataError(f"{p}: unrecognised data format (use .fvecs, .npy or idx)")


def save_matrix(path, data):
    p = Path(path)
    if p.name.endswith(".fvecs"):
        write_fvecs(p, data)
    else:
        np.save(p, data)


def _spectrum_from_args(args):
    if args.data:
        from .kernels import eigh, estimate_covariance

        return eigh(estimate_covariance(load_matrix(args.data)), method=args.eig_solver).eigenvalues, Path(args.data).stem
    spec = SyntheticSpec(args.source, args.n, 2, rho=args.rho)
    return spec.spectrum(), spec.name


def _emit(text, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args):
    overrides = dict(
        rate_grid=args.rate_grid,
        lambda_grid=args.lambda_grid,
        layer_rates=args.layer_rate,
        layers=args.layers,
        seed=args.seed,
        out=args.out,
        eig_method=args.eig_solver,
        methods=args.methods,
        variance_holdout=args.variance_holdout,
    )
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config and args.recipe:
        raise ConfigError("use either --config or --recipe, not both")
    if args.config:
        base = harness.ExperimentConfig.from_json(args.config).to_dict()
        cfg = harness.ExperimentConfig.from_dict({**base, **overrides})
    elif args.recipe:
        cfg = harness.recipe(args.recipe, **overrides)
    else:
        raise ConfigError("sweep needs --config or --recipe")
    if args.data_dir and cfg.source.get("kind") in ("mnist", "gist"):
        cfg.source = {**cfg.source, "dir": args.data_dir}
    points = harness.run_sweep(cfg)
    if not cfg.out:
        sys.stdout.write(harness.results_csv(points))
    return 0


def cmd_alloc_report(args):
    spectrum, _ = _spectrum_from_args(args)
    _emit(harness.emit_allocation_report(spectrum, args.lam, args.target_distortion), args.out)
    return 0


def cmd_slb(args):
    spectrum, name = _spectrum_from_args(args)
    if not args.rate_grid:
        raise ConfigError("slb needs --rate-grid")
    points = slb_curve(spectrum, args.rate_grid, dataset=name)
    _emit(harness.results_csv(points), args.out)
    return 0


def cmd_train(args):
    data = load_matrix(args.data)
    if args.method == "stc":
        if (args.rate is None) == (args.lam is None):
            raise ConfigError("stc needs exactly one of --rate or --lambda")
        model = train_single_layer(data, args.rate, lam=args.lam, variance_holdout=args.variance_holdout,
                                   eig_method=args.eig_solver)
    elif args.method == "mlstc":
        if not args.layer_rate:
            raise ConfigError("mlstc needs --layer-rate")
        rates = args.layer_rate[0] if len(args.layer_rate) == 1 else args.layer_rate
        layers = args.layers if len(args.layer_rate) == 1 else len(args.layer_rate)
        model = train_ml(data, rates, layers, variance_holdout=args.variance_holdout, eig_method=args.eig_solver)
    else:
        if args.rate is None:
            raise ConfigError(f"{args.method} needs --rate (bits per dimension)")
        bits = int(round(args.rate * data.shape[0]))
        if args.method == "pcah":
            model = train_pca_hash(data, bits, variance_holdout=args.variance_holdout, eig_method=args.eig_solver)
        else:
            model = train_lsh(data, bits, seed=args.seed)
    save_model(args.out, model)
    log.info("wrote %s", args.out)
    return 0


def _ternary_model(path):
    model = load_model(path)
    if not isinstance(model, MLModel):
        raise ConfigError(f"{path} holds a {type(model).__name__}; encode/decode work on ternary models")
    return model


def cmd_encode(args):
    model = _ternary_model(args.model)
    data = load_matrix(args.data)
    if data.shape[0] != model.n:
        raise DataError(f"data has dimension {data.shape[0]}, model expects {model.n}")
    save_codes(args.out, [encode_ml(model, data[:, j]) for j in range(data.shape[1])])
    return 0


def cmd_decode(args):
    model = _ternary_model(args.model)
    codes = load_codes(args.codes)
    L = model.num_layers if args.layers is None else args.layers
    if not 1 <= L <= model.num_layers:
        raise ConfigError(f"--layers must lie in [1, {model.num_layers}]")
    dense = []
    for layer_idx in range(model.num_layers):
        mat = np.zeros((model.n, len(codes)), dtype=np.int8)
        for j, per_vector in enumerate(codes):
            if len(per_vector) != model.num_layers:
                raise DataError(f"vector {j} carries {len(per_vector)} layers, model has {model.num_layers}")
            mat[:, j] = per_vector[layer_idx].to_dense(model.n)
        dense.append(mat)
    save_matrix(args.out, decode_ml_matrix(model, dense, L))
    return 0


def cmd_inspect(args):
    model = load_model(args.model)
    if isinstance(model, MLModel):
        info = {
            "type": "ternary",
            "n": model.n,
            "layers": model.num_layers,
            "lambda_schedule": list(model.lambda_schedule),
            "per_layer_rate": [float(r) for r in model.per_layer_rate],
            "total_rate": model.cumulative_rate(model.num_layers),
            "expected_distortion": [layer.expected_distortion() for layer in model.layers],
        }
    else:
        info = {"type": type(model).__name__, "n": model.n, "bits": model.bits, "rate": model.rate}
    sys.stdout.write(json.dumps(info, indent=2) + "\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mlstc", description="Sparse ternary codes: training, coding and rate-distortion sweeps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--eig-solver", choices=["jacobi", "lapack"], default="jacobi")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out")

    sp = sub.add_parser("sweep", help="run a rate-distortion sweep")
    sp.add_argument("--config", help="JSON experiment config")
    sp.add_argument("--recipe", choices=sorted(harness.RECIPES))
    sp.add_argument("--methods", type=lambda s: [m for m in s.split(",") if m])
    sp.add_argument("--rate-grid", type=_floats)
    sp.add_argument("--lambda-grid", type=_floats)
    sp.add_argument("--layer-rate", type=_floats)
    sp.add_argument("--layers", type=int)
    sp.add_argument("--variance-holdout", type=float)
    sp.add_argument("--data-dir", help="directory holding MNIST or GIST files")
    common(sp)
    sp.set_defaults(func=cmd_sweep, eig_solver=None)

    def spectrum_args(sp):
        sp.add_argument("--source", choices=["iid", "ar1"], default="iid")
        sp.add_argument("--n", type=int, default=500)
        sp.add_argument("--rho", type=float, default=0.0)
        sp.add_argument("--data", help="estimate the spectrum from a data file instead")

    sp = sub.add_parser("alloc-report", help="per-dimension ternary allocation against water-filling")
    spectrum_args(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--target-distortion", type=float)
    common(sp)
    sp.set_defaults(func=cmd_alloc_report)

    sp = sub.add_parser("slb", help="Gaussian Shannon lower bound curve")
    spectrum_args(sp)
    sp.add_argument("--rate-grid", type=_floats)
    common(sp)
    sp.set_defaults(func=cmd_slb)

    sp = sub.add_parser("train", help="train a model and save it")
    sp.add_argument("--data", required=True)
    sp.add_argument("--method", choices=["stc", "mlstc", "pcah", "lsh"], default="mlstc")
    sp.add_argument("--rate", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--layer-rate", type=_floats)
    sp.add_argument("--layers", type=int, default=1)
    sp.add_argument("--variance-holdout", type=float, default=0.0)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("encode", help="encode data with a ternary model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="reconstruct data from a code file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--codes", required=True)
    sp.add_argument("--layers", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("inspect-model", help="print a model summary as JSON")
    sp.add_argument("model")
    sp.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command != "sweep" and getattr(args, "seed", 0) is None:
        args.seed = 0
    try:
        if args.command == "train" and args.out is None:
            raise ConfigError("train needs --out")
        return args.func(args)
    except MLSTCError as e:
        print(f"mlstc: error: {e}", file=sys.stderr)
        return e.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"mlstc: error: {e}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
