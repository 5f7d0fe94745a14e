"""Rate-distortion sweeps and report files.

A sweep trains every requested method on the train split, measures
distortion on the test split and returns one :class:`RDPoint` per
(method, operating point). Results are sorted before they are written, and
nothing time- or host-dependent goes into the files, so the same config
and seeds give byte-identical CSV output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import PCAHash, train_lsh, train_pca_hash
from .codec import LayerParams, decode_matrix, decode_ml_matrix, encode_matrix, encode_ml_matrix, train_ml, train_single_layer
from .errors import ConfigError, MLSTCError
from .kernels import eigh, estimate_covariance
from .metrics import RDPoint, empirical_ternary_rate, measure_distortion
from .quantizer import lambda_for_rate
from .slb import single_layer_allocation, slb_curve, waterfill
from .sources import Dataset, SyntheticSpec, generate, load_fvecs, load_gist, load_idx, load_mnist

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "load_source",
    "source_spectrum",
    "run_sweep",
    "write_results",
    "results_csv",
    "emit_allocation_report",
    "RECIPES",
    "recipe",
]

METHODS = ("stc", "mlstc", "pcah", "lsh", "slb")


@dataclass
class ExperimentConfig:
    """Everything a sweep needs.

    ``source`` is a dict with a ``kind`` key: ``iid`` / ``ar1`` (with ``n``,
    ``N``, optional ``N_test`` and ``rho``), ``mnist`` (``dir``), ``gist``
    (``dir``, ``n_train``, ``n_test``, ``split``), ``fvecs`` or ``idx``
    (``train`` and ``test`` paths).

    ``rate_grid`` drives ``stc`` (via the threshold search), ``pcah``,
    ``lsh`` and ``slb``; ``lambda_grid`` adds explicit-threshold ``stc``
    points. Each entry of ``layer_rates`` is one ``mlstc`` run with that
    uniform per-layer rate and ``layers`` layers; ``layer_schedule`` adds one
    run with an explicit per-layer rate list.
    """

    source: dict
    methods: list
    rate_grid: list = field(default_factory=list)
    lambda_grid: list = field(default_factory=list)
    layer_rates: list = field(default_factory=list)
    layer_schedule: list = field(default_factory=list)
    layers: int = 1
    seed: int = 0
    variance_holdout: float = 0.5
    eig_method: str = "jacobi"
    out: str | None = None

    def validate(self):
        if not self.methods:
            raise ConfigError("at least one method is required")
        unknown = sorted(set(self.methods) - set(METHODS))
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if "kind" not in self.source:
            raise ConfigError("source needs a 'kind'")
        needs_grid = {"pcah", "lsh", "slb"} & set(self.methods)
        if needs_grid and not self.rate_grid:
            raise ConfigError(f"{sorted(needs_grid)} need a non-empty rate_grid")
        if "stc" in self.methods and not (self.rate_grid or self.lambda_grid):
            raise ConfigError("stc needs rate_grid or lambda_grid")
        if "mlstc" in self.methods and not (self.layer_rates or self.layer_schedule):
            raise ConfigError("mlstc needs layer_rates or layer_schedule")
        if "mlstc" in self.methods and self.layer_rates and self.layers < 1:
            raise ConfigError("layers must be at least 1")
        if any(not r > 0 for r in self.rate_grid + self.layer_rates + self.layer_schedule):
            raise ConfigError("rates must be positive")
        if any(l < 0 for l in self.lambda_grid):
            raise ConfigError("thresholds must be non-negative")
        return self

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d).validate()
        except TypeError as e:
            raise ConfigError(f"bad config: {e}") from e

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)


def load_source(source: dict, seed=0) -> tuple[Dataset, SyntheticSpec | None]:
    kind = source["kind"]
    if kind in ("iid", "ar1"):
        try:
            spec = SyntheticSpec(
                kind=kind,
                n=int(source["n"]),
                N=int(source["N"]),
                rho=float(source.get("rho", 0.0)),
                seed=int(source.get("seed", seed)),
                N_test=source.get("N_test"),
            )
        except KeyError as e:
            raise ConfigError(f"synthetic source needs {e}") from e
        return generate(spec), spec
    if kind == "mnist":
        return load_mnist(source["dir"], source.get("max_train"), source.get("max_test")), None
    if kind == "gist":
        ds = load_gist(
            source["dir"], source.get("n_train", 50_000), source.get("n_test", 10_000), source.get("split", "learn")
        )
        return ds, None
    if kind == "fvecs":
        train = load_fvecs(source["train"], source.get("max_train"))
        test = load_fvecs(source["test"], source.get("max_test"))
        return Dataset(train, test, source.get("name", "fvecs")), None
    if kind == "idx":
        train = load_idx(source["train"])[0]
        test = load_idx(source["test"])[0]
        return Dataset(train, test, source.get("name", "idx")), None
    raise ConfigError(f"unknown source kind {kind!r}")


def source_spectrum(dataset: Dataset, spec: SyntheticSpec | None, eig_method="jacobi"):
    """True covariance spectrum for synthetic sources, sample spectrum otherwise."""
    if spec is not None:
        return spec.spectrum(), "true-spectrum"
    return eigh(estimate_covariance(dataset.train), method=eig_method).eigenvalues, "sample-spectrum"


def _stc_points(cfg, ds, seed):
    base = train_single_layer(ds.train, lam=0.0, variance_holdout=cfg.variance_holdout, eig_method=cfg.eig_method)
    cells = [(f"rate={r!r}", lambda_for_rate(base.sigma**2, r)) for r in cfg.rate_grid]
    cells += [(f"lambda={l!r}", float(l)) for l in cfg.lambda_grid]
    points = []
    for param, lam in cells:
        layer = LayerParams.from_basis(base.projection, base.sigma, lam, base.mean)
        test_codes = encode_matrix(layer, ds.test)
        train_codes = encode_matrix(layer, ds.train)
        points.append(
            RDPoint(
                method="stc",
                rate=layer.rate,
                distortion=measure_distortion(ds.test, decode_matrix(layer, test_codes)),
                layers_used=1,
                lambda_schedule=(lam,),
                dataset=ds.name,
                seed=seed,
                rate_analytic=layer.rate,
                rate_empirical=empirical_ternary_rate(test_codes),
                distortion_theory=layer.expected_distortion(),
                distortion_train=measure_distortion(ds.train, decode_matrix(layer, train_codes)),
                param=param,
            )
        )
    return points


def _mlstc_points(cfg, ds, seed):
    runs = [(f"layer_rate={r!r}", r, cfg.layers) for r in cfg.layer_rates]
    if cfg.layer_schedule:
        runs.append(("schedule=" + ";".join(repr(r) for r in cfg.layer_schedule), list(cfg.layer_schedule), len(cfg.layer_schedule)))
    points = []
    for param, rates, L in runs:
        model = train_ml(ds.train, rates, L, variance_holdout=cfg.variance_holdout, eig_method=cfg.eig_method)
        test_codes = encode_ml_matrix(model, ds.test)
        train_codes = encode_ml_matrix(model, ds.train)
        emp = np.cumsum([empirical_ternary_rate(c) for c in test_codes])
        for k in range(1, model.num_layers + 1):
            points.append(
                RDPoint(
                    method="mlstc",
                    rate=model.cumulative_rate(k),
                    distortion=measure_distortion(ds.test, decode_ml_matrix(model, test_codes, k)),
                    layers_used=k,
                    lambda_schedule=model.lambda_schedule[:k],
                    dataset=ds.name,
                    seed=seed,
                    rate_analytic=model.cumulative_rate(k),
                    rate_empirical=float(emp[k - 1]),
                    distortion_theory=model.layers[k - 1].expected_distortion(),
                    distortion_train=measure_distortion(ds.train, decode_ml_matrix(model, train_codes, k)),
                    param=param,
                )
            )
    return points


def _bits_for(rate, n):
    bits = int(round(rate * n))
    if not 1 <= bits:
        raise ConfigError(f"rate {rate} gives no bits at n={n}")
    return bits


def _pcah_points(cfg, ds, seed):
    n = ds.n
    full = train_pca_hash(ds.train, n, variance_holdout=cfg.variance_holdout, eig_method=cfg.eig_method)
    points = []
    for r in cfg.rate_grid:
        k = _bits_for(r, n)
        if k > n:
            # there are only n principal directions; the shared grid may go higher for other methods
            log.warning("pcah: skipping rate %r, above 1 bit/dim", r)
            continue
        model = PCAHash(full.mean, full.projection[:k], full.beta[:k], full.sigma[:k])
        points.append(
            RDPoint(
                method="pcah",
                rate=model.rate,
                distortion=measure_distortion(ds.test, model.decode(model.encode(ds.test))),
                layers_used=1,
                dataset=ds.name,
                seed=seed,
                rate_empirical=model.rate,
                distortion_train=measure_distortion(ds.train, model.decode(model.encode(ds.train))),
                param=f"bits={k}",
            )
        )
    return points


def _lsh_points(cfg, ds, seed):
    points = []
    for r in cfg.rate_grid:
        k = _bits_for(r, ds.n)
        model = train_lsh(ds.train, k, seed=seed)
        points.append(
            RDPoint(
                method="lsh",
                rate=model.rate,
                distortion=measure_distortion(ds.test, model.decode(model.encode(ds.test))),
                layers_used=1,
                dataset=ds.name,
                seed=seed,
                rate_empirical=model.rate,
                distortion_train=measure_distortion(ds.train, model.decode(model.encode(ds.train))),
                param=f"bits={k}",
            )
        )
    return points


def _slb_points(cfg, ds, seed, spec):
    spectrum, label = source_spectrum(ds, spec, cfg.eig_method)
    return [
        RDPoint(**{**asdict(p), "param": label, "rate_analytic": p.rate})
        for p in slb_curve(spectrum, cfg.rate_grid, dataset=ds.name, seed=seed)
    ]


def run_sweep(config: ExperimentConfig, dataset: Dataset | None = None) -> list[RDPoint]:
    """Run every method in ``config`` and return the sorted points.

    Writes ``<out>.csv`` and ``<out>.json`` when ``config.out`` is set. A
    pre-loaded ``dataset`` skips loading the configured source (the SLB then
    uses the sample spectrum).
    """
    config.validate()
    spec = None
    if dataset is None:
        dataset, spec = load_source(config.source, config.seed)
    points = []
    for method in config.methods:
        log.info("running %s on %s", method, dataset.name)
        try:
            if method == "stc":
                points += _stc_points(config, dataset, config.seed)
            elif method == "mlstc":
                points += _mlstc_points(config, dataset, config.seed)
            elif method == "pcah":
                points += _pcah_points(config, dataset, config.seed)
            elif method == "lsh":
                points += _lsh_points(config, dataset, config.seed)
            elif method == "slb":
                points += _slb_points(config, dataset, config.seed, spec)
        except MLSTCError as e:
            raise type(e)(f"method {method!r} on {dataset.name!r}: {e}") from e
    points.sort(key=RDPoint.sort_key)
    if config.out:
        write_results(points, config.out, config)
    return points


def results_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RDPoint.columns(), lineterminator="\n")
    writer.writeheader()
    for p in points:
        writer.writerow(p.as_row())
    return buf.getvalue()


def write_results(points, out, config: ExperimentConfig | None = None):
    """Write ``<out>.csv`` and, with a config, a ``<out>.json`` sidecar."""
    out = Path(out)
    stem = out.with_suffix("") if out.suffix in (".csv", ".json") else out
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_name(stem.name + ".csv")
    csv_path.write_text(results_csv(points))
    if config is not None:
        # the output location is not part of the experiment, so reruns elsewhere give identical sidecars
        settings = {k: v for k, v in config.to_dict().items() if k != "out"}
        sidecar = {"config": settings, "columns": RDPoint.columns(), "rows": len(points)}
        stem.with_name(stem.name + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path


def emit_allocation_report(spectrum, lam, target_distortion=None) -> str:
    """Per-dimension rate/distortion of one ternary layer next to the water-filling optimum.

    The water-filling side is solved at ``target_distortion`` (per-dim MSE),
    defaulting to the layer's own mean distortion so both columns describe
    the same operating point. Returns CSV text.
    """
    s = np.asarray(spectrum, dtype=float)
    stc = single_layer_allocation(s, lam)
    target = float(stc[:, 1].mean()) if target_distortion is None else float(target_distortion)
    wf = waterfill(s, target)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "sigma2", "stc_rate", "stc_distortion", "waterfill_rate", "waterfill_distortion"])
    for i in range(s.size):
        w.writerow([i, repr(float(s[i])), repr(float(stc[i, 0])), repr(float(stc[i, 1])),
                    repr(float(wf.per_dim_rate[i])), repr(float(wf.per_dim_distortion[i]))])
    return buf.getvalue()


_SYNTH = {"n": 500, "N": 10_000, "N_test": 10_000}
_LAMBDAS = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5]

RECIPES = {
    # single layer: theory against simulation plus the Gaussian bound
    "single-iid": dict(source={"kind": "iid", **_SYNTH}, methods=["stc", "slb"], lambda_grid=_LAMBDAS,
                     rate_grid=[0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]),
    "single-ar1-0.5": dict(source={"kind": "ar1", "rho": 0.5, **_SYNTH}, methods=["stc", "slb"], lambda_grid=_LAMBDAS,
                         rate_grid=[0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]),
    "single-ar1-0.9": dict(source={"kind": "ar1", "rho": 0.9, **_SYNTH}, methods=["stc", "slb"], lambda_grid=_LAMBDAS,
                         rate_grid=[0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]),
    # multi-layer
    "multi-iid": dict(source={"kind": "iid", **_SYNTH}, methods=["mlstc", "slb"], layer_rates=[0.25], layers=12,
                     rate_grid=[0.25 * k for k in range(1, 13)]),
    "multi-ar1-0.5": dict(source={"kind": "ar1", "rho": 0.5, **_SYNTH}, methods=["mlstc", "slb"], layer_rates=[0.25],
                         layers=12, rate_grid=[0.25 * k for k in range(1, 13)]),
    "multi-ar1-0.9": dict(source={"kind": "ar1", "rho": 0.9, **_SYNTH}, methods=["mlstc", "slb"], layer_rates=[0.25],
                         layers=12, rate_grid=[0.25 * k for k in range(1, 13)]),
    # database compression
    "db-mnist": dict(source={"kind": "mnist", "dir": "data/mnist"}, methods=["mlstc", "pcah", "lsh"],
                       layer_rates=[0.1], layers=10, rate_grid=[0.1, 0.2, 0.4, 0.6, 0.8, 1.0]),
    "db-gist": dict(source={"kind": "gist", "dir": "data/gist", "n_train": 50_000, "n_test": 10_000},
                      methods=["mlstc", "pcah", "lsh"], layer_rates=[0.1], layers=10,
                      rate_grid=[0.1, 0.2, 0.4, 0.6, 0.8, 1.0]),
}


def recipe(name, **overrides) -> ExperimentConfig:
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}")
    d = {**RECIPES[name], **{k: v for k, v in overrides.items() if v is not None}}
    return ExperimentConfig.from_dict(d)
