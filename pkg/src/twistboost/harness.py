"""Experiment orchestration: YAML configs, repeated train/test runs over
(algorithm x twister) grids, t-based confidence intervals and deterministic
result files."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from scipy import stats

from .adaptive import estimate_noise
from .boosting import ADABOOST, BoostConfig, fit
from .data import Dataset, SplitPlan, load_csv, schema_to_dicts, split, synth_xd6
from .twisters import TwisterSpec

SCHEMA_VERSION = 1
OUTPUT_ENV = "TWISTBOOST_OUTPUT_DIR"
ALGORITHMS = ("adaboost", "pilboost", "pilboost-adaptive")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    alpha: float | None = None
    a_f: float = 8.0

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; expected one of {ALGORITHMS}")
        if self.name == "pilboost":
            if self.alpha is None:
                raise ConfigError("pilboost needs an alpha")
            a = float(self.alpha)
            if not (a == 1.0 or 1.0 < a < math.inf):
                raise ConfigError(f"pilboost alpha must be 1 or > 1, got {a}")
            object.__setattr__(self, "alpha", a)
        if not self.a_f > 0:
            raise ConfigError("a_f must be positive")

    @property
    def label(self) -> str:
        if self.name == "pilboost":
            return f"pilboost(alpha={self.alpha:g})"
        return self.name


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "xd6"
    m: int = 973
    seed: int = 0
    path: str | None = None
    label_column: str | None = None
    positive_label: str | None = None
    schema: tuple = ()
    name: str | None = None

    def load(self, base: Path | None = None) -> Dataset:
        if self.kind == "xd6":
            return synth_xd6(self.m, self.seed)
        if self.kind == "csv":
            # relative paths are taken from the config file's directory
            p = Path(self.path)
            if not p.is_absolute() and base is not None:
                p = base / p
            return load_csv(p, self.schema, self.label_column, self.positive_label, self.name)
        raise ConfigError(f"unknown dataset kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetSpec
    split: SplitPlan
    twisters: tuple[TwisterSpec, ...]
    algorithms: tuple[AlgorithmSpec, ...]
    T: int = 1000
    tree_depth: int = 3
    M: float = 1.0
    seed: int = 0
    output: str | None = None
    diagnostics: bool = False
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.twisters or not self.algorithms:
            raise ConfigError("twister and algorithm grids must be nonempty")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | None = None) -> "ExperimentConfig":
        try:
            seed = int(d.get("seed", 0))
            ds = dict(d.get("dataset", {"kind": "xd6"}))
            ds["schema"] = tuple(ds.get("schema", ()))
            sp = d.get("split", {})
            boost = d.get("boost", {})
            return cls(
                name=str(d.get("name", "experiment")),
                dataset=DatasetSpec(**ds),
                split=SplitPlan(float(sp.get("train_fraction", 0.7)), int(sp.get("folds", 10)), seed),
                twisters=tuple(TwisterSpec(**t) for t in d.get("twisters", [{"kind": "none"}])),
                algorithms=tuple(AlgorithmSpec(**a) for a in d.get("algorithms", [])),
                T=int(boost.get("T", 1000)),
                tree_depth=int(boost.get("tree_depth", 3)),
                M=float(boost.get("M", 1.0)),
                seed=seed,
                output=d.get("output"),
                diagnostics=bool(boost.get("diagnostics", False)),
                base_dir=base_dir,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, AttributeError) as e:
            raise ConfigError(f"malformed config: {e}") from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw, str(path.resolve().parent))

    def boost_config(self, alg: AlgorithmSpec, alpha=None) -> BoostConfig:
        a = ADABOOST if alg.name == "adaboost" else (alg.alpha if alpha is None else alpha)
        return BoostConfig(T=self.T, a_f=alg.a_f, alpha=a, tree_depth=self.tree_depth,
                           M=self.M, rng_seed=self.seed, diagnostics=self.diagnostics)

    def resolve_output(self, override=None) -> Path:
        if override:
            return Path(override)
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, "results")) / self.name


def t_confidence(values, level: float = 0.95) -> float:
    """Half-width ``t_{(1+level)/2, n-1} * s / sqrt(n)``; NaN for fewer than two values."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return math.nan
    s = v.std(ddof=1)
    return float(stats.t.ppf(0.5 + level / 2.0, v.size - 1) * s / math.sqrt(v.size))


@dataclass
class RunResult:
    dataset: str
    algorithm: str
    alpha: float | None
    a_f: float
    twister: dict
    accuracies: list[float] = field(default_factory=list)
    importance: list[float] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)
    diagnostics: list = field(default_factory=list, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else math.nan

    @property
    def ci(self) -> float:
        return t_confidence(self.accuracies)

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    def key(self):
        return (self.dataset, self.twister["kind"], self.twister["p"], self.algorithm)

    def to_record(self) -> dict:
        return {
            "dataset": self.dataset,
            "algorithm": self.algorithm,
            "alpha": self.alpha,
            "a_f": self.a_f,
            "twister": self.twister,
            "accuracies": [float(a) for a in self.accuracies],
            "mean": _num(self.mean),
            "ci95": _num(self.ci),
            "folds": len(self.accuracies),
            "importance": [float(x) for x in self.importance],
            "extras": self.extras,
            "partial": self.partial,
            "errors": self.errors,
        }


def _num(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def run_experiment(config: ExperimentConfig, folds: int | None = None,
                   dataset: Dataset | None = None) -> list[RunResult]:
    """Split, twist the training part, (estimate alpha), fit and score on the clean test part."""
    base = Path(config.base_dir) if config.base_dir else None
    ds = dataset if dataset is not None else config.dataset.load(base)
    n_folds = config.split.folds if folds is None else min(folds, config.split.folds)
    results: dict[tuple, RunResult] = {}
    for ti, tw in enumerate(config.twisters):
        for alg in config.algorithms:
            results[(ti, alg)] = RunResult(ds.name, alg.label, alg.alpha, alg.a_f, tw.as_dict())
    for fold in range(n_folds):
        train, test = split(ds, config.split, fold)
        test_fp = test.fingerprint
        for ti, tw in enumerate(config.twisters):
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, fold, ti]))
            try:
                twisted = tw.apply(train, rng)
            except Exception as e:  # the twist failed, so every algorithm misses this fold
                for alg in config.algorithms:
                    results[(ti, alg)].errors.append(f"fold {fold}: {type(e).__name__}: {e}")
                continue
            estimate = None
            for alg in config.algorithms:
                res = results[(ti, alg)]
                try:
                    alpha = None
                    if alg.name == "pilboost-adaptive":
                        if estimate is None:
                            estimate = estimate_noise(twisted)
                        alpha = estimate.alpha0
                        res.extras.setdefault("p_hat", []).append(estimate.p_hat)
                        res.extras.setdefault("alpha0", []).append(alpha)
                    ens, diag = fit(twisted, config.boost_config(alg, alpha))
                    if test.fingerprint != test_fp:
                        raise RuntimeError("test split changed during training")
                    res.accuracies.append(ens.accuracy(test))
                    imp = ens.feature_importance()
                    res.importance = (list(imp) if not res.importance
                                      else list(np.asarray(res.importance) + imp))
                    if config.diagnostics:
                        res.extras.setdefault("mean_zeta", []).append(diag.summary()["mean_zeta"])
                        res.diagnostics.append((fold, diag))
                except Exception as e:  # a failing fold marks the run partial, others continue
                    res.errors.append(f"fold {fold}: {type(e).__name__}: {e}")
    out = []
    for res in results.values():
        if res.importance:
            imp = np.asarray(res.importance)
            res.importance = list(imp / imp.sum()) if imp.sum() > 0 else list(imp)
        out.append(res)
    return sorted(out, key=lambda r: (r.key(), json.dumps(r.twister, sort_keys=True)))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and not math.isfinite(x)) else repr(float(x))


def emit_results(results: list[RunResult], path, config: ExperimentConfig | None = None,
                 feature_names: list[str] | None = None) -> dict[str, Path]:
    """Write ``results.json``, ``curves.csv`` and ``importance.csv`` under ``path``."""
    if not results:
        raise ValueError("nothing to emit")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e}") from e
    results = sorted(results, key=lambda r: (r.key(), json.dumps(r.twister, sort_keys=True)))
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "results": [r.to_record() for r in results]}
    if config is not None:
        doc["config"] = {
            "name": config.name, "seed": config.seed, "T": config.T, "tree_depth": config.tree_depth,
            "M": config.M, "train_fraction": config.split.train_fraction, "folds": config.split.folds,
        }
    files = {
        "results": out / "results.json",
        "curves": out / "curves.csv",
        "importance": out / "importance.csv",
    }
    files["results"].write_text(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n",
                                encoding="utf-8")
    curve_rows = [[r.dataset, r.algorithm, r.twister["kind"], _fmt(r.twister["p"]), _fmt(r.mean),
                   _fmt(r.ci), len(r.accuracies)] for r in results]
    files["curves"].write_text(_csv_text(
        ["dataset", "algorithm", "twister", "p", "mean", "ci95", "folds"], curve_rows), encoding="utf-8")
    imp_rows = []
    for r in results:
        for j, v in enumerate(r.importance):
            name = feature_names[j] if feature_names else f"f{j}"
            imp_rows.append([r.dataset, r.algorithm, r.twister["kind"], _fmt(r.twister["p"]), name, _fmt(v)])
    files["importance"].write_text(_csv_text(
        ["dataset", "algorithm", "twister", "p", "feature", "importance"], imp_rows), encoding="utf-8")
    diag_dir = out / "diagnostics"
    for r in results:
        for fold, diag in r.diagnostics:
            diag_dir.mkdir(exist_ok=True)
            stem = f"{r.algorithm}_{r.twister['kind']}_{r.twister['p']:g}_fold{fold}"
            stem = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in stem)
            f = diag_dir / f"{stem}.json"
            f.write_text(json.dumps(diag.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
            files[f"diagnostics:{stem}"] = f
    return files


def run_and_emit(config: ExperimentConfig, out=None, folds=None) -> tuple[list[RunResult], dict]:
    base = Path(config.base_dir) if config.base_dir else None
    ds = config.dataset.load(base)
    results = run_experiment(config, folds=folds, dataset=ds)
    files = emit_results(results, config.resolve_output(out), config, [c.name for c in ds.columns])
    return results, files


def format_table(results: list[RunResult]) -> str:
    """Plain-text accuracy table: one row per algorithm, one column per twist level."""
    levels = sorted({(r.twister["kind"], r.twister["p"]) for r in results})
    algs = sorted({r.algorithm for r in results})
    cell = {(r.algorithm, (r.twister["kind"], r.twister["p"])): r for r in results}
    head = ["algorithm"] + [f"{k} p={p:g}" for k, p in levels]
    lines = ["\t".join(head)]
    for a in algs:
        row = [a]
        for lv in levels:
            r = cell.get((a, lv))
            row.append("-" if r is None else f"{r.mean:.3f} +/- {0.0 if math.isnan(r.ci) else r.ci:.3f}")
        lines.append("\t".join(row))
    return "\n".join(lines)


def dataset_schema(ds: Dataset) -> list[dict]:
    return schema_to_dicts(ds.columns)
