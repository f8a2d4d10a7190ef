"""Config-driven benchmark runner and report emission.

A benchmark is described by a JSON config file (full example in the README
and demos/). The pipeline per run is: load or synthesize the dataset,
optionally scrub training chips through normal-data generation, extract
features once, then for each seeded run fit and score each model, convert
score grids to anomaly maps, and compute the image-level (and optionally
pixel-level) metric suite. Run i uses seed base_seed + i; only the
Gaussian-field model consumes it (random channel subselection). The PCA
model is deterministic, so its single result is reused for every run and
its across-run std is exactly 0.

Reports: a machine-readable ``report.json`` (byte-deterministic for a
given config), ``aggregates.csv``, and a markdown table with
"mean ± std" percent cells (best mean per column bolded; deterministic
rows render without ±). Stage wall-clock goes to a separate
``timings.json`` sidecar so the structured report stays deterministic.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluate, features, models, normalgen, synthesize, visualize
from .core import (
    ConfigError,
    Label,
    SampleRecord,
    SarBenchError,
    ValidationError,
    derive_seed,
    make_rng,
)
from .evaluate import MetricsReport, RunAggregate, ScoredSet
from .features import FeatureConfig, FeatureMap
from .ingest import DatasetSplit, load_dataset
from .models import AnomalyMap
from .normalgen import NormalGenConfig, ShadowRule
from .synthesize import SceneConfig, ShadowSpec, TargetSpec

__all__ = [
    "KNOWN_MODELS",
    "SyntheticSpec",
    "BenchConfig",
    "BenchStageError",
    "ModelOutcome",
    "RunReport",
    "load_config",
    "run_benchmark",
    "emit_report",
    "markdown_from_report",
    "report_to_markdown",
    "report_dict",
]

KNOWN_MODELS = ("padim", "dfm")
KNOWN_TASKS = ("image_level", "pixel_level")
REPORT_FORMAT_VERSION = 1


class BenchStageError(SarBenchError):
    """A pipeline stage failed; message carries the stage tag."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except SarBenchError as exc:
        raise BenchStageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the built-in synthetic dataset."""

    n_train: int = 200
    n_test_normal: int = 50
    n_test_anom: int = 50
    height: int = 64
    width: int = 64
    background_mean: float = 0.5
    background_std: float = 0.15
    speckle_looks: int = 36
    target_semi_axes: tuple[float, float] = (7.0, 5.0)
    target_boost: float = 0.45
    shadow_offset: tuple[float, float] = (12.0, 0.0)
    shadow_attenuation: float = 0.7
    seed: int = 7

    def base_scene(self) -> SceneConfig:
        dr, dc = self.shadow_offset
        center = ((self.height - 1 - dr) / 2.0, (self.width - 1 - dc) / 2.0)
        cfg = SceneConfig(
            height=self.height,
            width=self.width,
            background_mean=self.background_mean,
            background_std=self.background_std,
            speckle_looks=self.speckle_looks,
            target=TargetSpec(
                center=center,
                semi_axes=tuple(self.target_semi_axes),
                intensity_boost=self.target_boost,
            ),
            shadow=ShadowSpec(
                offset=tuple(self.shadow_offset),
                attenuation=self.shadow_attenuation,
            ),
        )
        cfg.validate()
        return cfg

    def generate(self) -> DatasetSplit:
        return synthesize.gen_dataset(
            self.n_train,
            self.n_test_normal,
            self.n_test_anom,
            self.base_scene(),
            seed=self.seed,
        )


@dataclass(frozen=True)
class BenchConfig:
    """Validated benchmark description (see load_config for the file form)."""

    name: str = "benchmark"
    dataset_dir: str | None = None
    synthetic: SyntheticSpec | None = None
    models: tuple[str, ...] = ("padim", "dfm")
    runs: int = 5
    base_seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    normalgen: NormalGenConfig | None = None
    tasks: tuple[str, ...] = ("image_level",)
    output_dir: str = "bench_out"
    panels_per_model: int = 4

    def validate(self) -> None:
        if (self.dataset_dir is None) == (self.synthetic is None):
            raise ConfigError(
                "exactly one of dataset.directory or dataset.synthetic required"
            )
        if not self.models:
            raise ConfigError("at least one model required")
        for m in self.models:
            if m not in KNOWN_MODELS:
                raise ConfigError(f"unknown model {m!r}; known: {KNOWN_MODELS}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model names")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.tasks:
            raise ConfigError("at least one task required")
        for t in self.tasks:
            if t not in KNOWN_TASKS:
                raise ConfigError(f"unknown task {t!r}; known: {KNOWN_TASKS}")
        if self.panels_per_model < 0:
            raise ConfigError("panels_per_model must be >= 0")
        self.features.validate()
        if self.normalgen is not None:
            self.normalgen.validate()


@dataclass
class ModelOutcome:
    """Per-model benchmark results: one MetricsReport per run plus the
    across-run aggregate; run-0 anomaly maps and threshold kept for
    rendering."""

    runs: list[MetricsReport]
    aggregate: RunAggregate
    maps_run0: list[AnomalyMap]
    panel_threshold: float


@dataclass
class RunReport:
    """Everything a benchmark produced, aggregate recomputable from runs.

    ``split`` is kept for panel rendering and never serialized.
    """

    name: str
    toolkit_version: str
    config_echo: dict
    model_results: dict[str, ModelOutcome]
    stage_seconds: dict[str, float]
    split: DatasetSplit | None = None


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

def _require_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_synthetic(d: dict) -> SyntheticSpec:
    _require_keys(d, {f.name for f in SyntheticSpec.__dataclass_fields__.values()},
                  "dataset.synthetic")
    kwargs = dict(d)
    for pair_key in ("target_semi_axes", "shadow_offset"):
        if pair_key in kwargs:
            kwargs[pair_key] = tuple(kwargs[pair_key])
    return SyntheticSpec(**kwargs)


def _parse_features(d: dict) -> FeatureConfig:
    _require_keys(d, {"window_sizes", "stride", "select_k"}, "features")
    kwargs = dict(d)
    if "window_sizes" in kwargs:
        kwargs["window_sizes"] = tuple(kwargs["window_sizes"])
    return FeatureConfig(**kwargs)


def _parse_normalgen(d: dict) -> NormalGenConfig:
    _require_keys(
        d,
        {"target_k", "shadow_k", "n_init", "max_iter", "shadow_rule", "seed"},
        "normalgen",
    )
    kwargs = dict(d)
    if "shadow_rule" in kwargs:
        try:
            kwargs["shadow_rule"] = ShadowRule(kwargs["shadow_rule"])
        except ValueError:
            raise ConfigError(
                f"normalgen.shadow_rule must be one of "
                f"{[r.value for r in ShadowRule]}, got {kwargs['shadow_rule']!r}"
            ) from None
    return NormalGenConfig(**kwargs)


def load_config(path: Path | str) -> tuple[BenchConfig, dict]:
    """Parse and validate a JSON benchmark config; returns (config, echo).

    The echo is the raw parsed dict, stored verbatim in reports so a
    report is self-describing.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {
        "name", "dataset", "models", "runs", "base_seed", "features",
        "normalgen", "tasks", "output_dir", "panels_per_model",
    }
    _require_keys(raw, allowed, "config")

    dataset = raw.get("dataset")
    if not isinstance(dataset, dict):
        raise ConfigError('config needs a "dataset" object')
    _require_keys(dataset, {"directory", "synthetic"}, "dataset")
    dataset_dir = dataset.get("directory")
    synthetic = dataset.get("synthetic")
    try:
        cfg = BenchConfig(
            name=raw.get("name", path.stem),
            dataset_dir=dataset_dir,
            synthetic=_parse_synthetic(synthetic) if synthetic is not None else None,
            models=tuple(raw.get("models", KNOWN_MODELS)),
            runs=int(raw.get("runs", 5)),
            base_seed=int(raw.get("base_seed", 0)),
            features=_parse_features(raw.get("features", {})),
            normalgen=(
                _parse_normalgen(raw["normalgen"])
                if raw.get("normalgen") is not None
                else None
            ),
            tasks=tuple(raw.get("tasks", ("image_level",))),
            output_dir=raw.get("output_dir", "bench_out"),
            panels_per_model=int(raw.get("panels_per_model", 4)),
        )
    except TypeError as exc:
        raise ConfigError(f"config field error: {exc}") from None
    cfg.validate()
    return cfg, raw


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def _scrub_training_chips(
    split: DatasetSplit, ng: NormalGenConfig
) -> DatasetSplit:
    """Run normal-data generation over every training chip (seed derived
    per chip index from the normalgen seed, fixed across runs)."""
    scrubbed = []
    for idx, rec in enumerate(split.train):
        rng = make_rng(derive_seed(ng.seed, idx))
        chip = normalgen.generate_normal_chip(rec.image, ng, rng)
        scrubbed.append(replace(rec, image=chip.normal))
    return DatasetSplit(name=split.name, train=scrubbed, test=list(split.test))


def _image_level_report(
    test: list[SampleRecord], maps: list[AnomalyMap]
) -> MetricsReport:
    scores = np.array([models.image_score(m) for m in maps])
    labels = np.array([1 if r.label is Label.ANOMALOUS else 0 for r in test])
    s = ScoredSet(scores, labels)
    if s.n_positive == 0 or s.n_negative == 0:
        warnings.warn(
            "test set has a single class; AUC metrics unavailable and the "
            "threshold falls back to the max score"
        )
        report = evaluate.classification_metrics(s, float(scores.max()))
        return report
    thr = evaluate.f1_opt_threshold(s)
    report = evaluate.classification_metrics(s, thr.threshold)
    return replace(report, roc_auc=evaluate.roc_auc(s), pr_auc=evaluate.pr_auc(s))


def _pixel_truths(
    test: list[SampleRecord], maps: list[AnomalyMap]
) -> tuple[list[AnomalyMap], list[np.ndarray]]:
    """Pair each map with its truth mask; normals count as all-false,
    anomalous records without a mask are skipped with a warning."""
    kept_maps: list[AnomalyMap] = []
    truths: list[np.ndarray] = []
    skipped = 0
    for rec, amap in zip(test, maps):
        if rec.label is Label.ANOMALOUS:
            if rec.mask is None:
                skipped += 1
                continue
            truths.append(rec.mask)
        else:
            truths.append(
                rec.mask
                if rec.mask is not None
                else np.zeros(rec.image.shape, dtype=bool)
            )
        kept_maps.append(amap)
    if skipped:
        warnings.warn(
            f"pixel metrics: skipped {skipped} anomalous image(s) without "
            "ground-truth masks"
        )
    return kept_maps, truths


def _with_pixel_metrics(
    report: MetricsReport, test: list[SampleRecord], maps: list[AnomalyMap]
) -> tuple[MetricsReport, float | None]:
    kept, truths = _pixel_truths(test, maps)
    try:
        pm = evaluate.pixel_metrics(kept, truths)
    except SarBenchError as exc:
        warnings.warn(f"pixel metrics not computable: {exc}")
        return report, None
    return (
        replace(report, pixel_auroc=pm.pixel_auroc, pixel_f1=pm.pixel_f1),
        pm.threshold,
    )


def _score_model(
    kind: str,
    run_seed: int,
    cfg: BenchConfig,
    train_fm: list[FeatureMap],
    test_fm: list[FeatureMap],
    test: list[SampleRecord],
) -> tuple[MetricsReport, list[AnomalyMap], float | None]:
    """Fit and score one model for one run; returns (report, maps,
    pixel threshold or None)."""
    if kind == "padim":
        channels = train_fm[0].channels
        k = cfg.features.select_k or features.default_select_k(channels)
        idx = features.sample_channel_indices(channels, k, make_rng(run_seed))
        train_sel = [features.take_channels(f, idx) for f in train_fm]
        test_sel = [features.take_channels(f, idx) for f in test_fm]
        fitted = models.padim_fit(train_sel)
        grids = [models.padim_score(fitted, f) for f in test_sel]
    elif kind == "dfm":
        fitted = models.dfm_fit(train_fm)
        grids = [models.dfm_score(fitted, f) for f in test_fm]
    else:
        raise ConfigError(f"unknown model {kind!r}")

    maps = [
        models.postprocess_map(grid, rec.image.shape, image_id=rec.id)
        for grid, rec in zip(grids, test)
    ]
    report = _image_level_report(test, maps)
    pixel_threshold = None
    if "pixel_level" in cfg.tasks:
        report, pixel_threshold = _with_pixel_metrics(report, test, maps)
    return report, maps, pixel_threshold


def run_benchmark(cfg: BenchConfig, config_echo: dict | None = None) -> RunReport:
    """Execute the full benchmark described by ``cfg``.

    Deterministic end to end: run i is seeded with base_seed + i, and a
    1-run benchmark at base_seed + i reproduces run i exactly.
    """
    cfg.validate()
    timings: dict[str, float] = {}

    with _stage("data", timings):
        if cfg.dataset_dir is not None:
            split = load_dataset(cfg.dataset_dir)
        else:
            split = cfg.synthetic.generate()
        if not split.train:
            raise ConfigError("empty training set")
        if not split.test:
            raise ConfigError("empty test set")

    if cfg.normalgen is not None:
        with _stage("normalgen", timings):
            split = _scrub_training_chips(split, cfg.normalgen)

    with _stage("features", timings):
        train_fm = [features.extract_features(r.image, cfg.features) for r in split.train]
        test_fm = [features.extract_features(r.image, cfg.features) for r in split.test]

    model_results: dict[str, ModelOutcome] = {}
    for kind in cfg.models:
        with _stage(f"model:{kind}", timings):
            reports: list[MetricsReport] = []
            maps_run0: list[AnomalyMap] = []
            panel_threshold = 0.0
            if kind == "dfm":
                # deterministic: computed once, reused for every run
                report, maps, px_thr = _score_model(
                    kind, cfg.base_seed, cfg, train_fm, test_fm, split.test
                )
                reports = [report] * cfg.runs
                maps_run0 = maps
                panel_threshold = px_thr if px_thr is not None else report.threshold
            else:
                for i in range(cfg.runs):
                    report, maps, px_thr = _score_model(
                        kind, cfg.base_seed + i, cfg, train_fm, test_fm, split.test
                    )
                    reports.append(report)
                    if i == 0:
                        maps_run0 = maps
                        panel_threshold = (
                            px_thr if px_thr is not None else report.threshold
                        )
            model_results[kind] = ModelOutcome(
                runs=reports,
                aggregate=evaluate.aggregate_runs(reports),
                maps_run0=maps_run0,
                panel_threshold=panel_threshold,
            )

    return RunReport(
        name=cfg.name,
        toolkit_version=_toolkit_version(),
        config_echo=config_echo if config_echo is not None else _echo_from_config(cfg),
        model_results=model_results,
        stage_seconds=timings,
        split=split,
    )


def _toolkit_version() -> str:
    from . import __version__

    return __version__


def _echo_from_config(cfg: BenchConfig) -> dict:
    """Best-effort config echo for benchmarks built programmatically."""
    echo: dict = {
        "name": cfg.name,
        "models": list(cfg.models),
        "runs": cfg.runs,
        "base_seed": cfg.base_seed,
        "tasks": list(cfg.tasks),
        "output_dir": cfg.output_dir,
        "panels_per_model": cfg.panels_per_model,
        "features": {
            "window_sizes": list(cfg.features.window_sizes),
            "stride": cfg.features.stride,
            "select_k": cfg.features.select_k,
        },
    }
    if cfg.dataset_dir is not None:
        echo["dataset"] = {"directory": cfg.dataset_dir}
    else:
        s = cfg.synthetic
        echo["dataset"] = {
            "synthetic": {
                "n_train": s.n_train,
                "n_test_normal": s.n_test_normal,
                "n_test_anom": s.n_test_anom,
                "height": s.height,
                "width": s.width,
                "background_mean": s.background_mean,
                "background_std": s.background_std,
                "speckle_looks": s.speckle_looks,
                "target_semi_axes": list(s.target_semi_axes),
                "target_boost": s.target_boost,
                "shadow_offset": list(s.shadow_offset),
                "shadow_attenuation": s.shadow_attenuation,
                "seed": s.seed,
            }
        }
    if cfg.normalgen is not None:
        ng = cfg.normalgen
        echo["normalgen"] = {
            "target_k": ng.target_k,
            "shadow_k": ng.shadow_k,
            "n_init": ng.n_init,
            "max_iter": ng.max_iter,
            "shadow_rule": ng.shadow_rule.value,
            "seed": ng.seed,
        }
    return echo


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def report_dict(report: RunReport) -> dict:
    """The deterministic structured form of a report (no wall-clock)."""
    out = {
        "format_version": REPORT_FORMAT_VERSION,
        "name": report.name,
        "toolkit_version": report.toolkit_version,
        "config": report.config_echo,
        "models": {},
    }
    for kind, outcome in report.model_results.items():
        runs = []
        for r in outcome.runs:
            d = r.as_dict()
            d["threshold"] = r.threshold
            runs.append(d)
        out["models"][kind] = {
            "runs": runs,
            "aggregate": {
                "mean": outcome.aggregate.mean,
                "std": outcome.aggregate.std,
                "runs": outcome.aggregate.runs,
            },
        }
    return out


def _format_cell(mean: float, std: float) -> str:
    cell = f"{mean * 100.0:.2f}"
    if std > 0.0:
        cell += f" ± {std * 100.0:.2f}"
    return cell


def report_to_markdown(data: dict) -> str:
    """Markdown aggregate table, a pure function of the structured report.

    Percent cells with 2 decimals, "mean ± std" where std is nonzero, and
    the best mean per column bolded (ties all bolded).
    """
    # sorted so the table matches the sort_keys-serialized report file
    model_names = sorted(data["models"])
    metric_names = [
        m
        for m in evaluate.METRIC_FIELDS
        if any(
            m in data["models"][k]["aggregate"]["mean"] for k in model_names
        )
    ]
    lines = [
        f"# {data['name']}",
        "",
        "| Model | " + " | ".join(_metric_title(m) for m in metric_names) + " |",
        "|" + "---|" * (len(metric_names) + 1),
    ]
    best: dict[str, float] = {}
    for m in metric_names:
        values = [
            data["models"][k]["aggregate"]["mean"].get(m)
            for k in model_names
        ]
        values = [v for v in values if v is not None]
        if values:
            best[m] = max(values)
    for kind in model_names:
        agg = data["models"][kind]["aggregate"]
        row = [kind]
        for m in metric_names:
            if m not in agg["mean"]:
                row.append("—")
                continue
            cell = _format_cell(agg["mean"][m], agg["std"].get(m, 0.0))
            if agg["mean"][m] == best.get(m):
                cell = f"**{cell}**"
            row.append(cell)
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)


def _metric_title(name: str) -> str:
    titles = {
        "accuracy": "Accuracy (%)",
        "precision": "Precision (%)",
        "recall": "Recall (%)",
        "f1": "F1-Score (%)",
        "roc_auc": "ROC AUC (%)",
        "pr_auc": "PR AUC (%)",
        "pixel_auroc": "Pixel AUROC (%)",
        "pixel_f1": "Pixel F1 (%)",
    }
    return titles.get(name, name)


def _aggregates_csv(data: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "metric", "mean", "std", "runs"])
    for kind, entry in data["models"].items():
        agg = entry["aggregate"]
        for metric in evaluate.METRIC_FIELDS:
            if metric in agg["mean"]:
                writer.writerow(
                    [kind, metric, repr(agg["mean"][metric]), repr(agg["std"][metric]),
                     agg["runs"]]
                )
    return buf.getvalue()


def emit_report(report: RunReport, outdir: Path | str) -> dict[str, Path]:
    """Write report.json, aggregates.csv, report.md, and timings.json.

    Everything except timings.json is byte-deterministic for a given
    config. Returns the written paths keyed by artifact name.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        rd = report_dict(report)
        paths = {
            "report": outdir / "report.json",
            "csv": outdir / "aggregates.csv",
            "markdown": outdir / "report.md",
            "timings": outdir / "timings.json",
        }
        paths["report"].write_text(json.dumps(rd, sort_keys=True, indent=2) + "\n")
        paths["csv"].write_text(_aggregates_csv(rd))
        paths["markdown"].write_text(report_to_markdown(rd))
        paths["timings"].write_text(
            json.dumps(report.stage_seconds, sort_keys=True, indent=2) + "\n"
        )
    except OSError as exc:
        raise BenchStageError("emit", exc) from exc
    return paths


def markdown_from_report(report_path: Path | str) -> str:
    """Regenerate the markdown table offline from a report.json file."""
    return report_to_markdown(json.loads(Path(report_path).read_text()))


def render_panels(report: RunReport, outdir: Path | str, limit: int) -> list[Path]:
    """Render result panels for the first ``limit`` test samples per model
    (run-0 maps, pixel threshold when available). File names are
    ``<sample_id>_<model>.png`` with path separators flattened."""
    if report.split is None:
        raise ValidationError("report carries no dataset split to render")
    outdir = Path(outdir)
    written: list[Path] = []
    for kind, outcome in report.model_results.items():
        for rec, amap in list(zip(report.split.test, outcome.maps_run0))[:limit]:
            panel = visualize.render_panel(rec, amap, outcome.panel_threshold)
            fname = f"{rec.id.replace('/', '_')}_{kind}.png"
            written.append(visualize.save_panel(panel, outdir / fname))
    return written
