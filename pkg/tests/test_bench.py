import json

import numpy as np
import pytest

from sarbench import cli
from sarbench.bench import (
    BenchConfig,
    SyntheticSpec,
    emit_report,
    load_config,
    markdown_from_report,
    render_panels,
    report_dict,
    report_to_markdown,
    run_benchmark,
)
from sarbench.core import ConfigError
from sarbench.features import FeatureConfig
from sarbench.normalgen import NormalGenConfig, ShadowRule

TINY_SPEC = SyntheticSpec(
    n_train=16, n_test_normal=6, n_test_anom=6, height=32, width=32, seed=5
)


def tiny_config(**kw) -> BenchConfig:
    base = dict(
        name="tiny",
        synthetic=TINY_SPEC,
        models=("padim", "dfm"),
        runs=2,
        base_seed=3,
        features=FeatureConfig(window_sizes=(3, 7, 15), stride=4, select_k=6),
        tasks=("image_level", "pixel_level"),
        panels_per_model=2,
    )
    base.update(kw)
    return BenchConfig(**base)


CONFIG_JSON = {
    "name": "from-file",
    "dataset": {
        "synthetic": {
            "n_train": 16, "n_test_normal": 6, "n_test_anom": 6,
            "height": 32, "width": 32, "seed": 5,
        }
    },
    "models": ["padim", "dfm"],
    "runs": 2,
    "base_seed": 3,
    "features": {"window_sizes": [3, 7, 15], "stride": 4, "select_k": 6},
    "tasks": ["image_level", "pixel_level"],
    "output_dir": "out",
    "panels_per_model": 1,
}


class TestConfig:
    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(CONFIG_JSON))
        cfg, echo = load_config(path)
        assert cfg.name == "from-file"
        assert cfg.synthetic.n_train == 16
        assert cfg.features.select_k == 6
        assert echo == CONFIG_JSON

    def test_unknown_key_rejected(self, tmp_path):
        bad = dict(CONFIG_JSON, typo_key=1)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ConfigError, match="typo_key"):
            load_config(path)

    def test_dataset_must_be_exactly_one_kind(self):
        with pytest.raises(ConfigError, match="exactly one"):
            BenchConfig(dataset_dir="x", synthetic=TINY_SPEC).validate()
        with pytest.raises(ConfigError, match="exactly one"):
            BenchConfig().validate()

    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigError, match="unknown model"):
            tiny_config(models=("padim", "resnet")).validate()

    def test_bad_shadow_rule_message(self, tmp_path):
        bad = dict(CONFIG_JSON, normalgen={"shadow_rule": "weird"})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ConfigError, match="shadow_rule"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")


@pytest.fixture(scope="module")
def tiny_report():
    return run_benchmark(tiny_config())


class TestRunBenchmark:

    def test_dfm_std_exactly_zero(self, tiny_report):
        agg = tiny_report.model_results["dfm"].aggregate
        assert all(v == 0.0 for v in agg.std.values())

    def test_run_count_respected(self, tiny_report):
        for outcome in tiny_report.model_results.values():
            assert len(outcome.runs) == 2

    def test_aggregate_recomputable_from_runs(self, tiny_report):
        for outcome in tiny_report.model_results.values():
            accs = [r.accuracy for r in outcome.runs]
            assert outcome.aggregate.mean["accuracy"] == pytest.approx(
                float(np.mean(accs))
            )
            expected_std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
            assert outcome.aggregate.std["accuracy"] == pytest.approx(expected_std)

    def test_pixel_metrics_present(self, tiny_report):
        for outcome in tiny_report.model_results.values():
            assert outcome.runs[0].pixel_auroc is not None

    def test_seed_derivation_property(self):
        multi = run_benchmark(tiny_config(runs=3))
        single = run_benchmark(tiny_config(runs=1, base_seed=3 + 2))
        assert (
            multi.model_results["padim"].runs[2]
            == single.model_results["padim"].runs[0]
        )

    def test_image_level_only_task(self):
        report = run_benchmark(tiny_config(tasks=("image_level",)))
        assert report.model_results["padim"].runs[0].pixel_auroc is None

    def test_normalgen_prestep_runs(self):
        cfg = tiny_config(
            models=("dfm",),
            runs=1,
            normalgen=NormalGenConfig(
                shadow_rule=ShadowRule.HIGHEST_CENTROID, seed=11
            ),
        )
        report = run_benchmark(cfg)
        assert report.model_results["dfm"].runs[0].accuracy >= 0.0
        assert "normalgen" in report.stage_seconds

    def test_runs_one_gives_zero_std(self):
        report = run_benchmark(tiny_config(runs=1, models=("padim",)))
        agg = report.model_results["padim"].aggregate
        assert all(v == 0.0 for v in agg.std.values())

    def test_maskless_anomalous_skipped_from_pixel_metrics(self, tmp_path):
        from conftest import build_tree

        build_tree(tmp_path, n_train=4, n_test_normal=2, n_test_anom=2, n_masks=1,
                   size=32)
        cfg = tiny_config(synthetic=None, dataset_dir=str(tmp_path),
                          models=("dfm",), runs=1)
        with pytest.warns(UserWarning, match="skipped 1 anomalous"):
            report = run_benchmark(cfg)
        assert report.model_results["dfm"].runs[0].pixel_auroc is not None

    def test_no_anomalous_test_images_degrades_gracefully(self):
        spec = SyntheticSpec(
            n_train=10, n_test_normal=4, n_test_anom=0, height=32, width=32, seed=5
        )
        cfg = tiny_config(synthetic=spec, models=("dfm",), runs=1)
        with pytest.warns(UserWarning, match="single class|not computable"):
            report = run_benchmark(cfg)
        run = report.model_results["dfm"].runs[0]
        assert run.roc_auc is None
        assert run.pixel_auroc is None


class TestEmitReport:
    def test_files_written_and_deterministic(self, tmp_path):
        cfg = tiny_config()
        r1 = run_benchmark(cfg)
        r2 = run_benchmark(cfg)
        p1 = emit_report(r1, tmp_path / "a")
        p2 = emit_report(r2, tmp_path / "b")
        for key in ("report", "csv", "markdown"):
            assert p1[key].read_bytes() == p2[key].read_bytes()
        panels1 = render_panels(r1, tmp_path / "a" / "panels", 2)
        panels2 = render_panels(r2, tmp_path / "b" / "panels", 2)
        assert [p.name for p in panels1] == [p.name for p in panels2]
        for f1, f2 in zip(panels1, panels2):
            assert f1.read_bytes() == f2.read_bytes()

    def test_markdown_regenerable_from_report_file(self, tmp_path):
        report = run_benchmark(tiny_config())
        paths = emit_report(report, tmp_path)
        regenerated = markdown_from_report(paths["report"])
        assert regenerated == paths["markdown"].read_text()

    def test_csv_row_per_model_metric(self, tmp_path):
        report = run_benchmark(tiny_config())
        paths = emit_report(report, tmp_path)
        lines = paths["csv"].read_text().strip().splitlines()
        assert lines[0] == "model,metric,mean,std,runs"
        assert any(line.startswith("padim,roc_auc,") for line in lines)

    def test_timings_sidecar_excluded_from_report(self, tmp_path):
        report = run_benchmark(tiny_config())
        paths = emit_report(report, tmp_path)
        rd = json.loads(paths["report"].read_text())
        assert "stage_seconds" not in json.dumps(rd)
        assert json.loads(paths["timings"].read_text())


class TestMarkdownFormatting:
    @staticmethod
    def fake_report(models):
        return {
            "format_version": 1,
            "name": "fmt",
            "models": {
                name: {
                    "runs": [],
                    "aggregate": {"mean": mean, "std": std, "runs": 5},
                }
                for name, (mean, std) in models.items()
            },
        }

    def test_mean_std_cell_format(self):
        rd = self.fake_report(
            {"padim": ({"accuracy": 0.9611}, {"accuracy": 0.0078})}
        )
        text = report_to_markdown(rd)
        assert "96.11 ± 0.78" in text

    def test_deterministic_row_has_no_plus_minus(self):
        rd = self.fake_report({"dfm": ({"accuracy": 0.9089}, {"accuracy": 0.0})})
        text = report_to_markdown(rd)
        assert "90.89" in text
        assert "±" not in text

    def test_best_mean_bolded_once_per_column(self):
        rd = self.fake_report(
            {
                "padim": ({"accuracy": 0.96}, {"accuracy": 0.01}),
                "dfm": ({"accuracy": 0.91}, {"accuracy": 0.0}),
            }
        )
        text = report_to_markdown(rd)
        assert text.count("**") == 2
        assert "**96.00 ± 1.00**" in text

    def test_tied_best_all_bolded(self):
        rd = self.fake_report(
            {
                "padim": ({"f1": 0.5}, {"f1": 0.0}),
                "dfm": ({"f1": 0.5}, {"f1": 0.0}),
            }
        )
        text = report_to_markdown(rd)
        assert text.count("**50.00**") == 2


class TestCli:
    def test_synth_validate_run_render(self, tmp_path, capsys):
        data_dir = tmp_path / "data"
        assert cli.main([
            "synth", "--out", str(data_dir),
            "--n-train", "8", "--n-test-normal", "3", "--n-test-anom", "3",
            "--height", "32", "--width", "32", "--seed", "4",
        ]) == 0
        assert cli.main(["validate", "--dataset", str(data_dir)]) == 0

        cfg = dict(CONFIG_JSON)
        cfg["dataset"] = {"directory": str(data_dir)}
        cfg["output_dir"] = str(tmp_path / "out")
        cfg_path = tmp_path / "bench.json"
        cfg_path.write_text(json.dumps(cfg))
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        report_path = tmp_path / "out" / "report.json"
        assert report_path.exists()
        assert (tmp_path / "out" / "panels").is_dir()

        md_out = tmp_path / "regen.md"
        assert cli.main([
            "render", "--report", str(report_path), "--out", str(md_out)
        ]) == 0
        assert md_out.read_text() == (tmp_path / "out" / "report.md").read_text()

    def test_validate_reports_findings_nonzero(self, tmp_path, capsys):
        (tmp_path / "train" / "normal").mkdir(parents=True)
        assert cli.main(["validate", "--dataset", str(tmp_path)]) == 1
        out = capsys.readouterr().out
        assert "finding:" in out

    def test_normalgen_subcommand(self, tmp_path):
        from conftest import write_gray_png
        from sarbench.core import make_rng

        chips = tmp_path / "chips"
        rng = make_rng(0)
        for i in range(2):
            img = rng.random((32, 32)) * 0.3
            img[10:20, 12:22] += 0.6
            write_gray_png(chips / f"chip_{i}.png", np.clip(img, 0, 1))
        out = tmp_path / "scrubbed"
        assert cli.main([
            "normalgen", "--in", str(chips), "--out", str(out),
            "--shadow-rule", "darkest", "--seed", "2",
        ]) == 0
        assert len(list((out / "train" / "normal").glob("*.png"))) == 2
        assert len(list((out / "ground_truth" / "anomalous").glob("*.png"))) == 2
        assert cli.main(["validate", "--dataset", str(out)]) == 0

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli.main(["run", "--config", str(path)]) == 2
        assert "bench: error" in capsys.readouterr().err

    def test_missing_dataset_exits_nonzero(self, tmp_path, capsys):
        cfg = dict(CONFIG_JSON)
        cfg["dataset"] = {"directory": str(tmp_path / "missing")}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli.main(["run", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "[data]" in err
