"""Command-line interface: artifacts, determinism, exit codes, config files."""

import json

import numpy as np
import pytest

from mixres.cli import (
    ASSEMBLY_HEADER,
    CERT_HEADER,
    EVAL_HEADER,
    FIGURE_HEADER,
    GAP_HEADER,
    LINEAR_HEADER,
    TABLE_HEADER,
    UsageError,
    build_plan,
    build_train_config,
    main,
    read_kv_config,
)
from mixres.training import TrainConfig

TINY_ARGS = [
    "train",
    "--method", "mix",
    "--problem", "dirichlet",
    "--dim", "2",
    "--width", "4",
    "--blocks", "2",
    "--iters", "30",
    "--n", "32",
    "--nbar", "8",
    "--eval-every", "15",
    "--seed", "3",
]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTrainCommand:
    def test_prints_single_row(self, capsys):
        code, out, err = run(capsys, TINY_ARGS)
        lines = out.strip().split("\n")
        assert code == 0 and err == ""
        assert lines[0] == EVAL_HEADER
        cells = lines[1].split(",")
        assert cells[0] == "mix" and cells[2] == "2"
        assert cells[-1] == "228"  # scalar net 52 params, flux net 176

    def test_writes_artifacts_and_repeats_bytes(self, capsys, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        code_a, text_a, _ = run(capsys, TINY_ARGS + ["--out", str(out_a)])
        code_b, text_b, _ = run(capsys, TINY_ARGS + ["--out", str(out_b)])
        assert code_a == code_b == 0
        assert text_a == text_b
        for name in ("checkpoint.json", "history.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_divergent_run_exits_one(self, capsys, tmp_path):
        argv = [arg for arg in TINY_ARGS] + ["--lr", "1e80", "--iters", "200"]
        code, out, err = run(capsys, argv)
        assert code == 1
        assert "non-finite" in err

    def test_evaluate_reproduces_train_row(self, capsys, tmp_path):
        out_dir = tmp_path / "run"
        _, train_out, _ = run(capsys, TINY_ARGS + ["--out", str(out_dir)])
        code, eval_out, _ = run(capsys, ["evaluate", str(out_dir / "checkpoint.json")])
        assert code == 0
        assert eval_out == train_out


class TestEvaluateCommand:
    def test_oracle_stub_row(self, capsys, tmp_path):
        path = tmp_path / "oracle.json"
        path.write_text(json.dumps({"oracle": "exact", "problem": "dirichlet", "dim": 2}))
        code, out, _ = run(capsys, ["evaluate", str(path)])
        lines = out.strip().split("\n")
        assert code == 0 and lines[0] == EVAL_HEADER
        cells = lines[1].split(",")
        assert cells[3] == cells[4] == cells[5] == "0.0"
        assert cells[-1] == "0"  # the stub has no parameter vector

    def test_parameter_count_column(self, capsys, tmp_path):
        # A handcrafted zero-parameter checkpoint at the published size.
        config = TrainConfig(method="mix", dim=2, width=10, blocks=10)
        doc = {
            "version": 1,
            "config": {"method": "mix", "problem": "dirichlet", "dim": 2,
                       "width": 10, "blocks": 10},
            "iteration": 0,
            "params_phi": [0.0] * 1130,
            "params_psi": [0.0] * 4280,
            "final_loss": {},
            "rng_cursor": {},
        }
        path = tmp_path / "ck.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run(capsys, ["evaluate", str(path)])
        cells = out.strip().split("\n")[1].split(",")
        assert code == 0
        assert cells[-1] == "5410"
        assert float(cells[3]) == 1.0  # zero network scores unit relative error

    def test_missing_file_usage_error(self, capsys, tmp_path):
        code, out, err = run(capsys, ["evaluate", str(tmp_path / "nope.json")])
        assert code == 2 and err.startswith("error:")

    def test_malformed_json_usage_error(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _, err = run(capsys, ["evaluate", str(path)])
        assert code == 2 and "error:" in err


SWEEP_ARGS = [
    "sweep",
    "--methods", "mix,drm",
    "--problems", "dirichlet",
    "--dims", "2",
    "--widths", "4",
    "--iters", "5",
    "--n", "16",
    "--nbar", "4",
    "--seed", "1",
]


class TestSweepCommand:
    def test_artifacts_and_manifest(self, capsys, tmp_path):
        out = tmp_path / "sweep"
        code, text, _ = run(capsys, SWEEP_ARGS + ["--out", str(out)])
        assert code == 0
        table = (out / "sweep_table.csv").read_text().strip().split("\n")
        assert table[0] == TABLE_HEADER
        assert len(table) == 3  # two runs
        assert all(line.endswith(",ok") for line in table[1:])
        figure = (out / "sweep_figure.csv").read_text().strip().split("\n")
        assert figure[0] == FIGURE_HEADER and len(figure) == 3
        manifest = json.loads((out / "sweep_manifest.json").read_text())
        assert manifest["iterations"] == 5 and len(manifest["runs"]) == 2
        for i, entry in enumerate(manifest["runs"]):
            assert entry["index"] == i
            assert (out / entry["checkpoint"]).exists()
            assert (out / entry["history"]).exists()
            assert "/" not in entry["checkpoint"]

    def test_thread_count_does_not_change_bytes(self, capsys, tmp_path, monkeypatch):
        out_a = tmp_path / "a"
        run(capsys, SWEEP_ARGS + ["--out", str(out_a)])
        monkeypatch.setenv("MIXRES_THREADS", "3")
        out_b = tmp_path / "b"
        run(capsys, SWEEP_ARGS + ["--out", str(out_b)])
        for name in ("sweep_table.csv", "sweep_figure.csv", "sweep_manifest.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_failed_runs_are_recorded_not_fatal(self, capsys, tmp_path):
        out = tmp_path / "sweep"
        argv = [arg for arg in SWEEP_ARGS] + ["--lr", "1e80", "--out", str(out)]
        code, text, _ = run(capsys, argv)
        assert code == 0  # a failed cell is data, not a crash
        table = (out / "sweep_table.csv").read_text().strip().split("\n")
        assert all("failed" in line for line in table[1:])
        figure = (out / "sweep_figure.csv").read_text().strip().split("\n")
        assert figure == [FIGURE_HEADER]

    def test_empty_plan(self, capsys, tmp_path):
        out = tmp_path / "sweep"
        code, _, _ = run(capsys, ["sweep", "--methods", "", "--out", str(out)])
        assert code == 0
        assert (out / "sweep_table.csv").read_text().strip() == TABLE_HEADER


class TestGradcheckCommand:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, ["gradcheck", "--width", "6", "--dim", "2"])
        assert code == 0
        assert "FAIL" not in out and out.count("PASS") == 4

    def test_two_layer_recu(self, capsys):
        code, out, _ = run(
            capsys,
            ["gradcheck", "--net", "two-layer", "--activation", "recu",
             "--dim", "5", "--width", "7", "--seed", "2"],
        )
        assert code == 0 and "FAIL" not in out


class TestApproxCommand:
    def test_certificates_and_assembly(self, capsys, tmp_path):
        out = tmp_path / "approx"
        code, text, _ = run(
            capsys,
            ["approx", "--m-values", "8,16", "--atoms", "4,16",
             "--m-grid", "12", "--n-mc", "4000", "--out", str(out)],
        )
        assert code == 0
        certs = (out / "certificates.csv").read_text().strip().split("\n")
        assert certs[0] == CERT_HEADER and len(certs) == 3
        assembly = (out / "assembly.csv").read_text().strip().split("\n")
        assert assembly[0] == ASSEMBLY_HEADER and len(assembly) == 3
        for line in assembly[1:]:
            _, err, bound = line.split(",")
            assert float(err) <= float(bound)
        assert "slope" in text


class TestRademacherCommand:
    def test_tables_and_slope(self, capsys, tmp_path):
        out = tmp_path / "rad"
        code, text, _ = run(
            capsys, ["rademacher", "--trials", "8", "--n-eps", "64", "--out", str(out)]
        )
        assert code == 0
        linear = (out / "linear.csv").read_text().strip().split("\n")
        assert linear[0] == LINEAR_HEADER
        for line in linear[1:]:
            cells = line.split(",")
            assert float(cells[1]) <= float(cells[3]) + 1e-12
        gaps = (out / "gaps.csv").read_text().strip().split("\n")
        assert gaps[0] == GAP_HEADER
        assert "slope" in text


class TestConfigPlumbing:
    def test_kv_file_roundtrip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment line\n"
            "method = drm\n"
            "eval-every = 50\n"
            "\n"
            "width=7\n"
        )
        opts = read_kv_config(path)
        assert opts == {"method": "drm", "eval_every": "50", "width": "7"}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("width=3\nwidth=4\n")
        with pytest.raises(UsageError):
            read_kv_config(path)

    def test_flags_override_file(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "method=mix\nproblem=dirichlet\ndim=2\nwidth=4\nblocks=2\n"
            "iters=30\nn=32\nnbar=8\neval-every=15\nseed=3\n"
        )
        _, from_file, _ = run(capsys, ["train", "--config", str(path)])
        _, from_flags, _ = run(capsys, TINY_ARGS)
        assert from_file == from_flags
        _, overridden, _ = run(capsys, ["train", "--config", str(path), "--seed", "4"])
        assert overridden != from_file

    def test_unknown_file_key_rejected(self, capsys, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("wdith=4\n")
        code, _, err = run(capsys, ["train", "--config", str(path)])
        assert code == 2 and "wdith" in err

    def test_conflicting_boundary_weights_rejected(self, capsys):
        code, _, err = run(
            capsys, TINY_ARGS + ["--lambda2", "1.0", "--lambda-b", "2.0"]
        )
        assert code == 2 and "error:" in err

    def test_invalid_flag_value_exits_two(self, capsys):
        code, _, err = run(capsys, ["train", "--method", "bogus"])
        assert code == 2

    def test_no_subcommand_exits_two(self, capsys):
        assert run(capsys, [])[0] == 2

    def test_help_exits_zero(self, capsys):
        assert run(capsys, ["--help"])[0] == 0

    def test_build_train_config_maps_batch_keys(self):
        config = build_train_config(
            {"method": "drm", "n": "64", "nbar": "16", "lambda_b": "250"}
        )
        assert config.n_interior == 64 and config.n_boundary == 16
        assert config.lambda2 == 250.0

    def test_build_plan_defaults_and_seeds(self):
        plan = build_plan({"widths": "4,8", "iters": "10", "n": "16", "nbar": "4"})
        assert plan.iterations == 10
        assert len(plan.configs) == 4  # mix,drm defaults x one problem x two widths
        seeds = [config.seed for config in plan.configs]
        assert len(set(seeds)) == 4  # decorrelated per-run seeds
