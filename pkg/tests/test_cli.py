import json

import pytest

from mflab import config
from mflab.cli import build_parser, effective_config, main
from conftest import make_config


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    config.save(cfg, path)
    return str(path)


class TestParsing:
    def test_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_all_subcommands_exposed(self):
        parser = build_parser()
        for name in ("train", "sweep", "generalize", "audit", "bounds"):
            args = parser.parse_args([name])
            assert args.command == name

    def test_overrides(self, tmp_path):
        cfg = make_config(hyper={"seed": 5})
        path = write_cfg(tmp_path, cfg)
        args = build_parser().parse_args(
            ["train", "--config", path, "--seed", "99",
             "--grad-scaling", "raw", "--noise-variance-literal",
             "--out", str(tmp_path / "out")])
        eff = effective_config(args)
        assert eff.hyper.seed == 99
        assert eff.grad_scaling == "raw"
        assert eff.noise_variance_literal
        assert eff.out == str(tmp_path / "out")

    def test_kind_follows_subcommand(self, tmp_path):
        path = write_cfg(tmp_path, make_config(kind="train"))
        args = build_parser().parse_args(["audit", "--config", path])
        assert effective_config(args).kind == "audit"


class TestMain:
    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"hyper": {"alpha": -2}}')
        assert main(["train", "--config", str(bad)]) == 2
        assert "hyper.alpha" in capsys.readouterr().err

    def test_train_prints_summary(self, tmp_path, capsys):
        cfg = make_config(hyper={"m": 32, "n": 3, "d": 2, "seed": 70},
                          schedule={"steps": 20, "time_constants": None})
        assert main(["train", "--config", write_cfg(tmp_path, cfg)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "lambda_min" in out and "condition_holds" in out

    def test_bounds_prints_json(self, tmp_path, capsys):
        cfg = make_config(hyper={"m": 32, "n": 3, "d": 2, "seed": 71},
                          teacher={"mean_u": 0.5, "mean_theta": [0.5, 0.0]})
        assert main(["bounds", "--config", write_cfg(tmp_path, cfg)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["config_hash"] == config.from_dict(
            {**cfg.to_dict(), "kind": "bounds"}).hash()

    def test_generalize_runs(self, tmp_path, capsys):
        cfg = make_config(
            kind="generalize",
            hyper={"m": 32, "n": 6, "d": 2, "seed": 72, "eta0": 1.0,
                   "alpha": 8.0},
            teacher={"mean_u": 0.5, "mean_theta": [0.6, 0.0]},
            generalize={"n_grid": [8, 16], "seeds": [0], "test_n": 30,
                        "steps": 15, "delta": 0.1})
        assert main(["generalize", "--config", write_cfg(tmp_path, cfg),
                     "--out", str(tmp_path / "g")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "median_test_01" in out
        assert (tmp_path / "g" / "generalize.json").exists()
