"""Command-line workflows: the full pipeline chain, outputs, exit codes."""

import json
import warnings

import numpy as np
import pytest

from tide import imageio
from tide.checkpoint import Checkpoint
from tide.cli import main
from tide.core import DEGRADATION_KINDS, CropWarning

TINY_MODEL = """
[model]
n_down = 2
base_channels = 8
max_channels = 16
deg_channels = 8
refine_channels = 8
"""


def run(argv):
    assert main(argv) == 0


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulate -> train-base -> train-refine chain shared by the suite."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(TINY_MODEL)
    paths = {
        "root": root,
        "cfg": cfg,
        "data": root / "data",
        "base": root / "base.tide",
        "refined": root / "refined.tide",
        "base_log": root / "base_log.csv",
    }
    run(["simulate", "--out", str(paths["data"]), "--count", "2", "--size", "16",
         "--seed", "1"])
    run(["train-base", "--data", str(paths["data"]), "--out", str(paths["base"]),
         "--epochs", "1", "--batch-size", "2", "--config", str(cfg),
         "--log", str(paths["base_log"])])
    run(["train-refine", "--data", str(paths["data"]), "--base", str(paths["base"]),
         "--out", str(paths["refined"]), "--epochs", "1", "--batch-size", "2",
         "--config", str(cfg)])
    return paths


class TestChain:
    def test_simulate_layout(self, workspace):
        data = workspace["data"]
        for sub in ("clean", "degraded", "maps"):
            assert sorted(p.name for p in (data / sub).iterdir()) == ["0000.png", "0001.png"]
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["count"] == 2
        assert manifest["size"] == 16

    def test_train_base_artifacts(self, workspace):
        ckpt = Checkpoint.load(workspace["base"])
        assert ckpt.phase == "base"
        assert workspace["base_log"].read_text().startswith("step,lr,total,")

    def test_train_refine_checkpoint(self, workspace):
        ckpt = Checkpoint.load(workspace["refined"])
        assert ckpt.phase == "refine"
        assert ckpt.digest("base.") == Checkpoint.load(workspace["base"]).digest("base.")

    def test_restore_writes_images(self, workspace, tmp_path):
        out = tmp_path / "restored"
        run(["restore", "--ckpt", str(workspace["refined"]),
             "--input", str(workspace["data"] / "degraded"), "--out", str(out)])
        for name in ("0000.png", "0001.png"):
            img = imageio.load_image(out / name)
            assert img.shape == (3, 16, 16)

    def test_dump_intermediates_inventory(self, workspace, tmp_path):
        out = tmp_path / "restored"
        run(["restore", "--ckpt", str(workspace["refined"]),
             "--input", str(workspace["data"] / "degraded" / "0000.png"),
             "--out", str(out), "--dump-intermediates"])
        sub = out / "0000_intermediates"
        expected = {f"hypothesis_{k}.png" for k in DEGRADATION_KINDS}
        expected |= {f"map_{k}.png" for k in DEGRADATION_KINDS}
        expected |= {f"residual_map_{k}.png" for k in DEGRADATION_KINDS}
        expected |= {"gate.png", "correction.png"}
        assert {p.name for p in sub.iterdir()} == expected

    def test_base_checkpoint_dumps_stage1_only(self, workspace, tmp_path):
        out = tmp_path / "restored"
        run(["restore", "--ckpt", str(workspace["base"]),
             "--input", str(workspace["data"] / "degraded" / "0000.png"),
             "--out", str(out), "--dump-intermediates"])
        names = {p.name for p in (out / "0000_intermediates").iterdir()}
        assert names == {f"hypothesis_{k}.png" for k in DEGRADATION_KINDS} | {
            f"map_{k}.png" for k in DEGRADATION_KINDS
        }

    def test_evaluate_writes_csv(self, workspace, tmp_path):
        out = tmp_path / "restored"
        run(["restore", "--ckpt", str(workspace["base"]),
             "--input", str(workspace["data"] / "degraded"), "--out", str(out)])
        report = tmp_path / "report.csv"
        run(["evaluate", "--pred", str(out), "--ref", str(workspace["data"] / "clean"),
             "--metrics", "psnr,ssim", "--out", str(report)])
        lines = report.read_text().splitlines()
        assert lines[0] == "image,psnr,ssim"
        assert [line.split(",")[0] for line in lines[1:]] == ["0000.png", "0001.png", "MEAN"]

    def test_evaluate_stdout(self, workspace, capsys):
        run(["evaluate", "--pred", str(workspace["data"] / "degraded"),
             "--metrics", "uiqm"])
        out = capsys.readouterr().out
        assert out.startswith("image,uiqm")
        assert "MEAN," in out

    def test_baseline_command(self, workspace, tmp_path):
        out = tmp_path / "wb"
        run(["baseline", "--method", "wb",
             "--input", str(workspace["data"] / "degraded"), "--out", str(out)])
        assert imageio.load_image(out / "0000.png").shape == (3, 16, 16)

    def test_baseline_with_param(self, workspace, tmp_path):
        run(["baseline", "--method", "gamma", "--param", "gamma=2.2",
             "--input", str(workspace["data"] / "degraded" / "0000.png"),
             "--out", str(tmp_path / "g")])
        assert (tmp_path / "g" / "0000.png").exists()

    def test_bench_report(self, capsys):
        run(["bench", "--preset", "toy", "--size", "16", "--repeat", "1"])
        out = capsys.readouterr().out
        assert "base params:" in out
        assert "refine/base:" in out
        assert "ms/image" in out


class TestSizeHandling:
    @pytest.fixture()
    def odd_png(self, tmp_path):
        rng = np.random.default_rng(7)
        path = tmp_path / "odd.png"
        imageio.save_image(rng.random((3, 18, 18), dtype=np.float32), path)
        return path

    def test_center_crop_warns(self, workspace, odd_png, tmp_path):
        out = tmp_path / "out"
        with pytest.warns(CropWarning):
            run(["restore", "--ckpt", str(workspace["base"]),
                 "--input", str(odd_png), "--out", str(out)])
        assert imageio.load_image(out / "odd.png").shape == (3, 16, 16)

    def test_resize_avoids_crop(self, workspace, odd_png, tmp_path):
        out = tmp_path / "out"
        with warnings.catch_warnings():
            warnings.simplefilter("error", CropWarning)
            run(["restore", "--ckpt", str(workspace["base"]),
                 "--input", str(odd_png), "--out", str(out), "--resize"])
        img = imageio.load_image(out / "odd.png")
        assert img.shape[-1] % 4 == 0 and img.shape[-2] % 4 == 0


class TestExitCodes:
    def test_usage_error_is_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 2

    def test_missing_required_flag_is_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["restore", "--ckpt", "x.tide"])
        assert exc.value.code == 2

    def test_missing_checkpoint_is_one(self, tmp_path, capsys):
        code = main(["restore", "--ckpt", str(tmp_path / "missing.tide"),
                     "--input", str(tmp_path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_input_is_one(self, workspace, tmp_path, capsys):
        code = main(["restore", "--ckpt", str(workspace["base"]),
                     "--input", str(tmp_path / "nowhere.png"),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "does not exist" in capsys.readouterr().err

    def test_bad_config_is_one(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[model]\nwidth = 9\n")
        code = main(["simulate", "--out", str(tmp_path / "d"), "--count", "1",
                     "--size", "16", "--config", str(cfg)])
        assert code == 1
        assert "unknown key" in capsys.readouterr().err

    def test_empty_input_dir_is_one(self, workspace, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["restore", "--ckpt", str(workspace["base"]),
                     "--input", str(empty), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "no PNG files" in capsys.readouterr().err

    def test_bad_baseline_param_is_one(self, workspace, tmp_path, capsys):
        code = main(["baseline", "--method", "gamma", "--param", "gamma",
                     "--input", str(workspace["data"] / "degraded"),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "key=value" in capsys.readouterr().err
