import numpy as np
import pytest

from mbstereo.cli import main
from mbstereo.imageio import load_disparity, load_image, load_mask
from mbstereo.synth import generate_scene, standard_spec


def run_cli(*argv) -> int:
    return main(list(argv))


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    assert run_cli("synth", "--seed", "3", "--out", str(root / "s3"),
                   "--width", "96", "--height", "64") == 0
    return root / "s3"


class TestSynthCommand:
    def test_writes_expected_artifacts(self, scene_dir):
        names = {p.name for p in scene_dir.iterdir()}
        expected = {"ll.png", "l.png", "c.png", "r.png", "rr.png",
                    "disp_l.pfm", "disp_r.pfm", "occ.png", "oof.png",
                    "manifest.txt", "run_config.txt"}
        assert expected <= names

    def test_repeat_run_is_byte_identical(self, tmp_path):
        out = tmp_path / "s7"
        argv = ("synth", "--seed", "7", "--out", str(out),
                "--width", "96", "--height", "64")
        assert run_cli(*argv) == 0
        first = dir_bytes(out)
        assert run_cli(*argv) == 0
        assert dir_bytes(out) == first

    def test_scene_artifacts_independent_of_out_path(self, tmp_path):
        for name in ("a", "b"):
            assert run_cli("synth", "--seed", "7", "--out", str(tmp_path / name),
                           "--width", "96", "--height", "64") == 0
        a = dir_bytes(tmp_path / "a")
        b = dir_bytes(tmp_path / "b")
        a.pop("run_config.txt")  # echoes the differing --out value
        b.pop("run_config.txt")
        assert a == b

    def test_matches_library_scene(self, scene_dir):
        scene = generate_scene(standard_spec(3, width=96, height=64))
        left = load_image(scene_dir / "l.png")
        assert np.array_equal(left.data, scene.views_by_label["l"].data)


class TestWarpCommand:
    def test_outputs_warp_and_validity(self, scene_dir, tmp_path):
        out = tmp_path / "w"
        assert run_cli("warp", "--views", str(scene_dir), "--view", "r",
                       "--out", str(out)) == 0
        warped = load_image(out / "warped.png")
        valid = load_mask(out / "valid.png")
        left = load_image(scene_dir / "l.png")
        assert warped.data.shape == left.data.shape
        assert valid.any() and not valid.all()

    def test_rejects_target_label(self, scene_dir, tmp_path):
        assert run_cli("warp", "--views", str(scene_dir), "--view", "l",
                       "--out", str(tmp_path / "w")) == 1

    def test_explicit_disparity_file(self, scene_dir, tmp_path):
        out = tmp_path / "w2"
        assert run_cli("warp", "--views", str(scene_dir), "--view", "r",
                       "--disp", str(scene_dir / "disp_l.pfm"),
                       "--out", str(out)) == 0
        default_out = tmp_path / "w3"
        assert run_cli("warp", "--views", str(scene_dir), "--view", "r",
                       "--out", str(default_out)) == 0
        assert (out / "warped.png").read_bytes() == \
            (default_out / "warped.png").read_bytes()


class TestMasksCommand:
    def test_generates_masks(self, scene_dir, tmp_path):
        out = tmp_path / "m"
        assert run_cli("masks", "--left-disp", str(scene_dir / "disp_l.pfm"),
                       "--right-disp", str(scene_dir / "disp_r.pfm"),
                       "--out", str(out)) == 0
        occ = load_mask(out / "occ.png")
        oof = load_mask(out / "oof.png")
        ref_occ = load_mask(scene_dir / "occ.png")
        ref_oof = load_mask(scene_dir / "oof.png")
        assert np.array_equal(oof, ref_oof)
        # LR mask additionally flags frame-leaving lookups
        assert (occ | ~ref_occ).all()


class TestLossMapCommand:
    def test_writes_heat_and_chosen(self, scene_dir, tmp_path):
        out = tmp_path / "lm"
        assert run_cli("loss-map", "--views", str(scene_dir), "--out", str(out)) == 0
        for name in ("loss.png", "chosen.png", "valid.png", "run_config.txt"):
            assert (out / name).exists()


class TestMatchCommand:
    def test_photo_match_and_monotone_occlusion_improvement(self, scene_dir, tmp_path):
        preds = {}
        for tag, use in (("one", "r"), ("multi", "r,ll,rr")):
            out = tmp_path / f"{tag}.pfm"
            assert run_cli("match", "--views", str(scene_dir), "--mode", "photo",
                           "--d-max", "16", "--use", use, "--alpha", "0.0",
                           "--out", str(out)) == 0
            preds[tag] = load_disparity(out, "pfm")
        gt = load_disparity(scene_dir / "disp_l.pfm", "pfm")
        occ = load_mask(scene_dir / "occ.png")
        err_one = np.abs(preds["one"].values - gt.values)[occ & preds["one"].valid]
        err_multi = np.abs(preds["multi"].values - gt.values)[occ & preds["multi"].valid]
        assert err_multi.mean() <= err_one.mean()

    def test_sgm_match_runs(self, scene_dir, tmp_path):
        out = tmp_path / "sgm.pfm"
        assert run_cli("match", "--views", str(scene_dir), "--mode", "sgm",
                       "--d-max", "16", "--use", "r,ll", "--out", str(out)) == 0
        pred = load_disparity(out, "pfm")
        assert pred.valid.any()

    def test_repeat_match_byte_identical(self, scene_dir, tmp_path):
        blobs = []
        for tag in ("x", "y"):
            out = tmp_path / f"{tag}.pfm"
            assert run_cli("match", "--views", str(scene_dir), "--mode", "photo",
                           "--d-max", "8", "--out", str(out)) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_bad_mode_and_fuse_stage(self, scene_dir, tmp_path):
        assert run_cli("match", "--views", str(scene_dir), "--mode", "magic",
                       "--d-max", "8", "--out", str(tmp_path / "o.pfm")) == 1
        assert run_cli("match", "--views", str(scene_dir), "--mode", "sgm",
                       "--d-max", "8", "--fuse-stage", "post",
                       "--out", str(tmp_path / "o.pfm")) == 1


class TestEvalCommand:
    def test_report_and_error_map(self, scene_dir, tmp_path):
        pred_path = tmp_path / "pred.pfm"
        assert run_cli("match", "--views", str(scene_dir), "--mode", "photo",
                       "--d-max", "16", "--use", "r,ll,rr,c", "--alpha", "0.0",
                       "--out", str(pred_path)) == 0
        report = tmp_path / "report.txt"
        assert run_cli("eval", "--views", str(scene_dir), "--pred", str(pred_path),
                       "--alt-right", str(scene_dir / "r.png"),
                       "--error-maps", "true", "--out", str(report)) == 0
        text = report.read_text()
        entries = dict(line.split(" = ") for line in text.strip().splitlines())
        assert float(entries["disp.all.epe"]) < 0.5
        assert entries["image.psnr"] == "inf"  # alt right IS the scene right
        assert float(entries["image.ssim"]) == 1.0
        assert float(entries["consistency.fusion_ssim"]) == pytest.approx(1.0)
        assert "depth.abs_rel" in entries
        assert (tmp_path / "report_error.png").exists()

    def test_report_is_deterministic(self, scene_dir, tmp_path):
        texts = []
        for tag in ("p", "q"):
            report = tmp_path / f"{tag}.txt"
            assert run_cli("eval", "--views", str(scene_dir),
                           "--out", str(report)) == 0
            texts.append(report.read_text())
        assert texts[0] == texts[1]


class TestFractionalScenes:
    def test_fractional_synth_and_match(self, tmp_path):
        out = tmp_path / "frac"
        assert run_cli("synth", "--seed", "2", "--out", str(out),
                       "--width", "96", "--height", "64",
                       "--fractional", "true") == 0
        manifest = (out / "manifest.txt").read_text()
        assert "integer_mode = false" in manifest
        pred = tmp_path / "f.pfm"
        assert run_cli("match", "--views", str(out), "--mode", "sgm",
                       "--d-max", "16", "--use", "r,ll", "--out", str(pred)) == 0
        assert load_disparity(pred, "pfm").valid.any()


class TestConfigFile:
    def test_file_sets_flags_override(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("seed = 11\nwidth = 96\nheight = 64\n")
        out1 = tmp_path / "from-file"
        assert run_cli("synth", "--config", str(cfg), "--out", str(out1)) == 0
        assert "seed = 11" in (out1 / "run_config.txt").read_text()

        out2 = tmp_path / "flag-wins"
        assert run_cli("synth", "--config", str(cfg), "--seed", "12",
                       "--out", str(out2)) == 0
        assert "seed = 12" in (out2 / "run_config.txt").read_text()

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("banana = 1\n")
        assert run_cli("synth", "--config", str(cfg), "--seed", "1",
                       "--out", str(tmp_path / "x")) == 1


class TestValidateCommand:
    def test_failure_capture_and_exit_code(self, monkeypatch, capsys, tmp_path):
        import mbstereo.validation as validation

        def broken():
            raise AssertionError("synthetic failure")

        monkeypatch.setattr(validation, "CHECKS",
                            [("demo.pass", lambda: "fine"), ("demo.fail", broken)])
        assert run_cli("validate", "--out", str(tmp_path / "v")) == 3
        out = capsys.readouterr().out
        assert "PASS demo.pass" in out and "FAIL demo.fail" in out
        assert "synthetic failure" in out
        assert (tmp_path / "v" / "validate.txt").exists()


class TestExitCodes:
    def test_missing_subcommand(self):
        assert run_cli() == 1

    def test_unknown_flag(self):
        assert run_cli("synth", "--nope", "1") == 1

    def test_missing_required(self, tmp_path):
        assert run_cli("synth", "--out", str(tmp_path / "x")) == 1

    def test_missing_input_file(self, tmp_path):
        assert run_cli("eval", "--views", str(tmp_path / "absent"),
                       "--out", str(tmp_path / "r.txt")) == 2

    def test_corrupt_disparity_is_io_error(self, scene_dir, tmp_path):
        bad = tmp_path / "bad.pfm"
        bad.write_bytes(b"PF\n1 1\n-1.0\n" + bytes(12))
        assert run_cli("eval", "--views", str(scene_dir), "--pred", str(bad),
                       "--out", str(tmp_path / "r.txt")) == 2
