import numpy as np
import pytest

from panocalib.cli import run
from panocalib.dataset import (
    ImageRaster,
    PointCloud,
    read_correspondences,
    read_image,
    read_pointcloud,
    read_pose,
    write_image,
    write_pointcloud,
)
from panocalib.synthdata import REFERENCE_POSE


@pytest.fixture
def synth_csv(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["synth", "--seed", "7", "--out", str(out), "--cloud", str(tmp_path / "returns.xyz")]) == 0
    return out


def test_synth_writes_dataset_and_sidecar(synth_csv, capsys):
    assert len(read_correspondences(synth_csv)) == 48
    meta = synth_csv.with_name("d.csv.meta").read_text()
    assert "noise_seed = 7" in meta and "truth_alpha = 4.7112" in meta and "rig7_disc_center" in meta
    assert len(read_pointcloud(synth_csv.with_name("returns.xyz"))) > 48


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["synth", "--seed", "7", "--out", str(p), "--set", "pixel_sigma_u=0.0002"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_effective_config_echo(synth_csv, capsys, tmp_path):
    run(["synth", "--seed", "3", "--out", str(tmp_path / "x.csv"), "--set", "disc_radius=0.25"])
    out = capsys.readouterr().out
    assert "[effective-config]" in out and "command = synth" in out
    assert "disc_radius = 0.25\n" in out and "learning_rate = 300.0  # default" in out


def test_calibrate_recovers_truth(synth_csv, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("restarts = 16\n")
    pose_file = tmp_path / "pose.txt"
    trace = tmp_path / "trace.csv"
    assert run(["calibrate", "--in", str(synth_csv), "--config", str(cfg), "--out", str(pose_file),
                "--trace", str(trace)]) == 0
    pose = read_pose(pose_file)
    assert np.max(np.abs(pose.as_vector() - REFERENCE_POSE.as_vector())) < 1e-4
    assert trace.read_text().startswith("iteration,loss,")


def test_calibrate_from_init(synth_csv, tmp_path):
    init = tmp_path / "init.txt"
    init.write_text("alpha = 4.6\nbeta = 0.95\ngamma = 1.9\nb1 = 3\nb2 = 0.5\nb3 = -1.6\n")
    assert run(["calibrate", "--in", str(synth_csv), "--init", str(init), "--out", str(tmp_path / "p.txt")]) == 0
    pose = read_pose(tmp_path / "p.txt")
    assert np.max(np.abs(pose.as_vector() - REFERENCE_POSE.as_vector())) < 1e-4


def test_gradcheck_passes(capsys):
    assert run(["gradcheck", "--samples", "100", "--seed", "1"]) == 0
    assert "failed = 0" in capsys.readouterr().out


def test_gradcheck_fails_with_impossible_tolerance(capsys):
    assert run(["gradcheck", "--samples", "20", "--tolerance", "1e-14"]) == 4
    assert capsys.readouterr().err.startswith("error: NumericalFailure:")


def test_project_and_colorize(tmp_path):
    cloud = tmp_path / "c.xyz"
    write_pointcloud(PointCloud(np.array([[1.0, 0, 0], [0, 0, 2.0]])), cloud)
    pano = tmp_path / "p.ppm"
    write_image(ImageRaster.filled(64, 32, (0, 0, 255)), pano)
    pose = tmp_path / "id.txt"
    pose.write_text("alpha=0\nbeta=0\ngamma=0\nb1=0\nb2=0\nb3=0\n")
    assert run(["project", "--cloud", str(cloud), "--image", str(pano), "--pose", str(pose),
                "--out", str(tmp_path / "o.ppm")]) == 0
    assert read_image(tmp_path / "o.ppm").pixels[16, 32].tolist() == [255, 0, 0]
    assert run(["colorize", "--cloud", str(cloud), "--image", str(pano), "--pose", str(pose),
                "--out", str(tmp_path / "col.xyz")]) == 0
    col = read_pointcloud(tmp_path / "col.xyz")
    assert len(col) == 1 and col.rgb[0].tolist() == [0, 0, 255]


def test_evaluate_report(synth_csv, tmp_path, capsys):
    assert run(["evaluate", "--in", str(synth_csv), "--out", str(tmp_path / "r.txt")]) == 0
    text = (tmp_path / "r.txt").read_text()
    assert "accepted = 48" in text


def test_exit_codes(tmp_path, capsys):
    assert run(["bogus"]) == 2
    assert run(["synth", "--out", str(tmp_path / "x.csv"), "--no-such-flag"]) == 2
    assert run(["synth", "--out", str(tmp_path / "x.csv"), "--set", "nope=1"]) == 2
    assert run(["evaluate", "--in", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3,1.5,0.5\n")
    assert run(["calibrate", "--in", str(bad), "--out", str(tmp_path / "p.txt")]) == 3
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("error: DataFormatError:")
    behind = tmp_path / "behind.csv"
    behind.write_text("-5,0.1,0.2,0.1,0.5\n-6,0.3,-0.2,0.9,0.5\n")
    init = tmp_path / "i.txt"
    init.write_text("alpha=0\nbeta=0\ngamma=0\nb1=0\nb2=0\nb3=0\n")
    assert run(["calibrate", "--in", str(behind), "--init", str(init), "--out", str(tmp_path / "p.txt")]) == 4
