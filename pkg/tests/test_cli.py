import numpy as np
import pytest

from geoguide.cli import main
from geoguide.encoders import synthetic_image
from geoguide.formats import (
    read_csv,
    read_emb1,
    read_kv,
    write_emb1,
    write_image,
    write_kv,
)
from geoguide.metrics import ScoreTable


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def feats(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 8))
    b = rng.standard_normal((6, 8))
    pa, pb = tmp_path / "a.emb", tmp_path / "b.emb"
    write_emb1(pa, a)
    write_emb1(pb, b)
    return pa, pb, a, b


# --------------------------------------------------------------------- flow


def test_flow_identical_batches_zero_angles(tmp_path, feats):
    pa, _, a, _ = feats
    out = tmp_path / "flow"
    assert run_cli("flow", "--src", pa, "--dst", pa, "--subspace-dim", 3, "--out", out) == 0
    angles = read_csv(out / "angles.csv")
    np.testing.assert_allclose(angles, 0.0, atol=1e-7)
    # Q equals the subspace projector for identical endpoints.
    from geoguide.linalg import extract_subspace

    q = read_emb1(out / "q.emb")
    basis = extract_subspace(a, 3)
    assert np.linalg.norm(q - basis.projector()) <= 1e-8


def test_flow_outputs_and_diagnostics(tmp_path, feats):
    pa, pb, _, _ = feats
    out = tmp_path / "flow2"
    assert run_cli(
        "flow", "--src", pa, "--dst", pb, "--subspace-dim", 2,
        "--nu", "0,0.25,1", "--out", out,
    ) == 0
    assert (out / "pi_0.0000.emb").exists()
    assert (out / "pi_0.2500.emb").exists()
    assert (out / "pi_1.0000.emb").exists()
    diag = read_csv(out / "diagnostics.csv")
    min_eig, quad_residual, eff = diag[0]
    assert min_eig >= -1e-9
    assert quad_residual <= 1e-6
    assert eff == 2
    kv = read_kv(out / "config.kv")
    assert kv["subspace_dim_requested"] == "2"


def test_flow_missing_file_exit_2(tmp_path, capsys):
    out = tmp_path / "flow3"
    code = run_cli(
        "flow", "--src", tmp_path / "missing.emb", "--dst", tmp_path / "missing.emb",
        "--subspace-dim", 2, "--out", out,
    )
    assert code == 2
    assert "missing.emb" in capsys.readouterr().err


# ------------------------------------------------------------------- invert


def invert_args(src_path, out, **over):
    base = {
        "--source": src_path,
        "--src-prompt": "a photo of a ball",
        "--trg-prompt": "a watercolor painting of a ball",
        "--epochs": 4,
        "--ensembles": 4,
        "--subspace-dim": 8,
        "--feature-dim": 8,
        "--text-dim": 16,
        "--sample-every": 2,
        "--out": out,
    }
    base.update(over)
    argv = ["invert"]
    for key, value in base.items():
        argv += [key, value]
    return argv


def test_invert_lr_zero_frame_is_source(tmp_path):
    src = tmp_path / "src.ppm"
    write_image(src, synthetic_image(8, 8, 3, seed=1))
    out = tmp_path / "run"
    assert run_cli(*invert_args(src, out, **{"--lr": 0.0})) == 0
    final_frame = out / "frame_000004.ppm"
    assert final_frame.read_bytes() == src.read_bytes()


def test_invert_same_seed_identical_trajectory(tmp_path):
    src = tmp_path / "src.ppm"
    write_image(src, synthetic_image(8, 8, 3, seed=2))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli(*invert_args(src, out1, **{"--seed": 7})) == 0
    assert run_cli(*invert_args(src, out2, **{"--seed": 7})) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_invert_defaults_echoed(tmp_path):
    src = tmp_path / "src.ppm"
    write_image(src, synthetic_image(8, 8, 3, seed=3))
    out = tmp_path / "run"
    argv = [
        "invert", "--source", src,
        "--src-prompt", "a", "--trg-prompt", "b",
        "--epochs", 2, "--ensembles", 4, "--feature-dim", 8, "--text-dim", 16,
        "--out", out,
    ]
    assert run_cli(*argv) == 0
    kv = read_kv(out / "config.kv")
    # Untouched options resolve to the reference defaults.
    assert kv["learning_rate"] == "0.0002"
    assert kv["subspace_dim"] == "256"
    assert kv["schedule"] == "cosine"
    assert kv["loss_mode"] == "geodesic_total"


def test_invert_config_file_precedence(tmp_path):
    src = tmp_path / "src.ppm"
    write_image(src, synthetic_image(8, 8, 3, seed=4))
    cfg_file = tmp_path / "base.kv"
    write_kv(cfg_file, {"epochs": 3, "seed": 11, "feature_dim": 8, "text_dim": 16, "ensembles": 4})
    out = tmp_path / "run"
    argv = [
        "invert", "--source", src,
        "--src-prompt", "a", "--trg-prompt", "b",
        "--config", cfg_file, "--epochs", 2,  # flag beats file
        "--out", out,
    ]
    assert run_cli(*argv) == 0
    kv = read_kv(out / "config.kv")
    assert kv["epochs"] == "2"  # flag wins
    assert kv["seed"] == "11"  # file beats default
    rows = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert rows.shape[0] == 2


def test_invert_identical_prompts_exit_1(tmp_path, capsys):
    src = tmp_path / "src.ppm"
    write_image(src, synthetic_image(8, 8, 3, seed=5))
    argv = invert_args(src, tmp_path / "run")
    argv[argv.index("--trg-prompt") + 1] = "a photo of a ball"
    assert run_cli(*argv) == 1
    assert "error" in capsys.readouterr().err


# -------------------------------------------------------------------- score


def test_score_morph_identical(tmp_path):
    rng = np.random.default_rng(6)
    z = rng.standard_normal((5, 8))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    pa = tmp_path / "z.emb"
    write_emb1(pa, z)
    out = tmp_path / "score.csv"
    assert run_cli("score", "--mode", "morph", "--a", pa, "--b", pa, "--out", out) == 0
    table = ScoreTable.read(out)
    assert table.rows[0][1] == pytest.approx(0.0, abs=1e-12)
    assert table.rows[0][3] == 5


def test_score_psnr_identical_capped(tmp_path):
    img = synthetic_image(8, 8, 3, seed=7)
    p = tmp_path / "img.ppm"
    write_image(p, img)
    out = tmp_path / "psnr.csv"
    assert run_cli("score", "--mode", "psnr", "--a", p, "--b", p, "--out", out) == 0
    table = ScoreTable.read(out)
    assert table.rows[0][1] == 99.0


def test_score_ssim(tmp_path):
    a = synthetic_image(8, 8, 3, seed=8)
    pa, pb = tmp_path / "a.ppm", tmp_path / "b.ppm"
    write_image(pa, a)
    write_image(pb, a)
    out = tmp_path / "ssim.csv"
    assert run_cli("score", "--mode", "ssim", "--a", pa, "--b", pb, "--out", out) == 0
    assert ScoreTable.read(out).rows[0][1] == pytest.approx(1.0, abs=1e-12)


def test_score_dm(tmp_path, feats):
    pa, pb, _, _ = feats
    out = tmp_path / "dm.csv"
    assert run_cli(
        "score", "--mode", "dm", "--a", pa, "--b", pb, "--subspace-dim", 2, "--out", out
    ) == 0
    table = ScoreTable.read(out)
    assert 0.0 <= table.rows[0][1] <= 1.0


def test_score_gap_recovers_planted_offset(tmp_path):
    rng = np.random.default_rng(9)
    base = rng.standard_normal((30, 6))
    offset = rng.standard_normal(6)
    pa, pb = tmp_path / "img.emb", tmp_path / "txt.emb"
    write_emb1(pa, base + offset)
    write_emb1(pb, base)
    out = tmp_path / "gap.csv"
    assert run_cli(
        "score", "--mode", "gap", "--a", pa, "--b", pb, "--coeffs", "0,1", "--out", out
    ) == 0
    table = ScoreTable.read(out)
    rows = {label: mean for label, mean, _, _ in table.rows}
    assert rows["gap_norm"] == pytest.approx(float(np.linalg.norm(offset)), abs=1e-10)
    assert "align_c=0" in rows and "align_c=1" in rows


def test_score_shape_error_exit_1(tmp_path):
    a = synthetic_image(8, 8, 3, seed=10)
    b = synthetic_image(9, 8, 3, seed=10)
    pa, pb = tmp_path / "a.ppm", tmp_path / "b.ppm"
    write_image(pa, a)
    write_image(pb, b)
    assert run_cli("score", "--mode", "psnr", "--a", pa, "--b", pb, "--out", tmp_path / "x.csv") == 1


# -------------------------------------------------------------------- bench


def test_bench_schema_and_positive(tmp_path):
    out = tmp_path / "bench.csv"
    assert run_cli(
        "bench", "--dims", "16,64", "--batches", "8,16", "--trials", 2, "--out", out
    ) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "n,d,op,median_ms,slope_hint"
    assert len(lines) == 1 + 2 * 2 * 3  # (n, d) pairs x 3 ops
    for line in lines[1:]:
        n, d, op, ms, slope = line.split(",")
        assert float(ms) > 0
        assert op in {"extract_subspace", "geodesic_flow", "q_matrix"}


# ----------------------------------------------------------------- dimstudy


def test_dimstudy_rows_and_clamping(tmp_path):
    out = tmp_path / "dimstudy"
    argv = [
        "dimstudy", "--dims", "4,8,64", "--seeds", 1,
        "--src-prompt", "a photo of a ball",
        "--trg-prompt", "a watercolor painting of a ball",
        "--epochs", 3, "--ensembles", 4, "--feature-dim", 8, "--text-dim", 16,
        "--sample-every", 2, "--out", out,
    ]
    assert run_cli(*argv) == 0
    lines = (out / "dimstudy.csv").read_text().splitlines()
    data = [l for l in lines if not l.startswith("#") and not l.startswith("dim_")]
    assert len(data) == 3
    last = data[-1].split(",")
    assert last[0] == "64"
    assert "clamped_to_8" in last[5]
    for row in data:
        cells = row.split(",")
        assert np.isfinite(float(cells[2]))
        assert np.isfinite(float(cells[3]))
        assert np.isfinite(float(cells[4]))
    assert any(l.startswith("# config_hash=") for l in lines)
    kv = read_kv(out / "config.kv")
    assert kv["dims"] == "4,8,64"


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["flow", "--src", "a.emb"])  # missing required flags
    assert exc.value.code == 2
