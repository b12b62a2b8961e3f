"""End-to-end CLI behavior: flags, exit codes, files, determinism."""

import json
import math

import numpy as np
import pytest

from lmhbrtf.cli import main
from lmhbrtf.npyio import read_tensor, write_tensor
from lmhbrtf.report import RunReport, strip_timing
from lmhbrtf.synth import SynthConfig, generate


def make_lowrank_input(tmp_path, name="y.npy", rho=0.0, sigma_sq=0.0, seed=5):
    pattern = np.array([2, 1, 1, 2, 2, 2, 1, 1])
    cfg = SynthConfig(shape=(12, 12, 8), base_rank=2, multirank=pattern,
                      rho=rho, sigma_sq=sigma_sq, seed=seed)
    inst = generate(cfg)
    path = tmp_path / name
    write_tensor(path, inst.y)
    return path, inst


def test_synth_end_to_end(tmp_path):
    out = tmp_path / "report.json"
    code = main(["synth", "--dims", "12,12,8", "--rank", "2",
                 "--pattern", "2,1,1,2,2,2,1,1", "--rho", "0.05",
                 "--sigma2", "1e-4", "--seed", "7", "--out", str(out),
                 "--init-rank", "4", "--tol", "1e-5", "--max-iter", "80",
                 "--save-tensors", str(tmp_path / "tensors")])
    assert code == 0
    report = RunReport.load(out)
    cell = report.results["cells"][0]
    assert cell["r_err_mean"] == 0.0
    assert cell["x_err_mean"] < 5e-3
    for name in ("y", "x_gt", "s_gt", "e_gt", "x_hat", "s_hat"):
        assert (tmp_path / "tensors" / f"{name}.npy").exists()
    x_gt = read_tensor(tmp_path / "tensors" / "x_gt.npy")
    x_hat = read_tensor(tmp_path / "tensors" / "x_hat.npy")
    rel = np.linalg.norm(x_hat - x_gt) / np.linalg.norm(x_gt)
    assert rel == pytest.approx(cell["x_err_mean"], rel=1e-9)


def test_synth_missing_dims_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--rank", "2", "--rho", "0.0", "--sigma2", "0.0",
              "--seed", "1", "--out", "r.json"])
    assert exc.value.code == 2


def test_synth_order_mismatch_is_usage_error(tmp_path):
    code = main(["synth", "--order", "4", "--dims", "12,12,8", "--rank", "2",
                 "--rho", "0.0", "--sigma2", "0.0", "--seed", "1",
                 "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_synth_bad_rho_is_usage_error(tmp_path):
    code = main(["synth", "--dims", "12,12,8", "--rank", "2", "--rho", "1.5",
                 "--sigma2", "0.0", "--seed", "1", "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_synth_deterministic_reports(tmp_path):
    out = tmp_path / "a.json"
    args = ["synth", "--dims", "12,12,8", "--rank", "2",
            "--pattern", "2,1,1,2,2,2,1,1", "--rho", "0.05", "--sigma2", "1e-4",
            "--seed", "3", "--init-rank", "4", "--tol", "1e-5",
            "--max-iter", "60", "--out", str(out)]
    assert main(args) == 0
    a = strip_timing(RunReport.load(out).as_dict())
    assert main(args) == 0
    b = strip_timing(RunReport.load(out).as_dict())
    assert a == b


def test_corrupt_identity_case(tmp_path):
    src, _ = make_lowrank_input(tmp_path)
    out = tmp_path / "c.npy"
    code = main(["corrupt", "--input", str(src), "--rho", "0", "--sigma2", "0",
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    assert np.array_equal(read_tensor(out), read_tensor(src))


def test_corrupt_replacement_count_and_determinism(tmp_path):
    x = np.full((10, 10, 3, 4), 1000.0)
    src = tmp_path / "x.npy"
    write_tensor(src, x)
    out1, out2 = tmp_path / "y1.npy", tmp_path / "y2.npy"
    args = ["corrupt", "--input", str(src), "--rho", "0.2", "--sigma2", "0",
            "--low", "0", "--high", "255", "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    y = read_tensor(out1)
    assert np.count_nonzero(y != 1000.0) == 240
    assert read_tensor(out2).tobytes() == y.tobytes()


def test_corrupt_invalid_range_usage_error(tmp_path):
    src, _ = make_lowrank_input(tmp_path)
    code = main(["corrupt", "--input", str(src), "--rho", "0.1", "--sigma2", "0",
                 "--low", "5", "--high", "5", "--seed", "1",
                 "--out", str(tmp_path / "o.npy")])
    assert code == 2


def test_corrupt_unreadable_input_runtime_error(tmp_path):
    code = main(["corrupt", "--input", str(tmp_path / "missing.npy"),
                 "--rho", "0.1", "--sigma2", "0", "--seed", "1",
                 "--out", str(tmp_path / "o.npy")])
    assert code == 1


def test_denoise_clean_input_and_report(tmp_path):
    src, inst = make_lowrank_input(tmp_path)
    out = tmp_path / "xhat.npy"
    rep = tmp_path / "run.json"
    sparse = tmp_path / "shat.npy"
    code = main(["denoise", "--input", str(src), "--seed", "2",
                 "--out", str(out), "--report", str(rep),
                 "--sparse-out", str(sparse),
                 "--init-rank", "4", "--sigma0sq", "1.0", "--gamma", "1.0",
                 "--tol", "1e-6", "--max-iter", "100"])
    assert code == 0
    x_hat = read_tensor(out)
    rel = np.linalg.norm(x_hat - inst.x_gt) / np.linalg.norm(inst.x_gt)
    assert rel <= 1e-4
    assert np.linalg.norm(read_tensor(sparse)) <= 1e-3 * np.linalg.norm(inst.y)
    report = RunReport.load(rep)
    assert report.results["multirank"] == [2, 1, 1, 2, 2, 2, 1, 1]
    assert report.results["converged"]
    assert report.config["phi"] == 8.0
    assert len(report.trace) == report.results["iterations"]


def test_denoise_max_iter_zero_returns_initialization(tmp_path):
    src, _ = make_lowrank_input(tmp_path, rho=0.05, sigma_sq=1e-4)
    out = tmp_path / "x0.npy"
    code = main(["denoise", "--input", str(src), "--seed", "2",
                 "--out", str(out), "--init-rank", "4", "--max-iter", "0"])
    assert code == 0
    assert read_tensor(out).shape == (12, 12, 8)


def test_denoise_deterministic_outputs(tmp_path):
    src, _ = make_lowrank_input(tmp_path, rho=0.05, sigma_sq=1e-4)
    args = ["denoise", "--input", str(src), "--seed", "4", "--init-rank", "4",
            "--sigma0sq", "1.0", "--gamma", "1.0", "--tol", "1e-5",
            "--max-iter", "50"]
    out1, out2 = tmp_path / "a.npy", tmp_path / "b.npy"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert read_tensor(out1).tobytes() == read_tensor(out2).tobytes()


def test_denoise_transform_file_matches_builtin_dft(tmp_path):
    src, _ = make_lowrank_input(tmp_path, rho=0.05, sigma_sq=1e-4)
    n = 8
    k = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n)
    mpath = tmp_path / "m3.npy"
    write_tensor(mpath, dft)
    common = ["--seed", "4", "--init-rank", "4", "--sigma0sq", "1.0",
              "--gamma", "1.0", "--tol", "1e-5", "--max-iter", "40"]
    out_fft, out_mat = tmp_path / "fft.npy", tmp_path / "mat.npy"
    assert main(["denoise", "--input", str(src), "--out", str(out_fft)] + common) == 0
    assert main(["denoise", "--input", str(src), "--out", str(out_mat),
                 "--transform-file", str(mpath)] + common) == 0
    a, b = read_tensor(out_fft), read_tensor(out_mat)
    assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(a)


def test_denoise_pads_matrix_input(tmp_path):
    m = np.random.default_rng(0).standard_normal((6, 5))
    src = tmp_path / "m.npy"
    write_tensor(src, m)
    out = tmp_path / "o.npy"
    code = main(["denoise", "--input", str(src), "--seed", "1",
                 "--init-rank", "2", "--max-iter", "5", "--out", str(out)])
    assert code == 0
    assert read_tensor(out).shape == (6, 5, 1)


def test_metrics_identical_inputs_sentinels(tmp_path):
    src, _ = make_lowrank_input(tmp_path)
    out = tmp_path / "m.json"
    code = main(["metrics", "--ref", str(src), "--est", str(src),
                 "--out", str(out)])
    assert code == 0
    raw = json.loads(out.read_text())
    assert raw["results"]["psnr"] == "+inf"
    assert raw["results"]["ssim"] == pytest.approx(1.0)
    assert raw["results"]["ergas"] == 0.0
    assert raw["results"]["sam"] == pytest.approx(0.0, abs=1e-5)
    report = RunReport.load(out)
    assert report.results["psnr"] == math.inf


def test_metrics_shape_mismatch_exit_code_1(tmp_path):
    a = tmp_path / "a.npy"
    b = tmp_path / "b.npy"
    write_tensor(a, np.zeros((10, 10, 2)) + 1.0)
    write_tensor(b, np.ones((10, 10, 3)))
    code = main(["metrics", "--ref", str(a), "--est", str(b),
                 "--out", str(tmp_path / "m.json")])
    assert code == 1


def test_config_file_precedence(tmp_path):
    src, _ = make_lowrank_input(tmp_path, rho=0.05, sigma_sq=1e-4)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iter": 2, "init_rank": 4,
                               "gamma": "1.0", "sigma0sq": 1.0}))
    rep = tmp_path / "r.json"
    # config supplies max_iter=2; the flag overrides it to 3
    code = main(["denoise", "--input", str(src), "--seed", "1",
                 "--out", str(tmp_path / "x.npy"), "--report", str(rep),
                 "--config", str(cfg), "--max-iter", "3"])
    assert code == 0
    assert RunReport.load(rep).results["iterations"] == 3


def test_config_file_unknown_key_usage_error(tmp_path):
    src, _ = make_lowrank_input(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    code = main(["denoise", "--input", str(src), "--seed", "1",
                 "--out", str(tmp_path / "x.npy"), "--config", str(cfg)])
    assert code == 2


def test_no_subcommand_prints_help(capsys):
    assert main([]) == 2


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
