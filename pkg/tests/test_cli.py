import csv
import os

import numpy as np
import pytest

from pnsnet.cli import main
from pnsnet.io import read_tensor


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, model, pred = root / "data", root / "model", root / "pred"
    assert main(["synth", "--out", str(data), "--clips", "4", "--seed", "1", "--t", "3", "--h", "32", "--w", "56"]) == 0
    assert main(["train", "--data", str(data), "--out", str(model), "--epochs", "1", "--r", "1"]) == 0
    assert main(["infer", "--model", str(model), "--data", str(data), "--out", str(pred)]) == 0
    return root


class TestPipeline:
    def test_synth_layout(self, pipeline):
        clip = pipeline / "data" / "clip_0000"
        names = sorted(os.listdir(clip))
        assert names == ["frame_00.pnst", "frame_01.pnst", "frame_02.pnst",
                         "mask_00.pgm", "mask_01.pgm", "mask_02.pgm"]
        assert read_tensor(clip / "frame_00.pnst").shape == (32, 56, 3)

    def test_train_outputs(self, pipeline):
        assert (pipeline / "model" / "model.txt").exists()
        rows = list(csv.reader(open(pipeline / "model" / "train_log.csv")))
        assert rows[0] == ["epoch", "mean_loss", "holdout_dice"]
        assert len(rows) == 2

    def test_infer_outputs(self, pipeline):
        prob = read_tensor(pipeline / "pred" / "clip_0002" / "prob.pnst")
        assert prob.shape == (3, 32, 56, 1)
        assert np.all((prob > 0) & (prob < 1))
        assert (pipeline / "pred" / "clip_0002" / "mask_02.pgm").exists()

    def test_eval_gt_vs_gt(self, pipeline, capsys):
        out = pipeline / "self.csv"
        code, _ = run(capsys, "eval", "--pred", pipeline / "data", "--gt", pipeline / "data", "--out", out)
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 4
        assert all(float(r["max_dice"]) == 1.0 for r in rows)
        assert list(rows[0]) == ["video", "max_dice", "max_spe", "max_iou", "mae", "argmax_tau_dice"]

    def test_eval_predictions(self, pipeline, capsys):
        code, _ = run(capsys, "eval", "--pred", pipeline / "pred", "--gt", pipeline / "data",
                      "--out", pipeline / "m.csv")
        assert code == 0

    def test_corrupt_frame_names_file(self, pipeline, tmp_path, capsys):
        bad = tmp_path / "data" / "clip_0000"
        bad.mkdir(parents=True)
        for name in os.listdir(pipeline / "data" / "clip_0000"):
            (bad / name).write_bytes((pipeline / "data" / "clip_0000" / name).read_bytes())
        (bad / "frame_01.pnst").write_bytes(b"PNST\x01")
        code, cap = run(capsys, "train", "--data", tmp_path / "data", "--out", tmp_path / "m", "--epochs", "1")
        assert code == 2
        assert "frame_01.pnst" in cap.err

    def test_missing_data(self, tmp_path, capsys):
        code, cap = run(capsys, "train", "--data", tmp_path / "nothing", "--out", tmp_path / "m")
        assert code == 2 and "clip_" in cap.err

    def test_missing_checkpoint(self, pipeline, tmp_path, capsys):
        code, _ = run(capsys, "infer", "--model", tmp_path, "--data", pipeline / "data", "--out", tmp_path / "p")
        assert code == 2


class TestChecks:
    def test_gradcheck_default(self, tmp_path, capsys):
        code, cap = run(capsys, "gradcheck", "--out", tmp_path / "g.csv")
        assert code == 0
        assert "[gradcheck]" in cap.out
        assert (tmp_path / "g.csv").read_text().startswith("op,max_rel,max_abs,count,passed")

    def test_gradcheck_zero_tol(self, tmp_path, capsys):
        assert run(capsys, "gradcheck", "--tol", 0, "--out", tmp_path / "g.csv")[0] == 1

    def test_gradcheck_seed_repeatable(self, tmp_path, capsys):
        run(capsys, "gradcheck", "--seed", 7, "--out", tmp_path / "a.csv")
        run(capsys, "gradcheck", "--seed", 7, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_gradcheck_unwritable(self, tmp_path, capsys):
        code, cap = run(capsys, "gradcheck", "--out", tmp_path / "missing" / "g.csv")
        assert code == 2 and "g.csv" in cap.err

    def test_oracle_check(self, capsys):
        code, cap = run(capsys, "oracle-check", "--t", 2, "--h", 4, "--w", 4, "--c", 8, "--k", 4)
        assert code == 0 and "max_rel_diff=" in cap.out
        again = run(capsys, "oracle-check", "--t", 2, "--h", 4, "--w", 4, "--c", 8, "--k", 4)[1]
        line = [x for x in cap.out.splitlines() if "max_rel_diff" in x]
        assert line == [x for x in again.out.splitlines() if "max_rel_diff" in x]

    def test_oracle_enlarges_kernel(self, capsys):
        code, cap = run(capsys, "oracle-check", "--k", 1)
        assert code == 0 and "warning" in cap.out

    def test_oracle_cap(self, capsys):
        assert run(capsys, "oracle-check", "--h", 64, "--w", 64, "--c", 64, "--t", 4)[0] == 2

    def test_bench_both(self, capsys):
        code, cap = run(capsys, "bench", "--t", 2, "--h", 8, "--w", 8, "--c", 8, "--iters", 2, "--mode", "both")
        assert code == 0
        rows = {r.split(",")[0]: r.split(",") for r in cap.out.splitlines() if r.startswith(("constrained,", "dense,"))}
        assert rows["constrained"][1] == "2x8x8x8"
        assert float(rows["constrained"][4]) >= float(rows["dense"][4])

    def test_bench_single_iter(self, capsys):
        code, cap = run(capsys, "bench", "--t", 2, "--h", 8, "--w", 8, "--c", 8, "--iters", 1)
        row = [r for r in cap.out.splitlines() if r.startswith("constrained,")][0].split(",")
        assert code == 0 and float(row[3]) == 0.0 and float(row[4]) > 0

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--bogus", "1"])
        assert exc.value.code == 2

    def test_bad_thread_env(self, capsys, monkeypatch):
        monkeypatch.setenv("PNS_THREADS", "many")
        assert run(capsys, "oracle-check")[0] == 2

    def test_thread_env(self, capsys, monkeypatch):
        monkeypatch.setenv("PNS_THREADS", "1")
        assert run(capsys, "oracle-check")[0] == 0
