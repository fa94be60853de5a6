import json

import numpy as np
import pytest
from click.testing import CliRunner

from pceval.cli import main
from pceval.cloud import PointCloud
from pceval.distances import DistanceSpec
from pceval.io_formats import (load_cloud, load_normals, save_cloud,
                               save_manifest)
from pceval.synthetic import mixed_set


@pytest.fixture
def runner():
    return CliRunner()


def make_pair(tmp_path, rng):
    # 1/64-grid coordinates stay exact through float32 storage, before and
    # after the +5 translation, so aligned distances cancel exactly
    a = PointCloud(rng.integers(0, 64, size=(12, 3)) / 64.0)
    b = PointCloud(a.points + 5.0)
    save_cloud(a, tmp_path / "a.pcev")
    save_cloud(b, tmp_path / "b.pcev")
    return a, b


def make_manifests(tmp_path, n=3, n_points=24, equal=True):
    gen = mixed_set(n, n_points, seed=31)
    ref = mixed_set(n if equal else n + 1, n_points, seed=77, role="reference")
    for label, cs in (("gen", gen), ("ref", ref)):
        d = tmp_path / label
        d.mkdir(exist_ok=True)
        names = []
        for i, c in enumerate(cs):
            name = f"{label}_{i}.pcev"
            save_cloud(c, d / name)
            names.append(name)
        save_manifest(names, d / "set.json", role=cs.role)
    return tmp_path / "gen" / "set.json", tmp_path / "ref" / "set.json"


class TestDistanceCommand:
    def test_identical_files_zero(self, runner, tmp_path, rng):
        a = PointCloud(rng.random((10, 3)))
        save_cloud(a, tmp_path / "a.pcev")
        for measure in ("cd", "emd", "dcd"):
            res = runner.invoke(main, ["distance", str(tmp_path / "a.pcev"),
                                       str(tmp_path / "a.pcev"),
                                       "--measure", measure])
            assert res.exit_code == 0, res.output
            assert float(res.stdout.strip()) == 0.0

    def test_two_point_emd(self, runner, tmp_path):
        save_cloud(PointCloud([[0.0, 0, 0], [2.0, 0, 0]]), tmp_path / "a.pcev")
        save_cloud(PointCloud([[1.0, 0, 0], [3.0, 0, 0]]), tmp_path / "b.pcev")
        res = runner.invoke(main, ["distance", str(tmp_path / "a.pcev"),
                                   str(tmp_path / "b.pcev"), "--measure", "emd",
                                   "--no-aligned"])
        assert res.exit_code == 0
        assert float(res.stdout.strip()) == pytest.approx(2.0, abs=1e-12)

    def test_aligned_translated_copy(self, runner, tmp_path, rng):
        make_pair(tmp_path, rng)
        res = runner.invoke(main, ["distance", str(tmp_path / "a.pcev"),
                                   str(tmp_path / "b.pcev"), "--measure", "cd"])
        assert res.exit_code == 0
        assert float(res.stdout.strip()) == pytest.approx(0.0, abs=1e-18)

    def test_data_error_exit_code(self, runner, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("0 0\n")
        ok = tmp_path / "ok.txt"
        ok.write_text("0 0 0\n")
        res = runner.invoke(main, ["distance", str(bad), str(ok)])
        assert res.exit_code == 3

    def test_usage_error_exit_code(self, runner):
        res = runner.invoke(main, ["distance", "--measure", "cd"])
        assert res.exit_code == 2


class TestEvalCommand:
    def test_identity_suite(self, runner, tmp_path):
        gen_m, _ = make_manifests(tmp_path)
        out = tmp_path / "report.json"
        res = runner.invoke(main, ["eval", "--gen", str(gen_m), "--ref", str(gen_m),
                                   "--measures", "dcd",
                                   "--metrics", "mmd,cov,1nna,snc,jsd",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        doc = json.loads(out.read_text())
        values = {r["metric"]: r["value"] for r in doc["results"]}
        assert values["mmd"] == 0.0
        assert values["cov"] == 1.0
        assert values["1nna"] == 0.0
        assert values["snc"] == 1.0
        assert values["jsd"] == 0.0

    def test_unequal_sets_1nna_error_names_metric(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path, equal=False)
        res = runner.invoke(main, ["eval", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--metrics", "1nna"])
        assert res.exit_code == 3
        assert "1-NN" in res.output

    def test_stdout_json_when_no_out(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path)
        res = runner.invoke(main, ["eval", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--metrics", "mmd", "--measures", "cd,dcd"])
        assert res.exit_code == 0
        doc = json.loads(res.stdout)
        assert len(doc["results"]) == 2

    def test_fixture_cells_match_library(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path)
        out = tmp_path / "report.json"
        res = runner.invoke(main, ["eval", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--measures", "dcd", "--metrics", "mmd",
                                   "--alpha", "42.5", "--out", str(out)])
        assert res.exit_code == 0
        doc = json.loads(out.read_text())
        from pceval.io_formats import load_set
        from pceval.metrics import mmd as mmd_fn

        gen = load_set(gen_m)
        ref = load_set(ref_m)
        expect = mmd_fn(ref, gen, DistanceSpec(measure="dcd", aligned=True,
                                               alpha=42.5))
        assert doc["results"][0]["value"] == expect


class TestSampleCommand:
    def test_fps_full_size_is_permutation(self, runner, tmp_path, rng):
        c = PointCloud(rng.random((10, 3)))
        save_cloud(c, tmp_path / "c.pcev")
        stored = load_cloud(tmp_path / "c.pcev")
        out = tmp_path / "s.pcev"
        res = runner.invoke(main, ["sample", str(tmp_path / "c.pcev"), str(out),
                                   "--method", "fps", "-m", "10"])
        assert res.exit_code == 0
        back = load_cloud(out)
        assert sorted(map(tuple, back.points)) == sorted(map(tuple, stored.points))

    def test_random_respects_seed(self, runner, tmp_path, rng):
        c = PointCloud(rng.random((20, 3)))
        save_cloud(c, tmp_path / "c.pcev")
        outputs = []
        for name in ("s1.pcev", "s2.pcev"):
            res = runner.invoke(main, ["--seed", "5", "sample",
                                       str(tmp_path / "c.pcev"),
                                       str(tmp_path / name), "--method",
                                       "random", "-m", "8"])
            assert res.exit_code == 0
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]


class TestPerturbCommand:
    def test_zero_perturbation_byte_identical(self, runner, tmp_path, rng):
        c = PointCloud(rng.random((15, 3)).astype(np.float32))
        save_cloud(c, tmp_path / "c.pcev")
        out = tmp_path / "p.pcev"
        res = runner.invoke(main, ["perturb", str(tmp_path / "c.pcev"), str(out),
                                   "--noise-frac", "0", "--shift-frac", "0"])
        assert res.exit_code == 0
        assert out.read_bytes() == (tmp_path / "c.pcev").read_bytes()


class TestNormalsCommand:
    def test_writes_unit_normals(self, runner, tmp_path):
        from pceval.synthetic import sphere_cloud

        c = sphere_cloud(64, seed=3, jitter=0.0)
        save_cloud(c, tmp_path / "c.pcev")
        out = tmp_path / "n.pcnm"
        res = runner.invoke(main, ["normals", str(tmp_path / "c.pcev"), str(out),
                                   "-k", "10"])
        assert res.exit_code == 0, res.output
        normals = load_normals(out, expected_count=64)
        assert normals.shape == (64, 3)


class TestSweepCommand:
    def test_single_cell_matches_eval(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path)
        sweep_out = tmp_path / "sweep.csv"
        eval_out = tmp_path / "report.json"
        res = runner.invoke(main, ["sweep", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--noise-grid", "0", "--shift-grid", "0",
                                   "--metrics", "mmd", "--measures", "dcd",
                                   "--out", str(sweep_out)])
        assert res.exit_code == 0, res.output
        res = runner.invoke(main, ["eval", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--metrics", "mmd", "--measures", "dcd",
                                   "--out", str(eval_out)])
        assert res.exit_code == 0
        header, row = sweep_out.read_text().strip().split("\n")
        sweep_value = float(row.split(",")[-1])
        eval_value = json.loads(eval_out.read_text())["results"][0]["value"]
        assert sweep_value == eval_value

    def test_csv_columns(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path)
        out = tmp_path / "sweep.csv"
        res = runner.invoke(main, ["sweep", "--gen", str(gen_m), "--ref", str(ref_m),
                                   "--noise-grid", "0,0.02", "--shift-grid", "0",
                                   "--seeds", "2", "--metrics", "mmd",
                                   "--measures", "cd,dcd", "--out", str(out)])
        assert res.exit_code == 0, res.output
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "noise_frac,shift_frac,seed,mmd-cd[aligned],mmd-dcd[aligned]"
        assert len(lines) == 1 + 4 + 2  # header + detail + per-level means


class TestDeterminismAcrossThreads:
    def test_eval_and_sweep_reports_thread_invariant(self, runner, tmp_path):
        gen_m, ref_m = make_manifests(tmp_path, n=4)
        blobs = {}
        for threads in ("1", "8"):
            ev = tmp_path / f"report_{threads}.json"
            sw = tmp_path / f"sweep_{threads}.csv"
            res = runner.invoke(main, ["--threads", threads, "eval",
                                       "--gen", str(gen_m), "--ref", str(ref_m),
                                       "--measures", "cd,dcd,emd",
                                       "--metrics", "mmd,cov,1nna,snc,jsd",
                                       "--out", str(ev)])
            assert res.exit_code == 0, res.output
            res = runner.invoke(main, ["--threads", threads, "sweep",
                                       "--gen", str(gen_m), "--ref", str(ref_m),
                                       "--noise-grid", "0,0.01",
                                       "--shift-grid", "0,0.1", "--seeds", "2",
                                       "--metrics", "mmd,cov",
                                       "--measures", "dcd", "--out", str(sw)])
            assert res.exit_code == 0, res.output
            blobs[threads] = (ev.read_bytes(), sw.read_bytes())
        assert blobs["1"][0] == blobs["8"][0]
        assert blobs["1"][1] == blobs["8"][1]
