import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import chamfer_rows, dcd_rows, emd_bruteforce
from pceval.cloud import PointCloud
from pceval.distances import (DistanceSpec, aligned_distance, chamfer, dcd,
                              emd)
from pceval.errors import InvalidArgumentError
from pceval.perturb import add_noise


class TestChamfer:
    def test_identity(self, rng):
        pts = rng.random((20, 3))
        assert chamfer(pts, pts) == 0.0

    def test_single_pair(self):
        assert chamfer([[0.0, 0, 0]], [[1.0, 0, 0]]) == 2.0

    def test_two_against_one(self):
        assert chamfer([[0.0, 0, 0], [2.0, 0, 0]], [[1.0, 0, 0]]) == 3.0

    def test_symmetry(self, rng):
        X, Y = rng.random((15, 3)), rng.random((11, 3))
        assert chamfer(X, Y) == pytest.approx(chamfer(Y, X), rel=1e-12)

    def test_matches_row_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            X = rng.random((int(rng.integers(1, 64)), 3))
            Y = rng.random((int(rng.integers(1, 64)), 3))
            assert chamfer(X, Y) == pytest.approx(chamfer_rows(X, Y), rel=1e-12)

    def test_empty_rejected(self, rng):
        with pytest.raises(InvalidArgumentError):
            chamfer(np.empty((0, 3)), rng.random((3, 3)))


class TestEmd:
    def test_identity(self, rng):
        pts = rng.random((16, 3))
        assert emd(pts, pts, solver="exact") == 0.0

    def test_two_point_bijections(self):
        X = [[0.0, 0, 0], [2.0, 0, 0]]
        Y = [[1.0, 0, 0], [3.0, 0, 0]]
        assert emd(X, Y, solver="exact") == pytest.approx(2.0, abs=1e-14)

    def test_size_mismatch(self, rng):
        with pytest.raises(InvalidArgumentError):
            emd(rng.random((3, 3)), rng.random((4, 3)))

    def test_matches_permutation_enumeration(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(1, 8))
            X = rng.random((n, 3))
            Y = rng.random((n, 3))
            assert emd(X, Y, solver="exact") == pytest.approx(
                emd_bruteforce(X, Y), rel=1e-13, abs=1e-13)

    def test_exact_symmetry(self, rng):
        X, Y = rng.random((12, 3)), rng.random((12, 3))
        assert emd(X, Y, solver="exact") == pytest.approx(
            emd(Y, X, solver="exact"), rel=1e-12)

    def test_normalize_flag(self, rng):
        X, Y = rng.random((8, 3)), rng.random((8, 3))
        raw = emd(X, Y, solver="exact")
        assert emd(X, Y, solver="exact", normalize=True) == pytest.approx(raw / 8)

    def test_approx_within_epsilon(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            X = rng.random((96, 3))
            Y = rng.random((96, 3))
            exact = emd(X, Y, solver="exact")
            approx = emd(X, Y, solver="approx", epsilon=0.01)
            assert exact - 1e-9 <= approx <= exact * 1.01

    def test_auto_solver_threshold(self, rng):
        X = rng.random((16, 3))
        from pceval.distances import resolve_emd_solver

        assert resolve_emd_solver("auto", 512) == "exact"
        assert resolve_emd_solver("auto", 513) == "approx"
        assert emd(X, X.copy(), solver="auto") == 0.0


class TestDcd:
    def test_identity(self, rng):
        pts = rng.random((20, 3))
        assert dcd(pts, pts, alpha=1000.0) == 0.0

    def test_single_pair_closed_form(self):
        got = dcd([[0.0, 0, 0]], [[1.0, 0, 0]], alpha=1.0)
        assert got == pytest.approx(1.0 - np.exp(-1.0), rel=1e-13)

    def test_hand_substitution_with_shared_neighbor(self):
        # both X points map to Y's single point, so the forward terms carry
        # the shared-target count 2; Y's point maps back to x0 alone (count 1)
        X = [[0.0, 0, 0], [0.1, 0, 0]]
        Y = [[0.0, 0, 0]]
        term_x = 0.5 * ((1 - 0.5 * np.exp(0.0)) + (1 - 0.5 * np.exp(-0.1)))
        term_y = 1 - 1.0 * np.exp(0.0)
        expect = 0.5 * (term_x + term_y)
        assert dcd(X, Y, alpha=1.0) == pytest.approx(expect, rel=1e-13)

    def test_symmetry(self, rng):
        X, Y = rng.random((14, 3)), rng.random((9, 3))
        assert dcd(X, Y, 50.0) == pytest.approx(dcd(Y, X, 50.0), rel=1e-12)

    def test_matches_row_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            X = rng.random((int(rng.integers(1, 48)), 3))
            Y = rng.random((int(rng.integers(1, 48)), 3))
            a = float(rng.uniform(0.5, 200))
            assert dcd(X, Y, a) == pytest.approx(dcd_rows(X, Y, a), rel=1e-12)

    def test_alpha_must_be_positive(self, rng):
        with pytest.raises(InvalidArgumentError):
            dcd(rng.random((3, 3)), rng.random((3, 3)), alpha=0.0)

    @settings(deadline=None, max_examples=200)
    @given(st.integers(0, 2**31 - 1))
    def test_range(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.random((int(rng.integers(1, 20)), 3)) * rng.uniform(0.1, 10)
        Y = rng.random((int(rng.integers(1, 20)), 3)) * rng.uniform(0.1, 10)
        v = dcd(X, Y, float(rng.uniform(0.01, 2000)))
        assert 0.0 <= v <= 1.0

    def test_noise_monotonicity(self):
        # seed-averaged response to growing noise never decreases
        base = PointCloud(np.random.default_rng(0).random((64, 3)))
        levels = [0.0, 0.005, 0.01, 0.02, 0.04, 0.08]
        means = []
        for frac in levels:
            vals = [dcd(base, add_noise(base, frac, seed=s), alpha=40.0)
                    for s in range(50)]
            means.append(np.mean(vals))
        assert all(b >= a for a, b in zip(means, means[1:]))


class TestAlignedDistance:
    def test_translation_cancels(self, rng):
        pts = rng.random((12, 3))
        X = PointCloud(pts)
        Y = PointCloud(pts + 5.0)
        spec = DistanceSpec(measure="cd", aligned=True)
        assert aligned_distance(X, Y, spec) == pytest.approx(0.0, abs=1e-20)

    def test_unaligned_sees_translation(self, rng):
        pts = rng.random((12, 3))
        X = PointCloud(pts)
        Y = PointCloud(pts + 5.0)
        spec = DistanceSpec(measure="cd", aligned=False)
        assert aligned_distance(X, Y, spec) > 1.0

    @pytest.mark.parametrize("measure", ["cd", "emd", "dcd"])
    def test_translation_invariance(self, measure, rng):
        X = PointCloud(rng.random((10, 3)))
        Y = PointCloud(rng.random((10, 3)))
        spec = DistanceSpec(measure=measure, aligned=True, alpha=40.0,
                            solver="exact")
        base = aligned_distance(X, Y, spec)
        for _ in range(5):
            t1, t2 = rng.normal(size=3) * 10, rng.normal(size=3) * 10
            moved = aligned_distance(PointCloud(X.points + t1),
                                     PointCloud(Y.points + t2), spec)
            assert moved == pytest.approx(base, rel=1e-9)

    def test_identity_all_measures(self, rng):
        pts = rng.random((10, 3))
        X = PointCloud(pts)
        for measure in ("cd", "emd", "dcd"):
            spec = DistanceSpec(measure=measure, aligned=True, solver="exact")
            assert aligned_distance(X, X, spec) <= 1e-12


class TestDistanceSpec:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            DistanceSpec(measure="nope")
        with pytest.raises(InvalidArgumentError):
            DistanceSpec(measure="dcd", alpha=0.0)
        with pytest.raises(InvalidArgumentError):
            DistanceSpec(measure="emd", epsilon=0.0)
        with pytest.raises(InvalidArgumentError):
            DistanceSpec(measure="emd", solver="magic")

    def test_labels(self):
        assert DistanceSpec(measure="cd", aligned=True).label() == "cd[aligned]"
        assert DistanceSpec(measure="emd", aligned=False,
                            solver="approx").label() == "emd-approx[raw]"
