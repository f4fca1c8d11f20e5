import numpy as np
import pytest

from proxyslice.datasets import Sample, from_samples, synth_blobs
from proxyslice.scorers import (fit_reconstruction, load_scores, score,
                                write_scores)


def points_dataset(points):
    points = np.asarray(points, dtype=np.float64)
    return from_samples(
        [Sample(p.reshape(1, -1, 1), 0) for p in points], "points")


class TestFitReconstruction:
    def test_full_rank_scores_zero(self):
        ds = synth_blobs(3, 8, 5, 0.2, 0)
        scorer = fit_reconstruction(ds, rank=5, seed=0)
        assert np.all(score(scorer, ds).scores < 1e-10)

    def test_line_with_outlier(self):
        # symmetric points on y = x plus (1, -1): the first component is the
        # line, the off-line point scores its squared perpendicular distance
        pts = [(-2, -2), (-1, -1), (1, 1), (2, 2), (1, -1), (-1, 1)]
        ds = points_dataset(pts)
        scorer = fit_reconstruction(ds, rank=1, seed=0)
        s = score(scorer, ds).scores * ds.dim  # undo the MSE division
        assert s[:4] == pytest.approx([0, 0, 0, 0], abs=1e-10)
        assert s[4] == pytest.approx(2.0)
        assert s[5] == pytest.approx(2.0)

    def test_components_match_dense_eigensolver(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            pts = rng.standard_normal((30, 6)) * rng.uniform(0.5, 3, 6)
            ds = points_dataset(pts)
            scorer = fit_reconstruction(ds, rank=3, seed=trial)
            centered = pts - pts.mean(axis=0)
            cov = centered.T @ centered / len(pts)
            evals, evecs = np.linalg.eigh(cov)
            expected = evecs[:, np.argsort(evals)[::-1][:3]].T
            for got, exp in zip(scorer.components, expected):
                sign = np.sign(got @ exp)
                assert np.allclose(got, sign * exp, atol=1e-6)

    def test_orthonormal_components(self):
        ds = synth_blobs(2, 20, 8, 0.3, 1)
        scorer = fit_reconstruction(ds, rank=4, seed=0)
        gram = scorer.components @ scorer.components.T
        assert np.allclose(gram, np.eye(4), atol=1e-8)

    def test_rank_bounds(self):
        ds = synth_blobs(2, 5, 4, 0.1, 0)
        with pytest.raises(ValueError):
            fit_reconstruction(ds, rank=5, seed=0)
        with pytest.raises(ValueError):
            fit_reconstruction(ds, rank=0, seed=0)

    def test_seed_determinism(self):
        ds = synth_blobs(2, 10, 6, 0.2, 0)
        a = fit_reconstruction(ds, rank=2, seed=3)
        b = fit_reconstruction(ds, rank=2, seed=3)
        assert np.array_equal(a.components, b.components)


class TestScore:
    def test_mean_sample_scores_zero(self):
        ds = synth_blobs(2, 10, 4, 0.2, 0)
        scorer = fit_reconstruction(ds, rank=2, seed=0)
        mean_ds = points_dataset([scorer.mean])
        assert score(scorer, mean_ds).scores[0] == pytest.approx(0.0, abs=1e-12)

    def test_pythagorean_variance_identity(self):
        ds = synth_blobs(3, 15, 6, 0.3, 2)
        scorer = fit_reconstruction(ds, rank=2, seed=0)
        flat = ds.flat_pixels()
        centered = flat - flat.mean(axis=0)
        total_var = np.sum(centered ** 2)
        captured = np.sum((centered @ scorer.components.T) ** 2)
        total_score = score(scorer, ds).scores.sum() * ds.dim
        assert total_score == pytest.approx(total_var - captured, abs=1e-8)

    def test_scale_covariance(self):
        ds = synth_blobs(2, 12, 5, 0.2, 1)
        scorer = fit_reconstruction(ds, rank=2, seed=0)
        base = score(scorer, ds).scores
        scaled = from_samples(
            [Sample(s.pixels * 3.0, s.label) for s in ds.samples], "x3")
        scaled_scorer = fit_reconstruction(scaled, rank=2, seed=0)
        assert np.allclose(score(scaled_scorer, scaled).scores, 9.0 * base,
                           atol=1e-8)

    def test_dimension_mismatch(self):
        ds = synth_blobs(2, 5, 4, 0.1, 0)
        other = synth_blobs(2, 5, 6, 0.1, 0)
        scorer = fit_reconstruction(ds, rank=2, seed=0)
        with pytest.raises(ValueError, match="dim"):
            score(scorer, other)


class TestLoadScores:
    def write(self, tmp_path, rows):
        path = tmp_path / "scores.csv"
        path.write_text("index,score\n" + "\n".join(rows) + "\n")
        return path

    def test_well_formed(self, tmp_path):
        ds = synth_blobs(2, 2, 2, 0.1, 0)
        path = self.write(tmp_path, ["0,1.5", "1,0.5", "2,2.5", "3,0.25"])
        vec = load_scores(path, ds)
        assert vec.origin == "classifier_loss"
        assert list(vec.scores) == [1.5, 0.5, 2.5, 0.25]

    def test_missing_index(self, tmp_path):
        ds = synth_blobs(2, 2, 2, 0.1, 0)
        path = self.write(tmp_path, ["0,1.0", "1,1.0", "3,1.0"])
        with pytest.raises(ValueError, match="index 2"):
            load_scores(path, ds)

    def test_duplicate_index(self, tmp_path):
        ds = synth_blobs(2, 2, 2, 0.1, 0)
        path = self.write(tmp_path, ["0,1.0", "0,2.0", "2,1.0", "3,1.0"])
        with pytest.raises(ValueError, match="duplicate index 0"):
            load_scores(path, ds)

    def test_non_finite(self, tmp_path):
        ds = synth_blobs(2, 2, 2, 0.1, 0)
        path = self.write(tmp_path, ["0,1.0", "1,inf", "2,1.0", "3,1.0"])
        with pytest.raises(ValueError, match="non-finite"):
            load_scores(path, ds)

    def test_round_trip_with_writer(self, tmp_path):
        ds = synth_blobs(3, 4, 5, 0.2, 0)
        scorer = fit_reconstruction(ds, rank=2, seed=0)
        vec = score(scorer, ds)
        write_scores(vec, tmp_path / "s.csv")
        back = load_scores(tmp_path / "s.csv", ds)
        assert np.array_equal(back.scores, vec.scores)
