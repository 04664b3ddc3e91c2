"""Tests for NME spectral clustering and cluster centroids."""

import numpy as np
import pytest
from scipy.stats import ortho_group

from diarlite.errors import DataError
from diarlite.pipeline.clustering import (
    binarize_top_p,
    cluster_centroids,
    cosine_affinity,
    eigengap_count,
    laplacian_spectrum,
    nme_spectral_cluster,
    relabel_by_appearance,
)


def _tight_clusters(sizes, dim=8, noise=0.0, seed=0):
    """Points around mutually orthogonal random directions, grouped by cluster."""
    rng = np.random.default_rng(seed)
    basis = ortho_group.rvs(dim, random_state=seed)[: len(sizes)]
    points, truth = [], []
    for k, size in enumerate(sizes):
        points.append(basis[k] + noise * rng.standard_normal((size, dim)))
        truth.extend([k] * size)
    return np.concatenate(points), truth


class TestAffinity:
    def test_scaled_to_unit_interval(self, rng):
        affinity = cosine_affinity(rng.standard_normal((6, 4)))
        assert affinity.min() == pytest.approx(0.0)
        assert affinity.max() == pytest.approx(1.0)
        np.testing.assert_allclose(affinity, affinity.T)

    def test_constant_matrix_becomes_ones(self):
        np.testing.assert_array_equal(cosine_affinity(np.ones((3, 5))), np.ones((3, 3)))

    def test_binarize_is_symmetric(self, rng):
        graph = binarize_top_p(cosine_affinity(rng.standard_normal((7, 4))), 3)
        np.testing.assert_array_equal(graph, graph.T)
        assert set(np.unique(graph)) <= {0.0, 0.5, 1.0}

    def test_binarize_keeps_p_per_row(self, rng):
        affinity = cosine_affinity(rng.standard_normal((7, 4)))
        order = np.argsort(-affinity, axis=1, kind="stable")[:, :2]
        graph = binarize_top_p(affinity, 2)
        for row, cols in enumerate(order):
            assert (graph[row, cols] >= 0.5).all()


class TestEigengap:
    def test_largest_gap(self):
        count, gap = eigengap_count(np.array([0.0, 0.0, 5.0, 6.0]), max_speakers=3)
        assert count == 2
        assert gap == pytest.approx(5.0 / 6.0)

    def test_gap_is_searched_only_among_leading_values(self):
        count, _ = eigengap_count(np.array([0.0, 1.0, 1.5, 9.0]), max_speakers=2)
        assert count == 1

    def test_components_give_zero_eigenvalues(self):
        graph = np.zeros((4, 4))
        graph[0, 1] = graph[1, 0] = 1.0
        graph[2, 3] = graph[3, 2] = 1.0
        eigenvalues, _ = laplacian_spectrum(graph)
        np.testing.assert_allclose(eigenvalues[:2], 0.0, atol=1e-12)
        assert eigenvalues[2] > 1.0


class TestRelabel:
    def test_first_appearance_order(self):
        assert relabel_by_appearance([5, 5, 2, 7]) == [0, 0, 1, 2]

    def test_empty(self):
        assert relabel_by_appearance([]) == []


class TestNmeSpectralCluster:
    def test_three_separated_clusters_are_counted(self):
        embeddings, truth = _tight_clusters([10, 10, 10])
        result = nme_spectral_cluster(embeddings)
        assert result.num_speakers == 3
        assert result.labels == truth

    def test_oracle_matches_estimate(self):
        embeddings, _ = _tight_clusters([10, 10, 10], seed=4)
        estimated = nme_spectral_cluster(embeddings)
        oracle = nme_spectral_cluster(embeddings, num_speakers=3)
        assert estimated.labels == oracle.labels

    def test_oracle_two(self):
        embeddings, truth = _tight_clusters([6, 9], seed=2)
        order = np.random.default_rng(1).permutation(len(truth))
        result = nme_spectral_cluster(embeddings[order], num_speakers=2)
        assert result.num_speakers == 2
        assert result.labels == relabel_by_appearance(np.asarray(truth)[order])

    def test_identical_embeddings_are_one_speaker(self):
        result = nme_spectral_cluster(np.tile([0.6, 0.8, 0.0], (5, 1)))
        assert result.labels == [0] * 5
        assert result.num_speakers == 1

    def test_similar_embeddings_are_one_speaker(self):
        embeddings, _ = _tight_clusters([8], noise=0.01, seed=3)
        assert nme_spectral_cluster(embeddings).num_speakers == 1

    def test_single_embedding(self):
        result = nme_spectral_cluster(np.array([[1.0, 0.0]]))
        assert result.labels == [0]
        assert result.num_speakers == 1

    def test_oracle_above_embedding_count_is_clamped(self):
        embeddings, _ = _tight_clusters([1, 1, 1], seed=5)
        result = nme_spectral_cluster(embeddings, num_speakers=5)
        assert result.num_speakers == 3
        assert sorted(result.labels) == [0, 1, 2]

    def test_deterministic(self):
        embeddings, _ = _tight_clusters([5, 7], noise=0.05, seed=6)
        first = nme_spectral_cluster(embeddings, num_speakers=2, seed=9)
        second = nme_spectral_cluster(embeddings, num_speakers=2, seed=9)
        assert first == second

    def test_empty_input(self):
        with pytest.raises(DataError):
            nme_spectral_cluster(np.zeros((0, 4)))

    def test_bad_oracle(self):
        with pytest.raises(DataError, match="positive"):
            nme_spectral_cluster(np.eye(3), num_speakers=0)


class TestCentroids:
    def test_unit_norm_means(self, rng):
        embeddings = rng.standard_normal((6, 4))
        profiles = cluster_centroids(embeddings, [0, 1, 0, 1, 2, 2])
        assert profiles.ids == ["spk0", "spk1", "spk2"]
        np.testing.assert_allclose(np.linalg.norm(profiles.matrix, axis=1), 1.0)
        expected = embeddings[[0, 2]].mean(axis=0)
        np.testing.assert_allclose(
            profiles.matrix[0], expected / np.linalg.norm(expected)
        )

    def test_singleton_is_its_embedding(self):
        profiles = cluster_centroids(np.array([[0.6, 0.8]]), [0])
        np.testing.assert_allclose(profiles.matrix[0], [0.6, 0.8])

    def test_centroid_is_closer_than_members_to_each_other(self, rng):
        members = rng.standard_normal((4, 5)) + 3.0
        members /= np.linalg.norm(members, axis=1, keepdims=True)
        centroid = cluster_centroids(members, [0, 0, 0, 0]).matrix[0]
        sim = members @ members.T
        assert (members @ centroid).min() >= sim.min() - 1e-12

    def test_missing_cluster(self):
        with pytest.raises(DataError, match="Cluster 1"):
            cluster_centroids(np.eye(2), [0, 2])

    def test_antipodal_members(self):
        with pytest.raises(DataError, match="zero-norm"):
            cluster_centroids(np.array([[1.0, 0.0], [-1.0, 0.0]]), [0, 0])

    def test_label_count_mismatch(self):
        with pytest.raises(DataError):
            cluster_centroids(np.eye(3), [0, 1])
