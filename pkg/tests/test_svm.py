import numpy as np
import pytest
from numpy.testing import assert_allclose

from qksvm.errors import DegenerateDataError, DegenerateModelError, UsageError
from qksvm.kernels import GramMatrix, KernelSpec, gram_matrix, rbf_kernel
from qksvm.svm import (
    SvmModel,
    TrainConfig,
    compute_bias,
    decision_value,
    decision_values,
    dual_objective,
    predict,
    predict_many,
    train_smo,
)
from qksvm.validation import oracle_bias, qp_dual_oracle


TWO_POINT_K = np.array([[1.0, -1.0], [-1.0, 1.0]])
TWO_POINT_Y = np.array([-1.0, 1.0])


def rbf_gram(points, gamma):
    return gram_matrix(points, KernelSpec("RBF", gamma=gamma))


class TestTrainSmo:
    def test_two_point_analytic_solution(self):
        model = train_smo(TWO_POINT_K, TWO_POINT_Y, TrainConfig(C=10.0))
        assert_allclose(model.alphas, [0.5, 0.5], atol=1e-9)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        assert model.dual_objective == pytest.approx(0.5, abs=1e-9)
        assert set(model.support_indices.tolist()) == {0, 1}

    def test_xor_with_rbf_kernel(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        labels = np.array([-1.0, 1.0, 1.0, -1.0])
        gram = rbf_gram(points, gamma=1.0)
        model = train_smo(gram, labels, TrainConfig(C=10.0, kkt_tolerance=1e-6))
        predictions = predict_many(model, gram.values)
        assert np.array_equal(predictions, labels.astype(int))
        assert len(model.support_indices) == 4
        _, oracle_objective = qp_dual_oracle(gram.values, labels, 10.0)
        assert model.dual_objective == pytest.approx(oracle_objective, abs=1e-6)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateDataError):
            train_smo(np.eye(3), np.ones(3), TrainConfig(C=1.0))

    def test_feasibility_on_random_problems(self, rng):
        for _ in range(20):
            n = int(rng.integers(6, 13))
            points = rng.normal(size=(n, 2))
            labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            if np.all(labels == labels[0]):
                labels[0] = -labels[0]
            c = float(rng.choice([0.5, 1.0, 10.0]))
            model = train_smo(
                rbf_gram(points, 0.7), labels, TrainConfig(C=c, kkt_tolerance=1e-4)
            )
            assert np.all(model.alphas >= 0.0)
            assert np.all(model.alphas <= c + 1e-12)
            assert abs(np.dot(model.alphas, labels)) < 1e-8
            assert len(model.support_indices) > 0

    def test_matches_projected_gradient_oracle(self, rng):
        for trial in range(50):
            n = int(rng.integers(4, 13))
            points = rng.normal(size=(n, 3))
            labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            if np.all(labels == labels[0]):
                labels[rng.integers(n)] = -labels[0]
            c = float(rng.choice([0.5, 1.0, 5.0]))
            gram = rbf_gram(points, 0.5)
            model = train_smo(gram, labels, TrainConfig(C=c, kkt_tolerance=1e-5))
            oracle_alphas, oracle_objective = qp_dual_oracle(gram.values, labels, c)
            assert model.dual_objective == pytest.approx(oracle_objective, abs=1e-6)
            queries = rng.normal(size=(8, 3))
            rows = np.array(
                [[rbf_kernel(q, p, 0.5) for p in points] for q in queries]
            )
            ours = predict_many(model, rows)
            bias = oracle_bias(gram.values, labels, oracle_alphas, c)
            oracle_scores = rows @ (oracle_alphas * labels) + bias
            theirs = np.where(oracle_scores >= 0.0, 1, -1)
            assert np.array_equal(ours, theirs)

    def test_label_symmetry(self, rng):
        points = rng.normal(size=(10, 2))
        labels = np.where(rng.random(10) < 0.5, -1.0, 1.0)
        labels[:2] = (-1.0, 1.0)
        gram = rbf_gram(points, 1.0)
        config = TrainConfig(C=2.0, kkt_tolerance=1e-6)
        model = train_smo(gram, labels, config)
        flipped = train_smo(gram, -labels, config)
        rows = gram.values[:4]
        assert np.array_equal(predict_many(model, rows), -predict_many(flipped, rows))

    def test_duplicated_point_with_halved_box_keeps_decisions(self, rng):
        points = rng.normal(size=(8, 2))
        labels = np.where(np.arange(8) % 2 == 0, -1.0, 1.0)
        c = 2.0
        gram = rbf_gram(points, 0.8).values
        config = TrainConfig(C=c, kkt_tolerance=1e-8)
        base = train_smo(gram, labels, config)

        doubled_points = np.vstack([points, points[:1]])
        doubled_labels = np.append(labels, labels[0])
        doubled_gram = np.array(
            [[rbf_kernel(a, b, 0.8) for b in doubled_points] for a in doubled_points]
        )
        box = np.full(9, c)
        box[0] = box[8] = c / 2  # the duplicate shares the original point's budget
        doubled = train_smo(doubled_gram, doubled_labels, config, per_point_C=box)

        queries = rng.normal(size=(6, 2))
        rows_base = np.array([[rbf_kernel(q, p, 0.8) for p in points] for q in queries])
        rows_doubled = np.array(
            [[rbf_kernel(q, p, 0.8) for p in doubled_points] for q in queries]
        )
        assert_allclose(
            decision_values(base, rows_base),
            decision_values(doubled, rows_doubled),
            atol=1e-6,
        )

    def test_changing_gamma_changes_model(self, rng):
        points = rng.normal(size=(10, 2))
        labels = np.where(rng.random(10) < 0.5, -1.0, 1.0)
        labels[:2] = (-1.0, 1.0)
        config = TrainConfig(C=1.0)
        narrow = train_smo(rbf_gram(points, 2.0), labels, config)
        wide = train_smo(rbf_gram(points, 1.0), labels, config)
        assert not np.allclose(narrow.alphas, wide.alphas)


class TestComputeBias:
    def test_symmetric_two_point(self):
        assert compute_bias(TWO_POINT_K, TWO_POINT_Y, [0.5, 0.5], 10.0) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_shifted_geometry_absorbed_by_bias(self):
        # 1-D points 0 and 2 under the linear kernel: f(x) = x - 1
        kernel = np.array([[0.0, 0.0], [0.0, 4.0]])
        model = train_smo(kernel, TWO_POINT_Y, TrainConfig(C=10.0))
        assert_allclose(model.alphas, [0.5, 0.5], atol=1e-9)
        assert model.bias == pytest.approx(-1.0, abs=1e-9)

    def test_fallback_without_free_vectors(self):
        # tiny C forces both multipliers to the bound; midpoint rule must stay finite
        kernel = np.array([[1.0, 0.9], [0.9, 1.0]])
        bias = compute_bias(kernel, TWO_POINT_Y, [0.01, 0.01], C=0.01)
        assert np.isfinite(bias)

    def test_no_support_vectors_rejected(self):
        with pytest.raises(DegenerateModelError):
            compute_bias(TWO_POINT_K, TWO_POINT_Y, [0.0, 0.0], 1.0)


class TestDecisionAndPredict:
    def test_two_point_midpoint_is_zero(self):
        model = train_smo(TWO_POINT_K, TWO_POINT_Y, TrainConfig(C=10.0))
        # kernel row of the midpoint x=0 under the linear kernel
        assert decision_value(model, [0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)

    def test_free_support_vector_sits_on_margin(self, rng):
        points = rng.normal(size=(12, 2))
        labels = np.where(rng.random(12) < 0.5, -1.0, 1.0)
        labels[:2] = (-1.0, 1.0)
        gram = rbf_gram(points, 0.6)
        config = TrainConfig(C=5.0, kkt_tolerance=1e-6)
        model = train_smo(gram, labels, config)
        free = [
            i
            for i in model.support_indices
            if 1e-8 < model.alphas[i] < 5.0 - 1e-8
        ]
        for i in free:
            margin = labels[i] * decision_value(model, gram.values[i])
            assert margin == pytest.approx(1.0, abs=1e-5)

    def test_zero_alpha_model_returns_bias(self):
        model = SvmModel(
            alphas=np.zeros(2),
            labels=TWO_POINT_Y,
            support_indices=np.array([], dtype=np.int64),
            bias=0.7,
            C=1.0,
            dual_objective=0.0,
        )
        assert decision_value(model, [0.3, 0.4]) == 0.7

    def test_sign_convention(self):
        model = SvmModel(
            alphas=np.zeros(2),
            labels=TWO_POINT_Y,
            support_indices=np.array([], dtype=np.int64),
            bias=0.0,
            C=1.0,
            dual_objective=0.0,
        )
        assert predict(model, [0.0, 0.0]) == 1  # exact zero -> +1
        object.__setattr__(model, "bias", 2.3)
        assert predict(model, [0.0, 0.0]) == 1
        object.__setattr__(model, "bias", -0.1)
        assert predict(model, [0.0, 0.0]) == -1

    def test_row_length_checked(self):
        model = train_smo(TWO_POINT_K, TWO_POINT_Y, TrainConfig(C=10.0))
        with pytest.raises(UsageError):
            decision_value(model, [1.0, 2.0, 3.0])


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        model = train_smo(TWO_POINT_K, TWO_POINT_Y, TrainConfig(C=10.0))
        path = tmp_path / "model.json"
        model.save(path)
        loaded = SvmModel.load(path)
        assert np.array_equal(loaded.alphas, model.alphas)
        assert np.array_equal(loaded.support_indices, model.support_indices)
        assert loaded.bias == model.bias
        assert loaded.dual_objective == model.dual_objective


class TestDualObjective:
    def test_zero_alphas(self):
        assert dual_objective(TWO_POINT_K, TWO_POINT_Y, np.zeros(2)) == 0.0

    def test_matches_hand_computation(self):
        # W(a) = a1 + a2 - 0.5 * (a1^2 K11 + 2 a1 a2 y1 y2 K12 + a2^2 K22)
        value = dual_objective(TWO_POINT_K, TWO_POINT_Y, [0.5, 0.5])
        assert value == pytest.approx(1.0 - 0.5 * (0.25 + 2 * 0.25 + 0.25), abs=1e-15)
