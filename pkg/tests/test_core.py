"""Core primitives: losses, costs, norms, metrics."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedrosvm.core import (
    DatasetView,
    GlobalModel,
    LabeledSample,
    NormKind,
    TransportCostSpec,
    dual_norm,
    evaluate,
    feature_norm,
    hinge_loss,
    hinge_losses,
    transport_cost,
)


class TestHingeLoss:
    def test_zero_weights_give_unit_loss(self):
        # loss at w = 0 is exactly 1 for any sample
        s = LabeledSample([0.3, 0.9], +1)
        assert hinge_loss(np.zeros(2), s) == 1.0

    def test_large_margin_gives_zero(self):
        s = LabeledSample([3.0], +1)
        assert hinge_loss(np.array([1.0]), s) == 0.0

    def test_hand_computed_value(self):
        # 1 - <(1,1), (0.25,0.25)> = 0.5
        s = LabeledSample([0.25, 0.25], +1)
        assert hinge_loss(np.array([1.0, 1.0]), s) == pytest.approx(0.5)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError, match="dimension"):
            hinge_loss(np.zeros(3), LabeledSample([1.0, 2.0], -1))

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(-1, 1, size=(40, 3))
        y = rng.choice([-1, 1], size=40)
        w = rng.normal(size=3)
        batch = hinge_losses(w, X, y)
        for i in range(40):
            assert batch[i] == pytest.approx(hinge_loss(w, LabeledSample(X[i], int(y[i]))))

    def test_nonnegative_everywhere(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            p = rng.integers(1, 6)
            s = LabeledSample(rng.normal(size=p), int(rng.choice([-1, 1])))
            assert hinge_loss(rng.normal(size=p) * 10, s) >= 0.0


class TestTransportCost:
    def test_identical_points_cost_zero(self):
        a = LabeledSample([0.1, 0.2], +1)
        assert transport_cost(a, a, TransportCostSpec(NormKind.L1, 1.0)) == 0.0

    def test_label_flip_costs_kappa(self):
        a = LabeledSample([0.5, 0.5], +1)
        b = LabeledSample([0.5, 0.5], -1)
        assert transport_cost(a, b, TransportCostSpec(NormKind.L1, 0.5)) == 0.5

    def test_l1_hand_value(self):
        a = LabeledSample([0.0, 0.0], +1)
        b = LabeledSample([0.3, 0.4], +1)
        assert transport_cost(a, b, TransportCostSpec(NormKind.L1, 1.0)) == pytest.approx(0.7)

    def test_symmetry_and_identity(self):
        rng = np.random.default_rng(3)
        spec = TransportCostSpec(NormKind.LINF, 0.7)
        for _ in range(100):
            a = LabeledSample(rng.uniform(0, 1, 3), int(rng.choice([-1, 1])))
            b = LabeledSample(rng.uniform(0, 1, 3), int(rng.choice([-1, 1])))
            ab = transport_cost(a, b, spec)
            assert ab == pytest.approx(transport_cost(b, a, spec))
            assert ab >= 0.0
            if ab == 0.0:
                assert a.y == b.y and np.allclose(a.x, b.x)

    def test_negative_kappa_rejected(self):
        with pytest.raises(ValueError):
            TransportCostSpec(NormKind.L1, -0.1)


class TestDualNorm:
    def test_zero_vector(self):
        assert dual_norm(np.zeros(4), NormKind.L1) == 0.0
        assert dual_norm(np.zeros(4), NormKind.LINF) == 0.0

    def test_l1_pairs_with_linf(self):
        assert dual_norm(np.array([1.0, -2.0, 3.0]), NormKind.L1) == 3.0

    def test_linf_pairs_with_l1(self):
        assert dual_norm(np.array([1.0, -2.0, 3.0]), NormKind.LINF) == 6.0

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=8),
           st.lists(st.floats(-100, 100), min_size=1, max_size=8),
           st.sampled_from([NormKind.L1, NormKind.LINF]))
    def test_holder_pairing(self, u, v, norm):
        n = min(len(u), len(v))
        u = np.array(u[:n])
        v = np.array(v[:n])
        assert abs(u @ v) <= feature_norm(u, norm) * dual_norm(v, norm) + 1e-9


class TestEvaluate:
    def test_perfect_separation(self):
        data = DatasetView([[1.0], [2.0], [-1.0], [-2.0]], [1, 1, -1, -1])
        m = evaluate(GlobalModel([1.0]), data)
        assert m.f1 == 1.0 and m.mccr == 1.0

    def test_all_positive_predictions_on_balanced_data(self):
        data = DatasetView([[1.0]] * 10, [1] * 5 + [-1] * 5)
        m = evaluate(GlobalModel([1.0]), data)
        assert m.mccr == pytest.approx(0.5)

    def test_hand_computed_confusion(self):
        # 3 TP, 1 FN, 1 FP, 5 TN -> f1 = 2*3/(2*3+1+1) = 0.75
        X = [[1.0]] * 3 + [[-1.0]] + [[1.0]] + [[-1.0]] * 5
        y = [1, 1, 1, 1, -1, -1, -1, -1, -1, -1]
        m = evaluate(GlobalModel([1.0]), DatasetView(X, y))
        assert m.f1 == pytest.approx(0.75)
        assert m.confusion.tolist() == [[3, 1], [1, 5]]
        assert m.mccr == pytest.approx((3 / 4 + 5 / 6) / 2)

    def test_zero_score_predicts_positive(self):
        data = DatasetView([[0.0]], [1])
        m = evaluate(GlobalModel([1.0]), data)
        assert m.confusion[0, 0] == 1  # counted as TP, not FN

    def test_counts_sum_to_n(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(37, 2))
        y = rng.choice([-1, 1], size=37)
        m = evaluate(GlobalModel(rng.normal(size=2)), DatasetView(X, y))
        assert m.confusion.sum() == 37 == m.n


class TestViews:
    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError, match="labels"):
            DatasetView([[0.0], [1.0]], [0, 1])

    def test_subset_copies(self):
        d = DatasetView([[1.0], [2.0], [3.0]], [1, -1, 1])
        s = d.subset([0, 2])
        s.X[0, 0] = 99.0
        assert d.X[0, 0] == 1.0
        assert s.y.tolist() == [1, 1]
