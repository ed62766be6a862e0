import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kaltesn import TimeSeries, monte_carlo_summary, nrmse, pearson


def ts(values, dt=1.0, start=0.0):
    return TimeSeries(np.atleast_2d(np.asarray(values, dtype=float)), dt, start)


class TestNrmse:
    def test_perfect(self, rng):
        x = ts(rng.standard_normal((3, 20)))
        assert nrmse(x, x) == 0.0

    def test_zero_prediction(self, rng):
        x = rng.standard_normal((3, 20))
        assert nrmse(ts(x), ts(np.zeros_like(x))) == pytest.approx(1.0)

    def test_hand_value(self):
        assert nrmse(ts([[1.0, 0.0]]), ts([[0.0, 1.0]])) == pytest.approx(np.sqrt(2.0))

    def test_errors(self):
        with pytest.raises(ValueError):
            nrmse(ts([[1.0, 2.0]]), ts([[1.0, 2.0, 3.0]]))
        with pytest.raises(ValueError):
            nrmse(ts([[0.0, 0.0]]), ts([[1.0, 2.0]]))

    def test_rotation_invariance(self, rng):
        x, y = rng.standard_normal((3, 25)), rng.standard_normal((3, 25))
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert nrmse(ts(Q @ x), ts(Q @ y)) == pytest.approx(nrmse(ts(x), ts(y)), rel=1e-12)

    def test_time_metadata_ignored(self, rng):
        x, y = rng.standard_normal((2, 10)), rng.standard_normal((2, 10))
        assert nrmse(ts(x, 0.1, 5.0), ts(y, 3.0, -2.0)) == nrmse(ts(x), ts(y))


class TestPearson:
    def test_affine(self, rng):
        x = rng.standard_normal(30)
        assert pearson(ts(x), ts(2 * x + 5)) == pytest.approx(1.0)

    def test_negated(self, rng):
        x = rng.standard_normal(30)
        assert pearson(ts(x), ts(-x)) == pytest.approx(-1.0)

    def test_hand_value(self):
        assert pearson(ts([1.0, 2.0, 3.0]), ts([1.0, 3.0, 2.0])) == pytest.approx(0.5)

    def test_matches_numpy_scalar(self, rng):
        x, y = rng.standard_normal(50), rng.standard_normal(50)
        assert pearson(ts(x), ts(y)) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)

    def test_pooled_vector_form(self, rng):
        x, y = rng.standard_normal((2, 15)), rng.standard_normal((2, 15))
        dx = x - x.mean(axis=1, keepdims=True)
        dy = y - y.mean(axis=1, keepdims=True)
        num = sum(dx[:, k] @ dy[:, k] for k in range(15))
        den = np.sqrt(sum(dx[:, k] @ dx[:, k] for k in range(15))) * np.sqrt(sum(dy[:, k] @ dy[:, k] for k in range(15)))
        assert pearson(ts(x), ts(y)) == pytest.approx(num / den, rel=1e-12)

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            pearson(ts([1.0, 1.0, 1.0]), ts([1.0, 2.0, 3.0]))

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson(ts([1.0]), ts([2.0]))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), a=st.floats(0.1, 10), b=st.floats(-10, 10))
    def test_bounded_and_invariant(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(20), rng.standard_normal(20)
        r = pearson(ts(x), ts(y))
        assert -1.0 <= r <= 1.0
        assert pearson(ts(a * x + b), ts(y)) == pytest.approx(r, abs=1e-9)


class TestSummary:
    def test_single(self):
        s = monte_carlo_summary([2.5])
        assert s == (2.5, 2.5, 2.5, 2.5, 0.0)

    def test_median(self):
        s = monte_carlo_summary([5, 1, 4, 2, 3])
        assert s.median == 3 and s.q25 == 2 and s.q75 == 4 and s.mean == 3

    def test_interpolated_quartiles(self):
        s = monte_carlo_summary([1, 2, 3, 4])
        assert (s.q25, s.median, s.q75) == (1.75, 2.5, 3.25)

    def test_normal_sample(self):
        s = monte_carlo_summary(np.random.default_rng(0).standard_normal(10_000))
        assert abs(s.mean) < 0.04 and abs(s.std - 1.0) < 0.03

    def test_empty(self):
        with pytest.raises(ValueError):
            monte_carlo_summary([])
