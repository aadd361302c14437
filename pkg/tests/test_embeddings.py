import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from numsense import numcore as nc
from numsense.embeddings import (
    PROMPT_INIT_STD,
    EncoderParams,
    encode,
    init_encoder,
    init_prompts,
    prompt_rows,
    similarity_logits,
)
from numsense.errors import ShapeMismatchError


@pytest.fixture
def enc():
    return init_encoder(5, hidden=7, dim=4, rng=0)


class TestEncode:
    def test_rows_are_unit_norm(self, enc):
        X = np.random.default_rng(1).normal(size=(30, 5)) * 10
        np.testing.assert_allclose(np.linalg.norm(encode(enc, X).value, axis=1), 1.0, atol=1e-12)

    def test_identical_rows_give_identical_embeddings(self, enc):
        X = np.tile(np.random.default_rng(2).normal(size=(1, 5)), (3, 1))
        Z = encode(enc, X).value
        assert np.array_equal(Z[0], Z[1]) and np.array_equal(Z[1], Z[2])

    def test_bypass_only_normalizes(self):
        np.testing.assert_allclose(encode(None, [[3.0, 4.0]]).value, [[0.6, 0.8]], atol=1e-15)

    def test_wrong_width(self, enc):
        with pytest.raises(ShapeMismatchError):
            encode(enc, np.ones((2, 4)))

    def test_w1_gradient(self, enc):
        X = np.random.default_rng(3).normal(size=(6, 5))
        w = nc.constant(np.random.default_rng(4).normal(size=(6, 4)))

        def build(W1):
            return nc.sum_(nc.mul(encode(EncoderParams(W1, enc.b1, enc.W2, enc.b2), X), w))

        report = nc.gradient_check(build, [enc.W1], tolerance=1e-5, step=1e-5)
        assert report.passed, report

    def test_init_is_seeded(self):
        a, b = init_encoder(3, 4, 2, rng=9), init_encoder(3, 4, 2, rng=9)
        assert a.W1.tobytes() == b.W1.tobytes() and a.W2.tobytes() == b.W2.tobytes()
        assert not a.b1.any() and not a.b2.any()
        assert (a.d_in, a.hidden, a.dim) == (3, 4, 2)


class TestPromptRows:
    def test_gather_order(self):
        table = np.random.default_rng(5).normal(size=(3, 4))
        rows = prompt_rows(table, [0, 0, 1]).value
        unit = table / np.linalg.norm(table, axis=1, keepdims=True)
        np.testing.assert_allclose(rows, unit[[0, 0, 1]], atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-12)

    def test_gradient_only_reaches_selected_rows(self):
        table = nc.leaf(np.random.default_rng(6).normal(size=(4, 3)))
        nc.backward(nc.sum_(nc.mul(prompt_rows(table, [2]), nc.constant([[1.0, -2.0, 0.5]]))))
        assert not table.grad[[0, 1, 3]].any()
        assert table.grad[2].any()

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            prompt_rows(np.ones((3, 2)), [0, 3])

    def test_prompt_init(self):
        a = init_prompts(5, 16, rng=1)
        assert a.table.tobytes() == init_prompts(5, 16, rng=1).table.tobytes()
        assert a.k == 5
        assert abs(a.table.std() - PROMPT_INIT_STD) < 0.01


class TestSimilarityLogits:
    def test_identical(self):
        z = np.array([[0.0, 1.0]])
        assert abs(similarity_logits(z, z, 0.07).item() - 1 / 0.07) < 1e-12
        assert abs(similarity_logits(z, z, 0.07).item() - 14.2857) < 1e-4

    def test_orthogonal_and_antiparallel(self):
        z = np.array([[1.0, 0.0]])
        assert similarity_logits(z, [[0.0, 1.0]], 0.07).item() == 0.0
        assert similarity_logits(z, [[-1.0, 0.0]], 1.0).item() == -1.0

    def test_one_matrix_serves_both_directions(self):
        rng = np.random.default_rng(7)
        Z = encode(None, rng.normal(size=(4, 3))).value
        W = encode(None, rng.normal(size=(5, 3))).value
        np.testing.assert_array_equal(similarity_logits(Z, W).value, similarity_logits(W, Z).value.T)

    @given(arrays(np.float64, (4, 3), elements=st.floats(-5, 5)), st.floats(0.01, 2.0))
    def test_logits_bounded_by_inverse_temperature(self, raw, tau):
        raw = raw + np.array([1e-3, 0.0, 0.0])  # no zero rows
        if np.any(np.linalg.norm(raw, axis=1) < 1e-6):
            return
        Z = encode(None, raw)
        s = similarity_logits(Z, Z, tau).value
        assert np.all(np.abs(s) <= 1 / tau * (1 + 1e-12))

    def test_errors(self):
        with pytest.raises(ValueError):
            similarity_logits(np.ones((1, 2)), np.ones((1, 2)), 0.0)
        with pytest.raises(ShapeMismatchError):
            similarity_logits(np.ones((1, 2)), np.ones((1, 3)))
