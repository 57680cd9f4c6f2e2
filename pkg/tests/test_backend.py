"""Scripted and tiny-transformer backend contracts."""
from __future__ import annotations

import numpy as np
import pytest

from ipsearch import (
    ArgumentError,
    BackendInfo,
    MissingEntryError,
    ScriptedBackend,
    StepOutput,
    TinyTransformer,
    ValidationError,
    VocabError,
)

from conftest import TINY_ARGS, random_scripted


def small_info():
    return BackendInfo(vocab_size=4, hidden_dim=2, eou_token_id=3)


class TestBackendInfo:
    def test_rejects_tiny_vocab(self):
        with pytest.raises(ValidationError):
            BackendInfo(vocab_size=1, hidden_dim=2, eou_token_id=0)

    def test_rejects_eou_out_of_range(self):
        with pytest.raises(ValidationError):
            BackendInfo(vocab_size=4, hidden_dim=2, eou_token_id=4)


class TestScriptedBackend:
    def table(self):
        return {
            (1,): StepOutput(
                probs=np.array([0.7, 0.2, 0.1, 0.0]),
                hidden_last=np.array([1.0, 0.0]),
                hidden_all=[np.array([1.0, 0.0])],
            ),
            (3, 1): StepOutput(
                probs=np.array([0.1, 0.1, 0.8, 0.0]), hidden_last=np.array([0.0, 1.0])
            ),
        }

    def test_forward_is_exact_lookup(self):
        backend = ScriptedBackend(small_info(), self.table())
        out = backend.forward([3, 1])
        np.testing.assert_array_equal(out.probs, [0.1, 0.1, 0.8, 0.0])
        np.testing.assert_array_equal(out.hidden_last, [0.0, 1.0])
        assert out.hidden_all is None

    def test_missing_prefix(self):
        backend = ScriptedBackend(small_info(), self.table())
        with pytest.raises(MissingEntryError):
            backend.forward([0, 0])

    def test_unnormalized_probs_rejected_at_construction(self):
        bad = {(1,): StepOutput(probs=np.array([0.5, 0.2, 0.1, 0.0]), hidden_last=np.array([1.0, 0.0]))}
        with pytest.raises(ValidationError):
            ScriptedBackend(small_info(), bad)

    def test_negative_probs_rejected(self):
        bad = {(1,): StepOutput(probs=np.array([1.2, -0.1, -0.1, 0.0]), hidden_last=np.array([1.0, 0.0]))}
        with pytest.raises(ValidationError):
            ScriptedBackend(small_info(), bad)

    def test_wrong_hidden_dim_rejected(self):
        bad = {(1,): StepOutput(probs=np.array([0.7, 0.2, 0.1, 0.0]), hidden_last=np.array([1.0, 0.0, 0.0]))}
        with pytest.raises(ValidationError):
            ScriptedBackend(small_info(), bad)

    def test_hidden_all_only_when_requested(self):
        backend = ScriptedBackend(small_info(), self.table())
        assert backend.forward([1]).hidden_all is None
        assert len(backend.forward([1], want_all_hidden=True).hidden_all) == 1

    def test_hidden_all_requested_but_absent(self):
        backend = ScriptedBackend(small_info(), self.table())
        with pytest.raises(MissingEntryError, match="hidden_all"):
            backend.forward([3, 1], want_all_hidden=True)

    def test_out_of_vocab_token(self):
        backend = ScriptedBackend(small_info(), self.table())
        with pytest.raises(VocabError):
            backend.forward([4 + 5])

    def test_empty_prefix(self):
        backend = ScriptedBackend(small_info(), self.table())
        with pytest.raises(ArgumentError):
            backend.forward([])


class TestTinyTransformer:
    def test_heads_must_divide_hidden_dim(self):
        with pytest.raises(ArgumentError):
            TinyTransformer(seed=1, vocab_size=8, hidden_dim=10, layers=1, heads=3)

    def test_probs_normalized(self, tiny_backend):
        for prefix in ([0], [5, 6, 7], list(range(20))):
            out = tiny_backend.forward(prefix)
            assert abs(float(out.probs.sum()) - 1.0) < 1e-6
            assert np.all(out.probs >= 0)

    def test_same_prefix_twice_bitwise_identical(self, tiny_backend):
        a = tiny_backend.forward([3, 1], want_all_hidden=True)
        b = tiny_backend.forward([3, 1], want_all_hidden=True)
        assert np.array_equal(a.probs, b.probs)
        assert np.array_equal(a.hidden_last, b.hidden_last)
        assert all(np.array_equal(x, y) for x, y in zip(a.hidden_all, b.hidden_all))

    def test_same_seed_same_model(self, tiny_backend):
        other = TinyTransformer(**TINY_ARGS)
        a = other.forward([3, 1, 4])
        b = tiny_backend.forward([3, 1, 4])
        assert np.array_equal(a.probs, b.probs)
        assert np.array_equal(a.hidden_last, b.hidden_last)

    def test_different_seed_differs(self):
        a = TinyTransformer(**{**TINY_ARGS, "seed": 1}).forward([3, 1])
        b = TinyTransformer(**{**TINY_ARGS, "seed": 2}).forward([3, 1])
        assert not np.array_equal(a.probs, b.probs)

    def test_vocab_error(self, tiny_backend):
        with pytest.raises(VocabError):
            tiny_backend.forward([64 + 5])

    def test_eou_convention_is_last_id(self, tiny_backend):
        assert tiny_backend.info.eou_token_id == 63

    def test_hidden_all_matches_per_position_forwards(self, tiny_backend):
        # Causality: position i's final state only sees tokens <= i, so it
        # must equal the last hidden of the truncated prefix.
        prefix = [5, 9, 13, 2, 40]
        out = tiny_backend.forward(prefix, want_all_hidden=True)
        assert len(out.hidden_all) == len(prefix)
        for i in range(len(prefix)):
            single = tiny_backend.forward(prefix[: i + 1])
            np.testing.assert_allclose(out.hidden_all[i], single.hidden_last, atol=1e-9)


class TestForwardCandidates:
    def test_single_candidate_definition(self, tiny_backend):
        got = tiny_backend.forward_candidates([2], [5])
        np.testing.assert_array_equal(got[0], tiny_backend.forward([2, 5]).hidden_last)

    def test_matches_sequential_forwards(self, tiny_backend):
        got = tiny_backend.forward_candidates([2], [5, 7, 9])
        for h, cand in zip(got, [5, 7, 9]):
            expected = tiny_backend.forward([2, cand]).hidden_last
            np.testing.assert_allclose(h, expected, atol=1e-6)

    def test_empty_candidates(self, tiny_backend):
        with pytest.raises(ArgumentError):
            tiny_backend.forward_candidates([2], [])

    def test_scripted_agrees_with_sequential(self):
        backend, _ = random_scripted(seed=11)
        prefix = [1, 2]
        got = backend.forward_candidates(prefix, [0, 1, 3])
        for h, cand in zip(got, [0, 1, 3]):
            np.testing.assert_allclose(h, backend.forward(prefix + [cand]).hidden_last, atol=1e-6)
