import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsumm import metrics, models
from fedsumm.errors import UnsupportedMetricError
from fedsumm.models import Dataset, ModelSpec
from helpers import brute_ngram_overlap, f1, random_batch, table_lcs

tokens = st.lists(st.sampled_from(list("abcde")), max_size=12)


def random_pair(rng):
    vocab = list("abcdef")[: int(rng.integers(2, 7))]
    a = [str(t) for t in rng.choice(vocab, size=int(rng.integers(0, 15)))]
    b = [str(t) for t in rng.choice(vocab, size=int(rng.integers(0, 15)))]
    return a, b


def test_identical_sequences_score_one():
    seq = "the cat sat on the mat".split()
    assert metrics.rouge_n(seq, seq, 1).f1 == 1.0
    assert metrics.rouge_n(seq, seq, 2).f1 == 1.0
    assert metrics.rouge_l(seq, seq).f1 == 1.0


def test_rouge1_worked_example():
    s = metrics.rouge_n("a b c".split(), "a b d".split(), 1)
    assert s.precision == pytest.approx(2 / 3, rel=1e-15)
    assert s.recall == pytest.approx(2 / 3, rel=1e-15)
    assert s.f1 == pytest.approx(2 / 3, rel=1e-15)


def test_disjoint_sequences_score_zero():
    s = metrics.rouge_n("a b".split(), "c d".split(), 1)
    assert (s.recall, s.precision, s.f1) == (0.0, 0.0, 0.0)


def test_empty_sequences():
    assert metrics.rouge_n([], ["a"], 1) == metrics.RougeScore(0.0, 0.0, 0.0)
    assert metrics.rouge_n(["a"], ["a"], 2) == metrics.RougeScore(0.0, 0.0, 0.0)
    assert metrics.rouge_l([], "a b".split()) == metrics.RougeScore(0.0, 0.0, 0.0)


def test_rouge_l_worked_example():
    assert metrics.lcs_length("a c b".split(), "a b c".split()) == 2
    s = metrics.rouge_l("a c b".split(), "a b c".split())
    assert s.precision == pytest.approx(2 / 3, rel=1e-15)
    assert s.recall == pytest.approx(2 / 3, rel=1e-15)
    assert s.f1 == pytest.approx(2 / 3, rel=1e-15)


@pytest.mark.parametrize("n", [1, 2])
def test_rouge_n_matches_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(200):
        cand, ref = random_pair(rng)
        hits, n_cand, n_ref = brute_ngram_overlap(cand, ref, n)
        p = hits / n_cand if n_cand else 0.0
        r = hits / n_ref if n_ref else 0.0
        s = metrics.rouge_n(cand, ref, n)
        assert (s.precision, s.recall, s.f1) == (p, r, f1(p, r))


def test_rouge_l_matches_table_oracle():
    rng = np.random.default_rng(9)
    for _ in range(200):
        cand, ref = random_pair(rng)
        lcs = table_lcs(cand, ref)
        assert metrics.lcs_length(cand, ref) == lcs
        p = lcs / len(cand) if cand else 0.0
        r = lcs / len(ref) if ref else 0.0
        s = metrics.rouge_l(cand, ref)
        assert (s.precision, s.recall, s.f1) == (p, r, f1(p, r))


@settings(max_examples=200, deadline=None)
@given(tokens, tokens, st.integers(1, 3))
def test_rouge_n_symmetry_and_bounds(a, b, n):
    ab, ba = metrics.rouge_n(a, b, n), metrics.rouge_n(b, a, n)
    assert ab.f1 == pytest.approx(ba.f1, rel=1e-15)
    assert (ab.precision, ab.recall) == (ba.recall, ba.precision)
    for v in (ab.precision, ab.recall, ab.f1):
        assert 0.0 <= v <= 1.0


@settings(max_examples=200, deadline=None)
@given(tokens, tokens)
def test_rouge_l_symmetry_and_bounds(a, b):
    ab, ba = metrics.rouge_l(a, b), metrics.rouge_l(b, a)
    assert ab.f1 == pytest.approx(ba.f1, rel=1e-15)
    for v in (ab.precision, ab.recall, ab.f1):
        assert 0.0 <= v <= 1.0


@settings(max_examples=200, deadline=None)
@given(tokens, st.lists(st.sampled_from(list("abcde")), min_size=1, max_size=12), st.data())
def test_appending_reference_token_never_lowers_overlap(cand, ref, data):
    tok = data.draw(st.sampled_from(ref))
    before = brute_ngram_overlap(cand, ref, 1)[0]
    after = metrics.rouge_n(cand + [tok], ref, 1)
    assert after.precision * (len(cand) + 1) >= before - 1e-12


def test_f1_invariant():
    s = metrics.RougeScore.from_pr(0.25, 0.5)
    assert s.f1 == pytest.approx(2 * 0.25 * 0.5 / 0.75, rel=1e-12)
    assert metrics.RougeScore.from_pr(0.0, 0.0).f1 == 0.0


def test_tokenizers():
    assert metrics.tokenize(" a  b\tc ") == ["a", "b", "c"]
    assert metrics.tokenize("联邦 学习", "char") == ["联", "邦", "学", "习"]


def test_perplexity_uniform_predictor():
    spec = ModelSpec("logistic", 3, 5)
    batch = random_batch(np.random.default_rng(0), spec, n=10)
    assert metrics.perplexity(spec, np.zeros(spec.param_dim), batch) == pytest.approx(5.0, rel=1e-14)


def test_perplexity_perfect_predictor():
    spec = ModelSpec("logistic", 2, 2)
    w = np.array([1e3, 0.0, 0.0, 1e3, 0.0, 0.0])
    batch = Dataset(np.eye(2), np.array([0, 1]))
    assert metrics.perplexity(spec, w, batch) == 1.0


def test_perplexity_composes_with_loss():
    rng = np.random.default_rng(3)
    for _ in range(20):
        spec = ModelSpec("mlp", 3, 4, 5, "cross-entropy")
        w = rng.standard_normal(spec.param_dim)
        batch = random_batch(rng, spec, n=8)
        ppl = metrics.perplexity(spec, w, batch)
        assert ppl == pytest.approx(math.exp(models.loss(spec, w, batch)), rel=1e-12)
        assert ppl >= 1.0


def test_perplexity_rejects_regression():
    spec = ModelSpec("linear", 2, 1)
    with pytest.raises(UnsupportedMetricError):
        metrics.perplexity(spec, np.zeros(3), Dataset(np.zeros((1, 2)), np.zeros((1, 1))))
