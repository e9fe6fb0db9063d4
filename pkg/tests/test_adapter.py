import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedsumm import adapter
from fedsumm.adapter import AdapterConfig, DiscrepancyState, MemoryGradientStore
from fedsumm.errors import ConfigError, NumericalError, ProtocolError
from fedsumm.protocol import ClientReport

E = math.e


def test_softmax_summary_uniform():
    for n in (1, 2, 7, 100):
        assert adapter.softmax_summary(np.full(n, 3.25)) == pytest.approx(1 / n, rel=1e-15)


def test_softmax_summary_two_terms():
    assert adapter.softmax_summary([1.0, 0.0]) == pytest.approx(E / (E + 1), rel=1e-15)
    assert adapter.softmax_summary([1.0, 0.0]) == pytest.approx(0.731059, abs=1e-6)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=finite), st.floats(-100, 100))
def test_softmax_summary_shift_invariant_and_bounded(w, c):
    s = adapter.softmax_summary(w)
    assert s == pytest.approx(adapter.softmax_summary(w + c), rel=1e-12)
    assert 1 / w.size - 1e-15 <= s <= 1.0
    if np.ptp(w) > 1e-6:
        assert s > 1 / w.size


def test_softmax_summary_rejects_non_finite():
    with pytest.raises(NumericalError):
        adapter.softmax_summary([0.0, np.inf])


def test_discrepancy_identical_trajectories_give_one():
    rng = np.random.default_rng(0)
    state = DiscrepancyState()
    for _ in range(10):
        w = rng.standard_normal(6)
        state = adapter.update_discrepancy(state, w, w)
        assert state.rho == 1.0


def test_discrepancy_single_round_value():
    state = adapter.update_discrepancy(DiscrepancyState(), [1.0, 0.0], [0.0, 0.0])
    assert state.rounds_seen == 1
    assert state.rho == pytest.approx((E / (E + 1)) / 0.5, rel=1e-15)
    assert state.rho == pytest.approx(1.462117, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite)), min_size=1, max_size=8))
def test_rho_is_positive(pairs):
    state = DiscrepancyState()
    for local, glob in pairs:
        state = adapter.update_discrepancy(state, local, glob)
    assert state.rho > 0
    assert state.sum_local > 0 and state.sum_global > 0


def test_discrepancy_shape_mismatch():
    with pytest.raises(ConfigError):
        adapter.update_discrepancy(DiscrepancyState(), [1.0], [1.0, 2.0])


def make_store(losses, dim=2):
    store = MemoryGradientStore()
    for cid, loss in losses.items():
        store.upsert(cid, np.full(dim, float(cid)), loss, 1)
    return store


def test_sort_three():
    store = make_store({0: 0.5, 1: 0.2, 2: 0.9})
    ranked = adapter.sort_store(store, {0: 0.5, 1: 0.2, 2: 0.9})
    assert ranked.client_ids() == [1, 0, 2]


def test_sort_ties_keep_client_order():
    store = make_store({3: 0.4, 1: 0.4, 2: 0.4})
    assert adapter.sort_store(store, {1: 0.4, 2: 0.4, 3: 0.4}).client_ids() == [1, 2, 3]


def test_sort_matches_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        losses = {c: float(rng.choice([0.1, 0.2, 0.3, rng.random()])) for c in rng.permutation(50)}
        store = make_store(losses)
        ranked = adapter.sort_store(store, losses)
        # insertion-sort oracle over (loss, id) pairs
        oracle = []
        for cid, loss in losses.items():
            pos = 0
            while pos < len(oracle) and (oracle[pos][1], oracle[pos][0]) <= (loss, cid):
                pos += 1
            oracle.insert(pos, (cid, loss))
        assert ranked.client_ids() == [c for c, _ in oracle]
        assert all(a.loss <= b.loss for a, b in zip(ranked.entries, ranked.entries[1:]))


def test_sort_unknown_client():
    with pytest.raises(ProtocolError):
        adapter.sort_store(make_store({0: 1.0}), {5: 0.3})


def test_upsert_latest_round_wins():
    store = MemoryGradientStore()
    store.upsert(4, [1.0, 1.0], 0.9, round=1)
    store.upsert(4, [2.0, 2.0], 0.3, round=3)
    store.upsert(4, [9.0, 9.0], 0.1, round=2)
    assert len(store) == 1
    assert store.entries[0].round == 3
    assert store.entries[0].gradient.tolist() == [2.0, 2.0]


def test_adapt_zero_epsilon():
    store = make_store({0: 0.1, 1: 0.2})
    out = adapter.adapt(store, 1, 0.0, 1.7, np.array([3.0, 0.0]))
    assert np.array_equal(out, np.zeros(2))


def test_adapt_unit_norm_guard():
    store = make_store({0: 0.1, 1: 0.2})
    out = adapter.adapt(store, 1, 0.5, 2.0, np.array([0.6, 0.8]))
    assert np.array_equal(out, np.zeros(2))


def test_adapt_scales_stored_gradient():
    store = MemoryGradientStore()
    store.upsert(0, [1.0, 2.0], 0.1, 1)
    out = adapter.adapt(store, 0, 0.5, 2.0, np.array([3.0, 0.0]))
    assert out.tolist() == [1.0, 2.0]


def test_adapt_rank_out_of_range():
    with pytest.raises(ProtocolError):
        adapter.adapt(make_store({0: 0.1}), 1, 0.1, 1.0, np.ones(2))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 3, elements=finite), st.just(0.0) | st.floats(1e-6, 5), st.floats(0.01, 5), arrays(np.float64, 3, elements=finite))
def test_adapt_output_norm(stored, eps, rho, g):
    store = MemoryGradientStore()
    store.upsert(0, stored, 0.0, 1)
    out = adapter.adapt(store, 0, eps, rho, g)
    if abs(np.linalg.norm(g) - 1) > 1e-9:
        assert np.linalg.norm(out) == pytest.approx(eps * rho * np.linalg.norm(stored), rel=1e-12, abs=1e-300)
    else:
        assert np.linalg.norm(out) == 0


def test_modulation_term_values():
    assert adapter.modulation_term(1.3, 0.2, 0.7, 0.7, 5.0) == 0.0
    assert adapter.modulation_term(1.0, 1.0, 1.5, 1.0, 0.5) == pytest.approx(0.5)
    assert adapter.modulation_term(2.0, 1.0, 1.1, 1.0, 3.0) == pytest.approx(0.6)


@pytest.mark.parametrize("kwargs", [dict(epsilon=-0.1), dict(norm_tolerance=0.0), dict(correction_rate=0.0)])
def test_bad_adapter_config(kwargs):
    with pytest.raises(ConfigError):
        AdapterConfig(**kwargs)


def report(cid, grad, loss, rnd=1):
    g = np.asarray(grad, dtype=np.float64)
    return ClientReport(cid, g, loss, np.zeros_like(g), rnd)


def test_personalize_zero_epsilon():
    reports = [report(0, [3.0, 0.0], 0.4), report(1, [0.0, 2.0], 0.1)]
    out = adapter.personalize(reports, MemoryGradientStore(), {}, AdapterConfig(epsilon=0.0))
    assert all(np.array_equal(v, np.zeros(2)) for v in out.corrections.values())


def test_personalize_single_participant_uses_own_gradient():
    disc = {2: adapter.update_discrepancy(DiscrepancyState(), [1.0, 0.0], [0.0, 0.0])}
    out = adapter.personalize([report(2, [3.0, 4.0], 0.3)], MemoryGradientStore(), disc, AdapterConfig(epsilon=0.5))
    assert out.ranks == {2: 0}
    np.testing.assert_allclose(out.corrections[2], 0.5 * disc[2].rho * np.array([3.0, 4.0]), rtol=1e-15)


def test_personalize_ranks_follow_losses():
    reports = [report(0, [2.0, 0.0], 0.9), report(1, [0.0, 3.0], 0.1), report(2, [4.0, 4.0], 0.5)]
    out = adapter.personalize(reports, MemoryGradientStore(), {}, AdapterConfig(epsilon=1.0))
    order = sorted(range(3), key=lambda c: (reports[c].loss, c))
    assert out.store.client_ids() == order
    assert out.ranks == {c: order.index(c) for c in range(3)}
    for c in range(3):
        np.testing.assert_array_equal(out.corrections[c], out.store.entries[out.ranks[c]].gradient)


def test_personalize_modulation_uses_previous_loss():
    reports = [report(0, [3.0, 0.0], 0.4)]
    out = adapter.personalize(reports, MemoryGradientStore(), {}, AdapterConfig(epsilon=1.0), {0: 0.9})
    assert out.modulation[0] == pytest.approx(1.0 * 1.0 * (0.4 - 0.9) * 3.0)
    first = adapter.personalize(reports, MemoryGradientStore(), {}, AdapterConfig(epsilon=1.0))
    assert first.modulation[0] == 0.0
