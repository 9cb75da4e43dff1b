import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blinkrecon.grammar import (
    POST_LIKE,
    PRE_LIKE,
    UNDETERMINED,
    DigramTable,
    block_entropy,
    classify,
    index_word,
    read_digrams,
    recurrence_power_law,
    shannon_bits,
    split_words,
    train_digrams,
    write_digrams,
    write_entropy,
    write_power_law,
)
from blinkrecon.saccade import detect_saccades
from blinkrecon.symbolic import WordPair, extract_saccade_windows, velocity, _to_str, encode_letters
from oracles import sample_markov


def random_letters(rng, n):
    return "".join(rng.choice(list("0123"), size=n))


def test_single_transition():
    t = train_digrams(["0123"], D=2)
    assert t.prob("01", "23") == 1.0
    assert t.n_transitions == 1


def test_no_transitions_and_short_sequences_rejected():
    with pytest.raises(ValueError):
        train_digrams([], D=1)
    with pytest.raises(ValueError):
        train_digrams(["012"], D=2)


def test_transitions_never_cross_sequences():
    t = train_digrams(["0011", "2233"], D=2)
    assert t.n_transitions == 2
    assert t.prob("11", "22") == 0.0


def test_ragged_tail_dropped():
    assert split_words("012301", 4) == [int("0123", 4)]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.text(alphabet="0123", min_size=4, max_size=40), min_size=1, max_size=20), st.sampled_from([1, 2]))
def test_rows_sum_to_one(seqs, D):
    t = train_digrams(seqs, D)
    rows = t.p.sum(axis=1)
    has = t.counts.sum(axis=1) > 0
    assert np.all(np.abs(rows[has] - 1) <= 1e-9)
    assert np.all(rows[~has] == 0)
    assert t.p.min() >= 0 and t.p.max() <= 1


def test_iid_letters_give_flat_table_within_multinomial_bounds():
    rng = np.random.default_rng(3)
    t = train_digrams([random_letters(rng, 1000) for _ in range(100)], D=1)
    n = t.counts.sum(axis=1, keepdims=True)
    sd = np.sqrt(0.25 * 0.75 / n)
    assert np.all(np.abs(t.p - 0.25) <= 3 * sd)


def test_pre_saccade_repeats_less_than_post(clean_corpus):
    tr = clean_corpus[0]
    ev = [e for e in detect_saccades(tr) if not e.truncated]
    pre, post, _ = extract_saccade_windows(tr, ev, 24)
    a, b = train_digrams(pre, 1, "pre"), train_digrams(post, 1, "post")
    assert a.prob("0", "0") < b.prob("0", "0")


def test_digrams_stable_across_t_d_on_stationary_corpus():
    rng = np.random.default_rng(4)
    seqs20, seqs60 = [], []
    for _ in range(2000):
        P = rng.normal(0, 0.5, size=62)
        s = _to_str(encode_letters(velocity(P)))
        seqs60.append(s)
        seqs20.append(s[:20])
    a, b = train_digrams(seqs20, 2), train_digrams(seqs60, 2)
    assert np.max(np.abs(a.p - b.p)) < 0.05


def test_merge_adds_counts():
    a = train_digrams(["0011"], 2)
    b = train_digrams(["0011", "0022"], 2)
    m = a.merge(b)
    assert m.n_transitions == 3
    with pytest.raises(ValueError):
        a.merge(train_digrams(["01"], 1))


def test_counts_frozen_after_probabilities_read():
    t = train_digrams(["0011"], 2)
    _ = t.p
    with pytest.raises(ValueError):
        t.counts[0, 0] = 5


def test_identical_tables_are_undetermined():
    rng = np.random.default_rng(0)
    t = train_digrams([random_letters(rng, 200) for _ in range(50)], 2)
    for _ in range(200):
        s = random_letters(rng, 24)
        assert classify(WordPair(s[:12], s[12:]), t, t).kind == UNDETERMINED


def test_unseen_transition_is_undetermined():
    pre = train_digrams(["00000000"], 2)
    post = train_digrams(["11111111"], 2)
    v = classify(WordPair("0000", "2222"), pre, post)
    assert v.kind == UNDETERMINED


def test_clear_cases():
    pre = train_digrams(["0000000000"], 2)
    post = train_digrams(["2222222222"], 2)
    assert classify(WordPair("0000", "0000"), pre, post).kind == PRE_LIKE
    assert classify("22222222", pre, post).kind == POST_LIKE


def test_verdict_invariants():
    rng = np.random.default_rng(1)
    pre = train_digrams([random_letters(rng, 40) for _ in range(30)], 2)
    post = train_digrams(["0" * 20 + random_letters(rng, 20) for _ in range(30)], 2)
    for _ in range(500):
        s = random_letters(rng, 12)
        v = classify(s, pre, post)
        if v.kind == PRE_LIKE:
            assert v.dp_pre > v.dp_post and v.dp_pre - v.dp_post >= v.dd
        if v.kind == POST_LIKE:
            assert v.dp_post > v.dp_pre and v.dp_post - v.dp_pre >= v.dd


@st.composite
def tables_and_pair(draw):
    seed = draw(st.integers(0, 2 ** 16))
    rng = np.random.default_rng(seed)
    pre = train_digrams([random_letters(rng, 30) for _ in range(5)], 2)
    post = train_digrams([random_letters(rng, 30) for _ in range(5)], 2)
    s = draw(st.text(alphabet="0123", min_size=8, max_size=8))
    return pre, post, s


SWAP = {PRE_LIKE: POST_LIKE, POST_LIKE: PRE_LIKE, UNDETERMINED: UNDETERMINED}


@settings(max_examples=200, deadline=None)
@given(tables_and_pair())
def test_classify_swap_symmetry(args):
    pre, post, s = args
    assert classify(s, post, pre).kind == SWAP[classify(s, pre, post).kind]


def test_markov_samples_lean_to_their_own_table():
    rng = np.random.default_rng(8)
    pre_src = [random_letters(rng, 40) for _ in range(200)]
    post_src = ["".join(rng.choice(list("0011"), size=40)) for _ in range(200)]
    pre, post = train_digrams(pre_src, 2), train_digrams(post_src, 2)
    counts = {PRE_LIKE: 0, POST_LIKE: 0, UNDETERMINED: 0}
    for _ in range(10_000):
        words = sample_markov(pre.p, rng, 4)
        s = "".join(index_word(w, 2) for w in words)
        counts[classify(s, pre, post).kind] += 1
    assert counts[PRE_LIKE] > counts[POST_LIKE]


def test_entropy_trivial_cases():
    prof = block_entropy(["0123"] * 10, [1, 2, 3, 4])
    assert all(h == 0 for _, h in prof.points)
    prof = block_entropy(["0", "1", "2", "3"], [1])
    assert prof.points == [(1, 2.0)]
    assert shannon_bits(["a", "b"]) == 1.0


def test_entropy_bounds_and_undersampling():
    rng = np.random.default_rng(2)
    seqs = [random_letters(rng, 30) for _ in range(600)] + ["01"] * 3
    prof = block_entropy(seqs, range(1, 31), min_count=4)
    for t, h in prof.points:
        assert 0 <= h <= min(2 * t, math.log2(600)) + 1e-12
    short = block_entropy(["0123"] * 3, [2])
    assert short.points == [] and short.undersampled == [2]


def test_entropy_horizon_finite_for_large_corpus():
    rng = np.random.default_rng(5)
    seqs = [random_letters(rng, 60) for _ in range(500)]
    prof = block_entropy(seqs, range(2, 61, 2))
    assert prof.L is not None
    assert prof.L <= 10  # saturates at log2(500) bits, about 4.5 letters of fresh entropy


def test_entropy_suffix_alignment():
    prof = block_entropy(["0000" + x for x in "0123"], [1], align="end")
    assert prof.points == [(1, 2.0)]


def test_power_law_trivial_and_errors():
    rng = np.random.default_rng(0)
    ctx = [tuple(random_letters(rng, 6) for _ in range(6)) for _ in range(100)]
    table, _ = recurrence_power_law(ctx, [0.25, 0.5])
    assert [r for _, r in table] == [1.0, 1.0]
    with pytest.raises(ValueError):
        recurrence_power_law([], [0.1])
    with pytest.raises(ValueError):
        recurrence_power_law(ctx, [0.2, 0.1])
    with pytest.raises(ValueError):
        recurrence_power_law([("0",) * 6, ("3",) * 6][:1] and [("000", "300", "000", "000", "300", "000")], [1e-9])


def test_power_law_needs_three_points():
    ctx = [("0",) * 6] * 5
    table, slope = recurrence_power_law(ctx, [0.1, 0.2])
    assert math.isnan(slope)


def test_digram_csv_round_trip():
    rng = np.random.default_rng(6)
    a = train_digrams([random_letters(rng, 40) for _ in range(20)], 2, "pre")
    b = train_digrams([random_letters(rng, 40) for _ in range(20)], 2, "post")
    text = write_digrams([a, b])
    assert text.startswith("source,from_word,to_word,count,p\n")
    back = read_digrams(text)
    assert np.array_equal(back["pre"].counts, a.counts)
    assert np.array_equal(back["post"].counts, b.counts)
    assert write_digrams([back["pre"], back["post"]]) == text


def test_entropy_and_power_law_csv():
    prof = block_entropy(["0", "1", "2", "3"], [1])
    assert write_entropy(prof) == "t_d,H_bits\n1,2.0\n"
    assert write_power_law([(0.1, 0.5)]) == "epsilon,rho\n0.1,0.5\n"
