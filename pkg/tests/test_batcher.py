import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from codecspoof.batcher import (
    BatchError,
    FeedStrategy,
    chunks,
    feed,
    format_batch_plan,
    make_batches,
    parse_batch_plan,
    repeat_pad,
)
from codecspoof.codecsim import Waveform
from codecspoof.manifest import TrialManifest, TrialRecord, parse_manifest

from batchcheck import check_plan, has_perfect_matching, random_manifest


def wave(n, seed=0):
    return Waveform(np.random.default_rng(seed).uniform(-0.5, 0.5, n), 16000)


@pytest.mark.parametrize("strategy", ["random", "custom_class", "custom_speak", "custom_sim"])
@given(seed=st.integers(0, 2**31), half=st.integers(1, 6))
def test_plan_invariants(strategy, seed, half):
    rng = np.random.default_rng(seed)
    m = random_manifest(rng)
    plan = make_batches(m, strategy, 2 * half, seed)
    check_plan(m, plan, strategy, 2 * half)
    assert plan == make_batches(m, strategy, 2 * half, seed)


def test_custom_class_example():
    m = TrialManifest(tuple(TrialRecord("S", f"U{i}", "spoof" if i % 2 else "bonafide") for i in range(40)))
    plan = make_batches(m, "custom_class", 8, 0)
    assert len(plan) == 5
    for b in plan:
        assert sum(m[u].label for u in b) == 4


def test_custom_class_imbalanced_reuses_minority():
    recs = [TrialRecord("S", f"B{i}", "bonafide") for i in range(3)]
    recs += [TrialRecord("S", f"P{i}", "spoof") for i in range(27)]
    m = TrialManifest(tuple(recs))
    plan = make_batches(m, "custom_class", 6, 1)
    spoofs = [u for b in plan for u in b if u.startswith("P")]
    assert sorted(spoofs) == sorted(f"P{i}" for i in range(27))
    check_plan(m, plan, "custom_class", 6)


def test_custom_speak_two_speakers():
    m = parse_manifest("S1 B1 bonafide\nS1 P1 spoof\nS2 B2 bonafide\nS2 P2 spoof")
    plan = make_batches(m, "custom_speak", 4, 0)
    assert len(plan) == 1
    b = plan.batches[0]
    spoofs, bonas = b[:2], b[2:]
    assert [m[s].speaker_id for s in spoofs] == [m[x].speaker_id for x in bonas]


def test_matching_oracle_detects_failure():
    assert has_perfect_matching(["a", "b"], ["A", "B"], lambda x, y: x.upper() == y)
    assert not has_perfect_matching(["a", "b"], ["A", "A"], lambda x, y: x.upper() == y)


def test_random_same_seed_same_plan():
    m = random_manifest(np.random.default_rng(3))
    assert make_batches(m, "random", 5, 9) == make_batches(m, "random", 5, 9)
    assert make_batches(m, "random", 5, 9).batches != make_batches(m, "random", 5, 10).batches


def test_plan_errors():
    m = parse_manifest("S1 B1 bonafide\nS1 P1 spoof\nS2 P2 spoof")
    with pytest.raises(BatchError, match="'S2'"):
        make_batches(m, "custom_speak", 2, 0)
    with pytest.raises(BatchError, match="even"):
        make_batches(m, "custom_class", 3, 0)
    with pytest.raises(BatchError, match="codec tags"):
        make_batches(m, "custom_sim", 2, 0)
    with pytest.raises(BatchError):
        make_batches(parse_manifest("S1 B1 bonafide"), "custom_class", 2, 0)
    with pytest.raises(BatchError):
        make_batches(m, "curriculum", 2, 0)
    tagged = parse_manifest("S1 B1 bonafide - g711\nS1 P1 spoof - g726")
    with pytest.raises(BatchError, match="'g726'"):
        make_batches(tagged, "custom_sim", 2, 0)


def test_plan_dump_round_trip():
    m = random_manifest(np.random.default_rng(0))
    plan = make_batches(m, "custom_speak", 4, 2)
    assert parse_batch_plan(format_batch_plan(plan), "custom_speak", 4, 2) == plan


def test_feed_strategy_validation():
    with pytest.raises(BatchError):
        FeedStrategy("one_sec", chunk_samples=8000)
    with pytest.raises(BatchError):
        FeedStrategy("half_sec")
    FeedStrategy("max_len", chunk_samples=1)


def test_feed_max_len_tiles():
    a, b = wave(8000, 1), wave(24000, 2)
    out = feed([a, b], FeedStrategy("max_len"), 0)
    assert out.shape == (2, 24000)
    assert np.array_equal(out[0], np.concatenate([a.samples] * 3))
    assert np.array_equal(out[1], b.samples)


def test_feed_mean_len():
    a, b = wave(8000, 1), wave(24000, 2)
    out = feed([a, b], FeedStrategy("mean_len"), 5)
    assert out.shape == (2, 16000)
    assert np.array_equal(out[0], np.concatenate([a.samples, a.samples]))
    x = b.samples
    starts = [i for i in range(8001) if np.array_equal(x[i : i + 16000], out[1])]
    assert len(starts) == 1


def test_feed_one_sec_slice_reproducible():
    w = wave(40000, 3)
    a = feed([w], FeedStrategy("one_sec"), 12)
    b = feed([w], FeedStrategy("one_sec"), 12)
    assert a.shape == (1, 16000) and np.array_equal(a, b)
    offset = next(i for i in range(24001) if np.array_equal(w.samples[i : i + 16000], a[0]))
    others = {next(i for i in range(24001) if np.array_equal(w.samples[i : i + 16000], feed([w], FeedStrategy("one_sec"), s)[0])) for s in range(20)}
    assert len(others) > 1 and 0 <= offset <= 24000


def test_feed_errors():
    with pytest.raises(BatchError):
        feed([], FeedStrategy(), 0)
    with pytest.raises(BatchError):
        feed([Waveform(np.zeros(0), 16000)], FeedStrategy(), 0)
    with pytest.raises(BatchError):
        feed([wave(100), Waveform(np.zeros(100), 8000)], FeedStrategy("max_len"), 0)


@pytest.mark.parametrize("kind", ["one_sec", "mean_len", "max_len"])
@given(lengths=st.lists(st.integers(1, 40000), min_size=1, max_size=5), seed=st.integers(0, 1000))
def test_feed_shape_and_determinism(kind, lengths, seed):
    batch = [wave(n, i) for i, n in enumerate(lengths)]
    out = feed(batch, FeedStrategy(kind), seed)
    L = {"one_sec": 16000, "max_len": max(lengths), "mean_len": int(np.mean(lengths))}[kind]
    assert out.shape == (len(lengths), L)
    assert np.array_equal(out, feed(batch, FeedStrategy(kind), seed))


@given(st.integers(1, 50), st.integers(1, 200))
def test_repeat_pad(n, length):
    x = np.arange(n, dtype=float)
    y = repeat_pad(x, length)
    assert len(y) == length and np.array_equal(y, x[np.arange(length) % n])


def test_chunks():
    x = np.arange(40000, dtype=float)
    c = chunks(x)
    assert c.shape == (2, 16000) and np.array_equal(c[1], x[16000:32000])
    short = chunks(np.arange(5000, dtype=float))
    assert short.shape == (1, 16000) and np.array_equal(short[0], repeat_pad(np.arange(5000.0), 16000))
