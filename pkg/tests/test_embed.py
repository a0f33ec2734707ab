import math

import numpy as np
import pytest

from mfkit.corpus import FOUNDATIONS, FoundationLabel
from mfkit.embed import (
    EmbeddingStore,
    build_microframe,
    build_microframes,
    build_null_model,
    clamp_sample_size,
    cosine,
    frameaxis_score,
    load_vectors,
    save_vectors,
    semantic_similarity_score,
)
from mfkit.errors import FormatError
from mfkit.lexicon import CountEntry, Lexicon, LexiconKind, Polarity

CARE = FoundationLabel.CARE
FAIR = FoundationLabel.FAIRNESS


def store_of(mapping):
    vectors = {t: np.array(v, dtype=np.float64) for t, v in mapping.items()}
    dim = len(next(iter(vectors.values())))
    return EmbeddingStore(dimension=dim, vectors=vectors)


def count_lexicon_of(entries, name="lex"):
    """entries: term -> (foundation, polarity or None)"""
    exact = {t: CountEntry(f, p) for t, (f, p) in entries.items()}
    return Lexicon(name, LexiconKind.COUNT, exact, {})


def toy_polar_lexicon():
    entries = {}
    for f in FOUNDATIONS:
        entries[f"{f.value}_virtue"] = (f, Polarity.VIRTUE)
        entries[f"{f.value}_vice"] = (f, Polarity.VICE)
    return count_lexicon_of(entries)


def random_polar_setup(rng, dim=50, extra_vocab=400):
    """Store with isotropic vectors covering a polar lexicon plus background."""
    lex = toy_polar_lexicon()
    tokens = list(lex.exact) + [f"bg{i}" for i in range(extra_vocab)]
    vectors = {t: rng.normal(size=dim) for t in tokens}
    return lex, store_of(vectors), [f"bg{i}" for i in range(extra_vocab)]


class TestVectorParser:
    def test_minimal_file(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1.0 0.0 0.0\nb 0.0 1.0 0.5\n", encoding="utf-8")
        store = load_vectors(path)
        assert len(store) == 2 and store.dimension == 3
        assert store.vectors["b"].tolist() == [0.0, 1.0, 0.5]

    def test_arity_mismatch_line_number(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\na 1.0 0.0 0.0\nb 0.0 1.0\n", encoding="utf-8")
        with pytest.raises(FormatError, match="line 3"):
            load_vectors(path)

    def test_duplicate_token(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 2\na 1 0\na 0 1\n", encoding="utf-8")
        with pytest.raises(FormatError, match="duplicate token 'a'"):
            load_vectors(path)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("3 2\na 1 0\nb 0 1\n", encoding="utf-8")
        with pytest.raises(FormatError, match="declares 3"):
            load_vectors(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("1 2\na 1 x\n", encoding="utf-8")
        with pytest.raises(FormatError, match="line 2"):
            load_vectors(path)

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        store = store_of({f"t{i}": rng.normal(size=7) for i in range(20)})
        first = load_vectors(save_vectors(store, tmp_path / "a.txt"))
        second = load_vectors(save_vectors(first, tmp_path / "b.txt"))
        assert first.dimension == second.dimension == 7
        for token, vec in first.vectors.items():
            assert np.array_equal(vec, second.vectors[token])
            assert np.array_equal(vec, store.vectors[token])


class TestSemanticSimilarity:
    def setup_method(self):
        self.lex = count_lexicon_of(
            {
                "care_anchor": (CARE, None),
                "fair_anchor": (FAIR, None),
                "loyalty_anchor": (FoundationLabel.LOYALTY, None),
                "authority_anchor": (FoundationLabel.AUTHORITY, None),
                "sanctity_anchor": (FoundationLabel.SANCTITY, None),
            }
        )

    def _store(self):
        return store_of(
            {
                "care_anchor": [1, 0, 0, 0, 0],
                "fair_anchor": [0, 1, 0, 0, 0],
                "loyalty_anchor": [0, 0, 1, 0, 0],
                "authority_anchor": [0, 0, 0, 1, 0],
                "sanctity_anchor": [0, 0, 0, 0, 1],
                "neardoc": [0.9, 0.1, 0, 0, 0],
            }
        )

    def test_self_anchor_cosine_one(self):
        pred = semantic_similarity_score(["care_anchor"], self.lex, self._store())
        assert pred.labels == frozenset({CARE})
        assert pred.scores[CARE] == pytest.approx(1.0)

    def test_two_d_toy(self):
        pred = semantic_similarity_score(["neardoc"], self.lex, self._store())
        assert pred.labels == frozenset({CARE})

    def test_all_oov_unknown(self):
        pred = semantic_similarity_score(["zzz"], self.lex, self._store())
        assert pred.labels == frozenset({FoundationLabel.UNKNOWN})
        assert pred.scores is None

    def test_empty_anchor_pole_error(self):
        store = self._store()
        del store.vectors["sanctity_anchor"]
        with pytest.raises(ValueError, match="sanctity"):
            semantic_similarity_score(["neardoc"], self.lex, store)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(11)
        dim = 8
        lex = count_lexicon_of(
            {f"{f.value}_a": (f, None) for f in FOUNDATIONS}
        )
        base = {f"{f.value}_a": rng.normal(size=dim) for f in FOUNDATIONS}
        base.update({f"w{i}": rng.normal(size=dim) for i in range(10)})
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        rotated = {t: q @ v for t, v in base.items()}
        doc = ["w0", "w3", "w7", "w7"]
        before = semantic_similarity_score(doc, lex, store_of(base))
        after = semantic_similarity_score(doc, lex, store_of(rotated))
        assert before.labels == after.labels
        for f in FOUNDATIONS:
            assert before.scores[f] == pytest.approx(after.scores[f], abs=1e-9)


class TestMicroFrames:
    def test_axis_hand_arithmetic(self):
        lex = count_lexicon_of(
            {"vgood": (CARE, Polarity.VIRTUE), "vbad": (CARE, Polarity.VICE)}
        )
        store = store_of({"vgood": [1, 0], "vbad": [0, 1]})
        frame = build_microframe(lex, store, CARE)
        expected = np.array([-1, 1]) / math.sqrt(2)
        assert np.allclose(frame.axis, expected)

    def test_pole_swap_negates_axis(self):
        lex = count_lexicon_of(
            {"a": (CARE, Polarity.VIRTUE), "b": (CARE, Polarity.VICE)}
        )
        swapped = count_lexicon_of(
            {"a": (CARE, Polarity.VICE), "b": (CARE, Polarity.VIRTUE)}
        )
        store = store_of({"a": [1, 0, 1], "b": [0, 1, 0.5]})
        axis = build_microframe(lex, store, CARE).axis
        axis_swapped = build_microframe(swapped, store, CARE).axis
        assert np.array_equal(axis_swapped, -axis)

    def test_oov_pole_error(self):
        lex = count_lexicon_of(
            {"a": (CARE, Polarity.VIRTUE), "gone": (CARE, Polarity.VICE)}
        )
        store = store_of({"a": [1, 0]})
        with pytest.raises(ValueError, match="care.*vice"):
            build_microframe(lex, store, CARE)

    def test_build_all_five(self):
        rng = np.random.default_rng(0)
        lex, store, _ = random_polar_setup(rng, dim=10, extra_vocab=0)
        frames = build_microframes(lex, store)
        assert [f.foundation for f in frames] == list(FOUNDATIONS)
        for frame in frames:
            assert np.linalg.norm(frame.axis) == pytest.approx(1.0)


class TestNullModel:
    def _care_frame(self, store):
        lex = count_lexicon_of(
            {"care_virtue": (CARE, Polarity.VIRTUE), "care_vice": (CARE, Polarity.VICE)}
        )
        return build_microframe(lex, store, CARE)

    def test_degenerate_background(self):
        store = store_of(
            {"care_virtue": [1, 0], "care_vice": [0, 1], "only": [0.5, 0.5]}
        )
        frame = self._care_frame(store)
        null = build_null_model(["only"] * 5, store, frame, sample_size=1, b=100, seed=0)
        assert null.stdev == 0.0
        assert null.mean == pytest.approx(cosine(np.array([0.5, 0.5]), frame.axis))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        lex, store, background = random_polar_setup(rng, dim=12, extra_vocab=60)
        frame = build_microframe(lex, store, CARE)
        a = build_null_model(background, store, frame, sample_size=10, b=150, seed=5)
        b = build_null_model(background, store, frame, sample_size=10, b=150, seed=5)
        assert a == b

    def test_minimum_bootstrap(self):
        store = store_of({"care_virtue": [1, 0], "care_vice": [0, 1], "w": [1, 1]})
        frame = self._care_frame(store)
        with pytest.raises(ValueError, match=">= 100"):
            build_null_model(["w"], store, frame, sample_size=1, b=50, seed=0)

    def test_background_smaller_than_sample(self):
        store = store_of({"care_virtue": [1, 0], "care_vice": [0, 1], "w": [1, 1]})
        frame = self._care_frame(store)
        with pytest.raises(ValueError, match="smaller"):
            build_null_model(["w"], store, frame, sample_size=3, b=100, seed=0)

    def test_isotropic_mean_tracks_background(self):
        # the bootstrap mean estimates the exact background mean contribution
        rng = np.random.default_rng(17)
        lex, store, background = random_polar_setup(rng, dim=50, extra_vocab=500)
        frame = build_microframe(lex, store, CARE)
        null = build_null_model(background, store, frame, sample_size=10, b=1000, seed=2)
        contribs = np.array(
            [cosine(store.vectors[t], frame.axis) for t in background]
        )
        stderr = null.stdev / math.sqrt(null.b)
        assert abs(null.mean - contribs.mean()) <= 3 * stderr
        assert abs(null.mean) < 0.05


class TestFrameAxisScore:
    def _toy(self):
        lex = count_lexicon_of(
            {"vgood": (CARE, Polarity.VIRTUE), "vbad": (CARE, Polarity.VICE)}
        )
        store = store_of({"vgood": [1, 0], "vbad": [0, 1]})
        frame = build_microframe(lex, store, CARE)
        null = build_null_model(
            ["vgood", "vbad"], store, frame, sample_size=2, b=200, seed=0
        )
        return store, frame, null

    def test_virtue_seed_bias(self):
        store, frame, null = self._toy()
        score, _ = frameaxis_score(["vgood"], [frame], {CARE: null}, store)
        assert score.bias[CARE] == pytest.approx(-math.sqrt(0.5), abs=1e-6)

    def test_vice_seed_bias(self):
        store, frame, null = self._toy()
        score, _ = frameaxis_score(["vbad"], [frame], {CARE: null}, store)
        assert score.bias[CARE] == pytest.approx(math.sqrt(0.5), abs=1e-6)

    def test_duplicated_document_same_bias(self):
        store, frame, null = self._toy()
        once, _ = frameaxis_score(["vgood", "vbad"], [frame], {CARE: null}, store)
        twice, _ = frameaxis_score(
            ["vgood", "vbad", "vgood", "vbad"], [frame], {CARE: null}, store
        )
        assert once.bias[CARE] == pytest.approx(twice.bias[CARE])

    def test_all_oov_unknown(self):
        store, frame, null = self._toy()
        _, pred = frameaxis_score(["zzz"], [frame], {CARE: null}, store)
        assert pred.labels == frozenset({FoundationLabel.UNKNOWN})

    def test_none_when_nothing_significant(self):
        rng = np.random.default_rng(8)
        lex, store, background = random_polar_setup(rng, dim=30, extra_vocab=200)
        frames = build_microframes(lex, store)
        nulls = {
            f.foundation: build_null_model(background, store, f, 20, b=400, seed=1)
            for f in frames
        }
        # a pseudo-document drawn from the null should usually be insignificant
        doc = [background[i] for i in range(20)]
        _, pred = frameaxis_score(doc, frames, nulls, store, z_crit=10.0)
        assert pred.labels == frozenset({FoundationLabel.NONE})

    def test_bias_bounded_1000_random_instances(self):
        rng = np.random.default_rng(99)
        lex, store, background = random_polar_setup(rng, dim=50, extra_vocab=300)
        frames = build_microframes(lex, store)
        nulls = {
            f.foundation: build_null_model(background, store, f, 10, b=100, seed=0)
            for f in frames
        }
        for _ in range(1000):
            size = int(rng.integers(1, 30))
            doc = [background[i] for i in rng.integers(0, len(background), size)]
            score, _ = frameaxis_score(doc, frames, nulls, store)
            for value in score.bias.values():
                assert abs(value) <= 1.0 + 1e-12

    def test_pole_swap_antisymmetry(self):
        rng = np.random.default_rng(5)
        lex, store, background = random_polar_setup(rng, dim=20, extra_vocab=100)
        swapped_entries = {
            t: (
                e.foundation,
                Polarity.VIRTUE if e.polarity is Polarity.VICE else Polarity.VICE,
            )
            for t, e in lex.exact.items()
        }
        swapped = count_lexicon_of(swapped_entries)
        frames = build_microframes(lex, store)
        frames_swapped = build_microframes(swapped, store)
        nulls = {
            f.foundation: build_null_model(background, store, f, 15, b=200, seed=3)
            for f in frames
        }
        nulls_swapped = {
            f.foundation: build_null_model(background, store, f, 15, b=200, seed=3)
            for f in frames_swapped
        }
        doc = [background[i] for i in range(15)]
        score, pred = frameaxis_score(doc, frames, nulls, store)
        score_sw, pred_sw = frameaxis_score(doc, frames_swapped, nulls_swapped, store)
        for f in FOUNDATIONS:
            assert abs(score_sw.bias[f] + score.bias[f]) <= 1e-12
            assert abs(abs(score_sw.z[f]) - abs(score.z[f])) <= 1e-9
            assert score_sw.significant[f] == score.significant[f]
        assert pred_sw.labels == pred.labels


class TestNullCalibration:
    def test_significance_rate_within_binomial_ci(self):
        from scipy.stats import binom

        rng = np.random.default_rng(20250401)
        lex, store, background = random_polar_setup(rng, dim=50, extra_vocab=400)
        frame = build_microframe(lex, store, CARE)
        sample_size = 40
        null = build_null_model(
            background, store, frame, sample_size=sample_size, b=1000, seed=7
        )
        contribs = np.array(
            [cosine(store.vectors[t], frame.axis) for t in background]
        )
        trials = 2000
        trial_rng = np.random.default_rng(991)
        hits = 0
        for _ in range(trials):
            idx = trial_rng.integers(0, len(contribs), size=sample_size)
            bias = contribs[idx].mean()
            z = (bias - null.mean) / null.stdev
            if abs(z) >= 1.96:
                hits += 1
        low = binom.ppf(0.005, trials, 0.05)
        high = binom.ppf(0.995, trials, 0.05)
        assert low <= hits <= high, f"{hits} outside [{low}, {high}]"


def test_clamp_sample_size():
    assert clamp_sample_size(3) == 10
    assert clamp_sample_size(50) == 50
    assert clamp_sample_size(5000) == 1000
