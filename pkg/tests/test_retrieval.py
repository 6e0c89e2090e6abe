import numpy as np
import pytest

from clwe.dictionaries import SeedDictionary
from clwe.retrieval import cosine_knn, csls, evaluate_bli
from conftest import make_set


def unit(matrix):
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def brute_force_cosine(queries, targets):
    """O(n^2) per-pair oracle: cosine matrix via explicit loops."""
    q, t = unit(queries), unit(targets)
    scores = np.empty((len(q), len(t)))
    for i in range(len(q)):
        for j in range(len(t)):
            scores[i, j] = float(np.dot(q[i], t[j]))
    return scores


def brute_force_csls(queries, targets, k):
    cos = brute_force_cosine(queries, targets)
    r_t = np.array([np.mean(sorted(cos[i], reverse=True)[:k]) for i in range(len(queries))])
    r_s = np.array([np.mean(sorted(cos[:, j], reverse=True)[:k]) for j in range(len(targets))])
    return 2 * cos - r_t[:, None] - r_s[None, :]


def ranking(scores_row):
    """All indices by descending score, ties toward the lower index."""
    return sorted(range(len(scores_row)), key=lambda j: (-scores_row[j], j))


def result_indices(result, target_tokens):
    index = {t: i for i, t in enumerate(target_tokens)}
    return [[index[t] for t, _ in ranked] for ranked in result.neighbors]


def test_cosine_self_match_first(rng):
    targets = make_set([f"t{i}" for i in range(5)], rng.randn(5, 4))
    queries = targets.subset(["t3"])
    res = cosine_knn(queries, targets, k_out=1)
    token, score = res.neighbors[0][0]
    assert token == "t3"
    assert score == pytest.approx(1.0)


def test_cosine_orthogonal_query_tie_order():
    queries = make_set(["q"], [[0.0, 0.0, 1.0]])
    targets = make_set(["a", "b", "c"],
                       [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    res = cosine_knn(queries, targets, k_out=3)
    assert [t for t, _ in res.neighbors[0]] == ["a", "b", "c"]
    assert all(s == 0.0 for _, s in res.neighbors[0])


def test_cosine_matches_brute_force_oracle(rng):
    q_mat, t_mat = rng.randn(50, 8), rng.randn(50, 8)
    queries = make_set([f"q{i}" for i in range(50)], q_mat)
    targets = make_set([f"t{i}" for i in range(50)], t_mat)
    res = cosine_knn(queries, targets, k_out=50)
    oracle = brute_force_cosine(q_mat, t_mat)
    got = result_indices(res, targets.vocab.tokens)
    for i in range(50):
        assert got[i] == ranking(oracle[i])


def test_cosine_zero_norm_names_token():
    queries = make_set(["ok", "dead"], [[1.0, 0.0], [0.0, 0.0]])
    targets = make_set(["t"], [[1.0, 0.0]])
    with pytest.raises(ValueError, match="dead"):
        cosine_knn(queries, targets, 1)


def test_csls_hand_computation():
    queries = make_set(["x"], [[1.0, 0.0]])
    targets = make_set(["t1", "t2"], [[1.0, 0.0], [0.0, 1.0]])
    res = csls(queries, targets, k=1, k_out=2)
    assert res.neighbors[0][0] == ("t1", pytest.approx(0.0))
    assert res.neighbors[0][1] == ("t2", pytest.approx(-1.0))


def test_csls_all_identical_vectors_index_order():
    matrix = np.tile([[0.6, 0.8]], (4, 1))
    queries = make_set([f"q{i}" for i in range(4)], matrix)
    targets = make_set([f"t{i}" for i in range(4)], matrix.copy())
    res = csls(queries, targets, k=2, k_out=4)
    for ranked in res.neighbors:
        assert [t for t, _ in ranked] == ["t0", "t1", "t2", "t3"]


def test_csls_matches_brute_force_oracle(rng):
    q_mat, t_mat = rng.randn(100, 10), rng.randn(100, 10)
    queries = make_set([f"q{i}" for i in range(100)], q_mat)
    targets = make_set([f"t{i}" for i in range(100)], t_mat)
    res = csls(queries, targets, k=10, k_out=100)
    oracle = brute_force_csls(q_mat, t_mat, k=10)
    got = result_indices(res, targets.vocab.tokens)
    for i in range(100):
        assert got[i] == ranking(oracle[i])


def test_csls_neighborhood_size_validated(rng):
    queries = make_set([f"q{i}" for i in range(3)], rng.randn(3, 2))
    targets = make_set([f"t{i}" for i in range(5)], rng.randn(5, 2))
    with pytest.raises(ValueError):
        csls(queries, targets, k=4)


def test_csls_reduces_to_cosine_with_constant_hubness(rng):
    # zero-sum sets make every mean-to-all term vanish when k covers all rows
    q = rng.randn(6, 5)
    t = rng.randn(6, 5)
    queries = make_set([f"q{i}" for i in range(12)], np.vstack([q, -q]))
    targets = make_set([f"t{i}" for i in range(12)], np.vstack([t, -t]))
    by_csls = csls(queries, targets, k=12, k_out=12)
    by_cos = cosine_knn(queries, targets, k_out=12)
    for a, b in zip(by_csls.neighbors, by_cos.neighbors):
        assert [x[0] for x in a] == [x[0] for x in b]


def test_retrieval_invariant_under_common_rotation(rng):
    q_mat, t_mat = rng.randn(30, 6), rng.randn(40, 6)
    rot, r = np.linalg.qr(rng.randn(6, 6))
    rot *= np.sign(np.diag(r))
    plain_q = make_set([f"q{i}" for i in range(30)], q_mat)
    plain_t = make_set([f"t{i}" for i in range(40)], t_mat)
    spun_q = make_set(plain_q.vocab.tokens, q_mat @ rot.T)
    spun_t = make_set(plain_t.vocab.tokens, t_mat @ rot.T)
    for metric, kwargs in ((cosine_knn, {}), (csls, {"k": 5})):
        before = metric(plain_q, plain_t, k_out=5, **kwargs)
        after = metric(spun_q, spun_t, k_out=5, **kwargs)
        for x, y in zip(before.neighbors, after.neighbors):
            assert [t for t, _ in x] == [t for t, _ in y]
            assert np.allclose([s for _, s in x], [s for _, s in y])


# --- BLI harness -------------------------------------------------------------


def angle_set(tokens, angles):
    matrix = np.stack([[np.cos(a), np.sin(a)] for a in np.radians(angles)])
    return make_set(tokens, matrix)


@pytest.fixture
def bli_fixture():
    tgt = angle_set(["t1", "t2", "t3", "t4", "t5", "same"],
                    [0, 10, 20, 30, 40, 77])
    src = angle_set(["s1", "s2", "s3", "s4", "s5", "same"],
                    [0, 0, 30, 0, 40, 77])
    pairs = [
        ("s1", "t1"),      # normal, correct
        ("s2", "t9"),      # gold target OOV
        ("oov1", "oov1"),  # source OOV, gold equals surface
        ("oov1", "tz"),    # second gold for the OOV source
        ("oov2", "t1"),    # source OOV, gold differs
        ("same", "same"),  # identical surface both sides
        ("s3", "t3"),      # multiple golds, retrieval returns t4
        ("s3", "t4"),
        ("s4", "t2"),      # normal, incorrect (retrieves t1)
        ("s5", "t5"),      # normal, correct
    ]
    return src, tgt, SeedDictionary(pairs)


def test_bli_single_pair():
    src = angle_set(["a"], [15])
    tgt = angle_set(["b", "c"], [15, 80])
    report = evaluate_bli(src, tgt, SeedDictionary([("a", "b")]), metric="cosine")
    assert report.p_at_1 == 1.0
    assert report.summary() == "P@1 1.0000 (1/1)"


def test_bli_paper_policy_hand_counts(bli_fixture):
    src, tgt, test = bli_fixture
    report = evaluate_bli(src, tgt, test, metric="cosine", policy="paper")
    # groups: s1+, s2(tgt-oov)-, oov1(self in golds)+, oov2-, same+, s3+, s4-, s5+
    assert report.total == 8
    assert report.correct == 5
    assert report.p_at_1 == pytest.approx(5 / 8)
    assert report.evaluated == 5
    assert report.source_oov_self == 2
    assert report.target_oov_incorrect == 1
    assert report.pairs_read == 10


def test_bli_same_surface_filter(bli_fixture):
    src, tgt, test = bli_fixture
    report = evaluate_bli(src, tgt, test, metric="cosine", policy="paper",
                          surface_filter="same_surface")
    # (same,same) and (oov1,oov1) dropped; oov1 now has gold [tz] -> incorrect
    assert report.pairs_read == 8
    assert report.total == 7
    assert report.correct == 3
    assert report.p_at_1 == pytest.approx(3 / 7)


def test_bli_drop_policy_excludes_oov(bli_fixture):
    src, tgt, test = bli_fixture
    report = evaluate_bli(src, tgt, test, metric="cosine", policy="drop")
    assert report.total == 5
    assert report.correct == 4
    assert report.excluded == 3
    assert report.p_at_1 == pytest.approx(4 / 5)
    assert report.source_oov_self == 0 and report.target_oov_incorrect == 0


def test_bli_paper_below_drop_when_oov_pairs_incorrect(bli_fixture):
    src, tgt, test = bli_fixture
    kwargs = dict(metric="cosine", surface_filter="same_surface")
    paper = evaluate_bli(src, tgt, test, policy="paper", **kwargs)
    drop = evaluate_bli(src, tgt, test, policy="drop", **kwargs)
    assert paper.p_at_1 <= drop.p_at_1


def test_bli_target_oov_pair_categories():
    src = angle_set(["x"], [5])
    tgt = angle_set(["other"], [60])
    test = SeedDictionary([("x", "y")])
    paper = evaluate_bli(src, tgt, test, metric="cosine", policy="paper")
    assert (paper.total, paper.correct, paper.target_oov_incorrect) == (1, 0, 1)
    drop = evaluate_bli(src, tgt, test, metric="cosine", policy="drop")
    assert (drop.total, drop.excluded) == (0, 1)
    assert drop.p_at_1 == 0.0


def test_bli_lowercase_flag():
    src = angle_set(["wort"], [25])
    tgt = angle_set(["word"], [25])
    test = SeedDictionary([("Wort", "Word")])
    assert evaluate_bli(src, tgt, test, metric="cosine").p_at_1 == 1.0
    report = evaluate_bli(src, tgt, test, metric="cosine", lowercase=False)
    assert report.source_oov_self == 1 and report.correct == 0


def test_bli_csls_neighborhood_clamped_to_small_sets():
    src = angle_set(["a", "b"], [0, 30])
    tgt = angle_set(["ta", "tb"], [0, 30])
    test = SeedDictionary([("a", "ta"), ("b", "tb")])
    report = evaluate_bli(src, tgt, test, metric="csls", k=10)
    assert report.p_at_1 == 1.0


def test_bli_empty_test_dictionary():
    src = angle_set(["a"], [0])
    with pytest.raises(ValueError):
        evaluate_bli(src, src, SeedDictionary([]))


def test_bli_report_json_fields(bli_fixture):
    src, tgt, test = bli_fixture
    report = evaluate_bli(src, tgt, test, metric="cosine")
    import json

    data = json.loads(report.to_json())
    assert data["total"] == 8
    assert data["p_at_1"] == pytest.approx(5 / 8)
    assert data["policy"] == "paper"
