import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clwe.embed_io import (
    EmbeddingSet,
    FormatError,
    Vocabulary,
    load_embeddings,
    normalize,
    pca_project,
    save_embeddings,
    write_pca_tsv,
)
from conftest import make_set


def test_load_basic_format(tmp_path):
    path = tmp_path / "e.vec"
    path.write_text("2 2\na 1 0\nb 0 1\n")
    emb = load_embeddings(path)
    assert emb.vocab.tokens == ["a", "b"]
    assert np.array_equal(emb.matrix, np.eye(2))


def test_save_exact_format(tmp_path):
    emb = make_set(["a"], [[0.5, 0.25]])
    path = tmp_path / "e.vec"
    save_embeddings(emb, path, precision=4)
    assert path.read_text() == "1 2\na 0.5000 0.2500\n"


def test_save_empty_set(tmp_path):
    emb = EmbeddingSet(Vocabulary([]), np.zeros((0, 3)))
    path = tmp_path / "e.vec"
    save_embeddings(emb, path)
    assert path.read_text() == "0 3\n"


def test_max_vocab_caps_rows(tmp_path):
    path = tmp_path / "big.vec"
    n = 205_000
    with open(path, "w") as f:
        f.write(f"{n} 1\n")
        for i in range(n):
            f.write(f"t{i} 0.5\n")
    emb = load_embeddings(path, max_vocab=200_000)
    assert len(emb) == 200_000
    assert emb.vocab.tokens[-1] == "t199999"


def test_duplicate_tokens_first_wins(tmp_path, caplog):
    path = tmp_path / "e.vec"
    path.write_text("3 1\na 1\na 2\nb 3\n")
    with caplog.at_level("WARNING"):
        emb = load_embeddings(path)
    assert emb.vocab.tokens == ["a", "b"]
    assert emb.row("a")[0] == 1.0
    assert "1 duplicate" in caplog.text


def test_malformed_header(tmp_path):
    path = tmp_path / "e.vec"
    path.write_text("not a header\n")
    with pytest.raises(FormatError, match="line 1"):
        load_embeddings(path)


def test_wrong_value_count_names_line(tmp_path):
    path = tmp_path / "e.vec"
    path.write_text("2 3\na 1 2 3\nb 1 2\n")
    with pytest.raises(FormatError, match="line 3"):
        load_embeddings(path)


def test_non_utf8_token_names_line(tmp_path):
    path = tmp_path / "e.vec"
    path.write_bytes(b"2 1\na 1\n\xff\xfe 2\n")
    with pytest.raises(FormatError, match="line 3"):
        load_embeddings(path)


def test_whitespace_token_rejected_on_save(tmp_path):
    emb = make_set(["a b"], [[1.0]])
    with pytest.raises(ValueError, match="whitespace"):
        save_embeddings(emb, tmp_path / "e.vec")


tokens_strategy = st.lists(
    st.text(
        st.characters(blacklist_categories=("Cs", "Zs", "Cc")),
        min_size=1,
        max_size=8,
    ),
    min_size=1,
    max_size=6,
    unique=True,
)


@settings(max_examples=40, deadline=None)
@given(tokens=tokens_strategy, data=st.data())
def test_save_load_round_trip(tmp_path_factory, tokens, data):
    # values already representable at 4 decimals, so one round trip is exact
    values = data.draw(
        st.lists(
            st.lists(st.integers(-10**6, 10**6), min_size=2, max_size=2),
            min_size=len(tokens),
            max_size=len(tokens),
        )
    )
    matrix = np.array(values, dtype=np.float64) / 10_000.0
    emb = make_set(tokens, matrix)
    path = tmp_path_factory.mktemp("rt") / "e.vec"
    save_embeddings(emb, path)
    loaded = load_embeddings(path)
    assert loaded.vocab.tokens == emb.vocab.tokens
    assert np.array_equal(loaded.matrix, emb.matrix)


def test_save_is_fixed_point_after_first_save(tmp_path, rng):
    emb = make_set([f"t{i}" for i in range(5)], rng.randn(5, 3))
    p1, p2 = tmp_path / "a.vec", tmp_path / "b.vec"
    save_embeddings(emb, p1)
    save_embeddings(load_embeddings(p1), p2)
    assert p1.read_text() == p2.read_text()


def test_normalize_unit_three_four_five():
    emb = make_set(["a"], [[3.0, 4.0]])
    out = normalize(emb, "unit")
    assert np.allclose(out.matrix, [[0.6, 0.8]])


def test_normalize_none_is_identity():
    emb = make_set(["a", "b"], [[1.5, -2.0], [0.0, 3.0]])
    out = normalize(emb, "none")
    assert np.array_equal(out.matrix, emb.matrix)
    assert out.matrix is not emb.matrix


def test_normalize_center_unit_hand_case():
    emb = make_set(["a", "b"], [[1.0, 0.0], [3.0, 0.0]])
    out = normalize(emb, "center_unit")
    assert np.allclose(out.matrix, [[-1.0, 0.0], [1.0, 0.0]])


def test_normalize_zero_row_names_token():
    emb = make_set(["ok", "bad"], [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="bad"):
        normalize(emb, "unit")


def test_normalize_unit_norms_property(rng):
    emb = make_set([f"t{i}" for i in range(50)], rng.randn(50, 7) * 10)
    out = normalize(emb, "unit")
    norms = np.linalg.norm(out.matrix, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-6


def test_pca_collinear_second_axis_vanishes():
    emb = make_set(["p1", "p2", "p3"], [[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    rows = pca_project([(emb, "en")])
    assert all(abs(coords[1]) <= 1e-9 for _, _, coords in rows)


def test_pca_matches_eigendecomposition_oracle(rng):
    matrix = rng.randn(5, 3)
    matrix[:, 2] -= matrix[:, 2].mean()  # mean-zero along one axis
    emb = make_set([f"t{i}" for i in range(5)], matrix)
    rows = pca_project([(emb, "x")], dims=2)
    coords = np.array([c for _, _, c in rows])
    centered = matrix - matrix.mean(axis=0)
    eigvals = np.sort(np.linalg.eigvalsh(centered.T @ centered))[::-1]
    assert np.allclose((coords**2).sum(axis=0), eigvals[:2], atol=1e-9)


def test_pca_identical_points_map_to_origin():
    emb = make_set(["a", "b"], [[2.0, 5.0, 1.0], [2.0, 5.0, 1.0]])
    rows = pca_project([(emb, "x")])
    for _, _, coords in rows:
        assert np.allclose(coords, 0.0)


def test_pca_dims_exceeding_dimension():
    emb = make_set(["a", "b", "c"], [[1.0, 2.0], [0.0, 1.0], [4.0, 0.5]])
    with pytest.raises(ValueError):
        pca_project([(emb, "x")], dims=3)


def test_pca_projection_is_contraction(rng):
    emb = make_set([f"t{i}" for i in range(20)], rng.randn(20, 6))
    rows = pca_project([(emb, "x")], dims=2)
    coords = np.array([c for _, _, c in rows])
    centered = emb.matrix - emb.matrix.mean(axis=0)
    assert (coords**2).sum() <= (centered**2).sum() + 1e-9


def test_pca_deterministic_sign(rng):
    emb = make_set([f"t{i}" for i in range(10)], rng.randn(10, 4))
    first = pca_project([(emb, "x")])
    second = pca_project([(emb, "x")])
    assert first == second


def test_pca_tsv_output(tmp_path):
    a = make_set(["tok"], [[1.0, 0.0]])
    b = make_set(["mot"], [[0.0, 1.0]])
    rows = pca_project([(a, "en"), (b, "fr")])
    out = tmp_path / "pca.tsv"
    write_pca_tsv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "token\tlabel\tx\ty"
    assert lines[1].startswith("tok\ten\t")
    assert lines[2].startswith("mot\tfr\t")


def test_subset_preserves_order_and_rows(rng):
    emb = make_set(["a", "b", "c"], rng.randn(3, 4))
    sub = emb.subset(["c", "a"])
    assert sub.vocab.tokens == ["c", "a"]
    assert np.array_equal(sub.matrix[0], emb.row("c"))
    assert np.array_equal(sub.matrix[1], emb.row("a"))


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


def test_embedding_set_rejects_nan():
    with pytest.raises(ValueError, match="finite"):
        make_set(["a"], [[np.nan, 1.0]])
