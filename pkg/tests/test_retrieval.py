import math

import numpy as np
import pytest

from apps.augmentation.sequences import BehaviorSequence
from apps.encoder import BehaviorEmbedding, EncoderParams
from apps.retrieval import (
    MEASURES,
    RetrievalPool,
    SimilarUser,
    SimilarUserResult,
    build_pool,
    read_neighbors,
    retrieve_all,
    retrieve_topk,
    similarity,
    write_neighbors,
)
from apps.retrieval.neighbors import assert_no_leakage, format_line, parse_line
from main.utils.exceptions import ConfigurationError, LeakageError, UndefinedSimilarityError


def test_similarity_examples():
    assert similarity("cosine", [3, 4], [3, 4]) == pytest.approx(1.0, abs=1e-12)
    assert similarity("cosine", [1, 0], [0, 1]) == 0.0
    assert similarity("cosine", [1, 2], [2, 1]) == pytest.approx(0.8, abs=1e-12)
    assert similarity("jaccard", {"a", "b", "c"}, {"b", "c", "d"}) == 0.5
    assert similarity("euclidean", [1.5, -2.0], [1.5, -2.0]) == 0.0
    assert similarity("euclidean", [0, 0], [3, 4]) == -5.0
    assert similarity("inner_product", [1, 2], [3, 4]) == 11.0


def test_cosine_with_zero_vector():
    with pytest.raises(UndefinedSimilarityError):
        similarity("cosine", [0, 0], [1, 2])


def test_unknown_measure():
    with pytest.raises(ConfigurationError):
        similarity("swing", [1], [1])


@pytest.fixture
def encoder():
    return EncoderParams.initialize(n_items=9, d_prime=4, max_len=4, seed=0).freeze()


def _train(user_id, items, split="train"):
    return BehaviorSequence.of(user_id, items, split=split)


def test_build_pool_sorted(encoder):
    pool = build_pool([_train(7, [1, 2]), _train(3, [4]), _train(5, [2, 9, 8])], encoder)
    assert pool.user_ids.tolist() == [3, 5, 7]
    assert pool.embeddings.shape == (3, 4)
    assert pool.item_sets[1] == frozenset({2, 9, 8})


def test_build_pool_skips_empty_histories(encoder):
    pool = build_pool([_train(1, [1]), _train(2, [])], encoder)
    assert pool.user_ids.tolist() == [1]


def test_build_pool_rejects_test_users(encoder):
    with pytest.raises(LeakageError):
        build_pool([_train(1, [1, 2]), _train(2, [3], split="test")], encoder)


def test_build_pool_needs_frozen_encoder():
    trainable = EncoderParams.initialize(n_items=9, d_prime=4, max_len=4)
    with pytest.raises(ConfigurationError):
        build_pool([_train(1, [1])], trainable)


def test_pool_file_is_byte_identical(encoder, tmp_path):
    users = [_train(u, [u % 9 + 1, (u * 3) % 9 + 1]) for u in range(12)]
    first = build_pool(users, encoder).save(tmp_path / "a.ctrt")
    second = build_pool(list(reversed(users)), encoder).save(tmp_path / "b.ctrt")
    assert first.read_bytes() == second.read_bytes()
    loaded = RetrievalPool.load(first)
    assert loaded.user_ids.tolist() == list(range(12))
    assert loaded.item_sets == build_pool(users, encoder).item_sets


# brute-force oracle

N_USERS = 1000


@pytest.fixture(scope="module")
def integer_pool():
    """Small-integer embeddings: every measure is computed exactly, so ties are real ties."""
    rng = np.random.default_rng(11)
    embeddings = rng.integers(-3, 4, size=(N_USERS, 16)).astype(np.float64)
    embeddings[np.abs(embeddings).sum(axis=1) == 0, 0] = 1.0
    embeddings[500:520] = embeddings[480:500]
    item_sets = tuple(
        frozenset(rng.choice(np.arange(1, 31), size=rng.integers(3, 9), replace=False).tolist())
        for _ in range(N_USERS)
    )
    return RetrievalPool(np.arange(N_USERS), embeddings, item_sets)


def brute_force(pool, index, k, measure):
    scored = []
    for other in range(pool.size):
        if other == index:
            continue
        if measure == "jaccard":
            score = similarity(measure, pool.item_sets[index], pool.item_sets[other])
        else:
            score = similarity(measure, pool.embeddings[index], pool.embeddings[other])
        scored.append((-score, int(pool.user_ids[other])))
    scored.sort()
    return [user for _, user in scored[:k]]


def query(pool, index, k, measure, threshold=None):
    user_id = int(pool.user_ids[index])
    return retrieve_topk(
        pool,
        user_id,
        BehaviorEmbedding(user_id, pool.embeddings[index]),
        k,
        measure,
        threshold=threshold,
        query_items=pool.item_sets[index],
    )


@pytest.mark.parametrize("measure", MEASURES)
@pytest.mark.parametrize("k", [1, 5, 50])
def test_topk_matches_brute_force(integer_pool, measure, k):
    for index in range(0, N_USERS, 97):
        result = query(integer_pool, index, k, measure)
        assert list(result.user_ids) == brute_force(integer_pool, index, k, measure)
        assert list(result.scores) == sorted(result.scores, reverse=True)


@pytest.mark.parametrize("measure", MEASURES)
def test_topk_prefix_property(integer_pool, measure):
    for index in (0, 490, 999):
        small = query(integer_pool, index, 5, measure).user_ids
        large = query(integer_pool, index, 50, measure).user_ids
        assert large[:5] == small


def test_query_user_never_returned(integer_pool):
    result = query(integer_pool, 500, N_USERS, "cosine")
    assert 500 not in result.user_ids
    assert len(result) == N_USERS - 1
    # its duplicate ranks first
    assert result.user_ids[0] == 480


def test_permuted_pool_gives_same_result(integer_pool):
    order = np.random.default_rng(0).permutation(N_USERS)
    shuffled = RetrievalPool(
        integer_pool.user_ids[order],
        integer_pool.embeddings[order],
        tuple(integer_pool.item_sets[i] for i in order),
    )
    for measure in MEASURES:
        expected = query(integer_pool, 42, 20, measure)
        position = int(np.flatnonzero(order == 42)[0])
        assert query(shuffled, position, 20, measure).user_ids == expected.user_ids


def test_cosine_invariant_to_query_scale(integer_pool):
    vector = integer_pool.embeddings[7]
    plain = retrieve_topk(integer_pool, 7, BehaviorEmbedding(7, vector), 10, "cosine")
    scaled = retrieve_topk(integer_pool, 7, BehaviorEmbedding(7, vector * 3.5), 10, "cosine")
    assert plain.user_ids == scaled.user_ids


def test_k_zero_and_unattainable_threshold(integer_pool):
    assert len(query(integer_pool, 3, 0, "cosine")) == 0
    assert len(query(integer_pool, 3, 10, "cosine", threshold=1.0 + 1e-9)) == 0
    filtered = query(integer_pool, 3, 10, "cosine", threshold=0.3)
    assert all(score >= 0.3 for score in filtered.scores)


def test_negative_k():
    with pytest.raises(ConfigurationError):
        retrieve_topk(RetrievalPool(np.arange(2), np.ones((2, 2))), 0, None, -1)


def test_missing_embedding_is_a_warning(integer_pool):
    result = retrieve_topk(integer_pool, 5000, None, 5, "cosine")
    assert result.warning and len(result) == 0
    empty = BehaviorEmbedding(5000, np.zeros(16), empty=True)
    assert retrieve_topk(integer_pool, 5000, empty, 5, "cosine").warning


def test_retrieve_all_independent_of_threads(integer_pool):
    queries = [
        (int(u), BehaviorEmbedding(int(u), integer_pool.embeddings[u]), integer_pool.item_sets[u])
        for u in range(0, 200, 3)
    ]
    single = retrieve_all(integer_pool, queries, 6, "euclidean", threads=1)
    threaded = retrieve_all(integer_pool, list(reversed(queries)), 6, "euclidean", threads=4)
    assert list(single) == sorted(single)
    assert single == threaded


def test_pool_rejects_non_train_split():
    with pytest.raises(LeakageError):
        RetrievalPool(np.arange(2), np.ones((2, 2)), split="val")


def test_neighbor_line_format():
    result = SimilarUserResult((SimilarUser(3, 0.8), SimilarUser(7, -0.25)))
    line = format_line(5, result)
    assert line == "5\t3:0.800000,7:-0.250000"
    user_id, parsed = parse_line(line)
    assert user_id == 5 and parsed.user_ids == (3, 7)
    assert format_line(9, SimilarUserResult()) == "9\t"
    assert parse_line("9\t")[1].entries == ()


def test_neighbor_file_round_trip(tmp_path):
    results = {
        4: SimilarUserResult((SimilarUser(1, 0.123456789),)),
        2: SimilarUserResult((SimilarUser(4, 1.0), SimilarUser(1, 0.5))),
        1: SimilarUserResult(),
    }
    path = write_neighbors(tmp_path / "neighbors.tsv", results)
    assert path.read_text().splitlines()[0].startswith("1\t")
    loaded = read_neighbors(path)
    assert loaded[2].user_ids == (4, 1)
    assert math.isclose(loaded[4].scores[0], 0.123457)
    rewritten = write_neighbors(tmp_path / "again.tsv", loaded)
    assert rewritten.read_bytes() == path.read_bytes()


def test_assert_no_leakage():
    results = {1: SimilarUserResult((SimilarUser(2, 0.5),))}
    assert_no_leakage(results, [1, 2])
    with pytest.raises(LeakageError):
        assert_no_leakage(results, [1])
