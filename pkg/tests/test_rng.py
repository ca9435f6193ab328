import pytest

from fleetmix.rng import Rng, derive_seed

# Frozen outputs of the documented stream (splitmix64-seeded xoshiro256**),
# computed once from a literal transcription of the published algorithms.
VECTORS = {
    0: [11091344671253066420, 13793997310169335082, 1900383378846508768,
        7684712102626143532, 13521403990117723737],
    42: [1546998764402558742, 6990951692964543102, 12544586762248559009,
         17057574109182124193, 18295552978065317476],
    2**64 - 1: [10328197420357168392, 14156678507024973869, 9357971779955476126],
}


def test_frozen_vectors():
    for seed, expected in VECTORS.items():
        rng = Rng(seed)
        assert [rng.next_u64() for _ in expected] == expected


def test_same_seed_same_stream():
    a, b = Rng(123), Rng(123)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_different_seeds_differ():
    assert Rng(1).next_u64() != Rng(2).next_u64()


def test_random_in_unit_interval():
    rng = Rng(7)
    xs = [rng.random() for _ in range(10_000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert abs(sum(xs) / len(xs) - 0.5) < 0.02


def test_randint_bounds_and_coverage():
    rng = Rng(9)
    seen = set()
    for _ in range(2000):
        v = rng.randint(3, 7)
        assert 3 <= v <= 7
        seen.add(v)
    assert seen == {3, 4, 5, 6, 7}


def test_randrange_rejects_nonpositive():
    with pytest.raises(ValueError):
        Rng(0).randrange(0)


def test_choice_weighted_zero_weight_never_chosen():
    rng = Rng(11)
    for _ in range(500):
        assert rng.choice_weighted([0.0, 1.0, 0.0]) == 1


def test_choice_weighted_requires_mass():
    with pytest.raises(ValueError):
        Rng(0).choice_weighted([0.0, 0.0])


def test_derive_seed_tags_are_independent():
    s = derive_seed(99, 1, 5)
    assert s != derive_seed(99, 1, 6)
    assert s != derive_seed(99, 2, 5)
    assert s == derive_seed(99, 1, 5)


def test_shuffle_permutes():
    rng = Rng(13)
    items = list(range(20))
    rng.shuffle(items)
    assert sorted(items) == list(range(20))


def test_sample_indices_distinct():
    rng = Rng(17)
    picks = rng.sample_indices(10, 4)
    assert len(picks) == 4
    assert len(set(picks)) == 4
