import json
import math
from itertools import product

import numpy as np
import pytest

import apmatch


def test_ball_probability_counts_hamming_ball():
    pattern = np.zeros(9, dtype=np.uint8)
    r = apmatch.ball_probability_exact(apmatch.FieldModel.bernoulli(0.5), pattern, 0.2)
    # threshold 1: the all-zeros string plus its nine neighbours
    assert r["method"] == "exact"
    assert r["value"] == pytest.approx(10 / 512)
    assert apmatch.ball_threshold(0.2, 9) == 1


def test_sample_field_is_reproducible():
    model = apmatch.FieldModel.bernoulli(0.3)
    a = apmatch.sample_field(model, 16, 2, seed=5)
    b = apmatch.sample_field(model, 16, 2, seed=5)
    c = apmatch.sample_field(model, 16, 2, seed=5, replica=1)
    assert a.shape == (16, 16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mismatch_map_and_hitting_time():
    rng = np.random.default_rng(3)
    field = rng.integers(0, 2, size=40, dtype=np.uint8)
    pattern = field[10:14].copy()
    counts = apmatch.mismatch_map(field, pattern)
    expected = [int(np.sum(field[x:x + 4] != pattern)) for x in range(37)]
    assert counts.tolist() == expected
    hit = apmatch.hitting_time(field, pattern, 0.0, 39)
    first = expected.index(0)
    assert hit["hit"]
    assert hit["volume"] == first + 4
    assert hit["offset"] == [first]


def test_goodness():
    assert not apmatch.is_good(np.ones(4, dtype=np.uint8), 0.0, 0.4)
    assert apmatch.is_good(np.array([0, 1, 0, 1], dtype=np.uint8), 0.0, 0.4)
    r = apmatch.goodness_fraction(apmatch.FieldModel.bernoulli(0.5), 3, 1, 0.0, 0.5, mode="exact")
    assert r["value"] == pytest.approx(14 / 16)


def test_rate_distortion():
    limit = math.log(2) + 0.2 * math.log(0.2) + 0.8 * math.log(0.8)
    assert apmatch.binary_rate_distortion(0.5, 0.2) == pytest.approx(limit)
    ba = apmatch.rd_blahut_arimoto(0.5, 0.2)
    assert abs(ba["rate"] - limit) < 1e-6
    r = apmatch.rd_aep(apmatch.FieldModel.bernoulli(0.5), np.zeros(9, dtype=np.uint8), 0.2)
    assert r["value"] == pytest.approx(math.log(512 / 10) / 9)


def test_renyi_and_walks():
    fair = apmatch.FieldModel.bernoulli(0.5)
    r = apmatch.renyi_functional(1.0, fair, fair, 3, 1, 0.0, 0.5)
    assert r["value"] == pytest.approx(-math.log(2), abs=1e-12)
    steps = [1, 1, -1, -1]
    assert apmatch.max_window_increment(steps, 1) == 2
    c = apmatch.walk_hitting_identity_check(2, 4, 0.0)
    brute = 0
    for bits in product([0, 1], repeat=7):
        brute += any(all(b == 0 for b in bits[k:k + 3]) for k in range(5))
    assert c["equal"] and c["lhs_count"] == brute


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        apmatch.is_good(np.zeros((2, 3), dtype=np.uint8), 0.1, 0.4)
    with pytest.raises(ValueError):
        apmatch.FieldModel.bernoulli(1.5)


def test_config_validation_and_runner():
    v = apmatch.validate_config("kind = rd\nepsilon = 1.5\n")
    assert not v["ok"]
    assert v["errors"][0].startswith("line 2: epsilon")
    files = apmatch.run_experiment("kind = rd\nn = 8\nepsilon = 0.2\npattern = random\n")
    summary = json.loads(files["summary.json"])
    assert summary["results"]["value"] == pytest.approx(math.log(512 / 10) / 9)
    again = apmatch.run_experiment("kind = rd\nn = 8\nepsilon = 0.2\npattern = random\n")
    assert again == files
