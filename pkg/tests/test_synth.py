import json

import numpy as np
import pytest

from phenoclust.clustering import cluster_dataset
from phenoclust.core import FeatureSetKind
from phenoclust.errors import InvalidSpec
from phenoclust.evaluation import adjusted_rand_index
from phenoclust.goldstandard import evaluate_observation
from phenoclust.ingest import format_meals, parse_meals
from phenoclust.synth import SYNTH_FEATURES, SynthSpec, blob_spec, generate_dataset

CENTERS = [(40.0, 4.0, 20.0, 10.0, 30.0), (90.0, 9.0, 45.0, 35.0, 120.0)]


def test_zero_noise_reproduces_centers():
    ds, truth, _ = generate_dataset(SynthSpec(10, 2, CENTERS, 0.0))
    for i, meal in enumerate(ds.meals):
        c = CENTERS[i % 2]
        assert (meal.carbs_g, meal.fiber_g, meal.protein_g, meal.fat_g) == c[:4]
        assert meal.post_bg_mgdl - meal.pre_bg_mgdl == c[4]
    assert truth.labels == (1, 2) * 5


def test_single_cluster():
    ds, truth, gs = generate_dataset(SynthSpec(8, 1, CENTERS[:1], 1.0))
    assert truth.n_clusters == 1 and len(gs.observations) == 1


def test_deterministic_and_seed_sensitive():
    a = generate_dataset(blob_spec(seed=3))
    b = generate_dataset(blob_spec(seed=3))
    c = generate_dataset(blob_spec(seed=4))
    assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]
    assert a[0] != c[0]


def test_prefix_stability():
    # meal i depends only on (seed, i), so growing the dataset keeps earlier meals
    small, _, _ = generate_dataset(blob_spec(n_meals=30))
    large, _, _ = generate_dataset(blob_spec(n_meals=60))
    assert large.meals[:30] == small.meals


def test_csv_round_trip():
    ds, _, _ = generate_dataset(blob_spec())
    again, report = parse_meals(format_meals(ds))
    assert again == ds and not report.rows_rejected


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_meals=9, k_planted=2),
        dict(k_planted=0, centers=[]),
        dict(centers=[(1.0,) * 5]),
        dict(centers=[(1.0,) * 4, (1.0,) * 4]),
        dict(noise_sigma=-1.0),
        dict(noise_sigma=(1.0, 2.0)),
        dict(meal_type_mix={"Brunch": 1.0}),
        dict(meal_type_mix={"Lunch": 0.0}),
        dict(bracket_sigmas=0.0),
    ],
)
def test_invalid_specs(kwargs):
    args = dict(n_meals=20, k_planted=2, centers=CENTERS, noise_sigma=1.0) | kwargs
    with pytest.raises(InvalidSpec):
        SynthSpec(**args)


def test_json_spec(tmp_path):
    spec = blob_spec(k=2)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_json()))
    assert SynthSpec.load(path) == spec
    with pytest.raises(InvalidSpec):
        SynthSpec.from_json(spec.to_json() | {"colour": "red"})
    path.write_text("{")
    with pytest.raises(InvalidSpec):
        SynthSpec.load(path)


def test_meal_type_mix_is_respected():
    spec = SynthSpec(400, 1, CENTERS[:1], 1.0, meal_type_mix={"Breakfast": 3.0, "Snack": 1.0})
    ds, _, _ = generate_dataset(spec)
    names = [t.value for t in ds.meal_types()]
    assert set(names) == {"Breakfast", "Snack"}
    assert 0.68 < names.count("Breakfast") / 400 < 0.82


@pytest.mark.parametrize("seed", range(5))
def test_planted_clusters_recovered(seed):
    ds, truth, _ = generate_dataset(blob_spec(k=3, n_meals=60, seed=seed))
    result = cluster_dataset(ds, FeatureSetKind.BG_WITH_GRAMS)
    assert result.k == 3
    assert adjusted_rand_index(result.filtered, truth) >= 0.95


def own_cluster_support(spec):
    ds, truth, gs = generate_dataset(spec)
    fracs = []
    for c, obs in enumerate(gs.observations, start=1):
        stats = evaluate_observation(obs, ds)
        own = truth.members(c)
        fracs.append(len(stats.support & own) / len(own))
    return fracs


def test_wide_brackets_cover_own_cluster():
    spec = SynthSpec(300, 2, CENTERS, (2.0, 0.3, 1.2, 1.0, 3.0), bracket_sigmas=3.0, seed=1)
    assert min(own_cluster_support(spec)) >= 0.8


def test_default_brackets_match_gaussian_coverage():
    # five independent +/-2 sigma ranges jointly hold P(|z|<2)^5 of each cluster
    spec = SynthSpec(4000, 2, CENTERS, (2.0, 0.3, 1.2, 1.0, 3.0), seed=1)
    expected = 0.9544997361036416 ** len(SYNTH_FEATURES)
    tol = 4 * np.sqrt(expected * (1 - expected) / 2000)
    for frac in own_cluster_support(spec):
        assert abs(frac - expected) < tol


def test_planted_observations_do_not_cross_clusters():
    ds, truth, gs = generate_dataset(blob_spec(k=4, n_meals=80))
    for c, obs in enumerate(gs.observations, start=1):
        assert evaluate_observation(obs, ds).support <= truth.members(c)
