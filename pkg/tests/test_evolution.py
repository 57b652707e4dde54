import collections
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_purity
from spikenorm.config import resolve_config
from spikenorm.dynamics import Network
from spikenorm.evolution import (
    Experiment,
    Individual,
    Population,
    checkpoint_path,
    cluster,
    confusion_matrix,
    evaluate_fitness,
    load_checkpoint,
    mutate,
    purity,
    read_log,
    run_experiment,
    train_individual,
    write_log,
)
from spikenorm.normalization import NormalizationPolicy, target_sum
from spikenorm.plasticity import GENOME_BOUNDS, GENOME_FIELDS, PlasticityGenome
from spikenorm.stimulus import make_dataset
from spikenorm.topology import build_topology, init_weights

TINY = dict(layer_sizes=[100, 8, 4], population=3, generations=3, repeats=2, inputs_per_train_cycle=8,
            frames_per_train_input=5, inputs_per_test_cycle=8, frames_per_test_input=10, g_syn=0.01,
            kmeans_restarts=2)
LABELS = np.repeat(np.arange(4), 20)


def test_perfect_clustering_has_purity_one():
    vectors = np.eye(4)[LABELS] * 10
    assert purity(confusion_matrix(LABELS, cluster(vectors))) == 1.0


def test_identical_vectors_give_quarter_purity():
    clusters = cluster(np.ones((80, 10)))
    assert purity(confusion_matrix(LABELS, clusters)) == 0.25 == brute_force_purity(LABELS, clusters)


def test_two_directions_merged():
    clusters = np.array([0] * 20 + [1] * 20 + [2] * 40)  # directions 2 and 3 share a cluster
    assert purity(confusion_matrix(LABELS, clusters)) == brute_force_purity(LABELS, clusters) == 0.75


@given(st.lists(st.integers(0, 3), min_size=4, max_size=80))
def test_purity_matches_oracle_and_bounds(clusters):
    labels = LABELS[: len(clusters)]
    p = purity(confusion_matrix(labels, clusters))
    assert p == pytest.approx(brute_force_purity(labels, clusters), abs=1e-12)
    assert 0 <= p <= 1


def test_null_plasticity_control_keeps_weights():
    topo = build_topology([100, 8, 4], 0.8, 0)
    ind = Individual(0, Network(topo, init_weights(topo, 0), PlasticityGenome(0, 0, 0, 1.0)))
    before = ind.weights.copy()
    train_individual(ind, make_dataset(8, 5, 0), NormalizationPolicy("control"))
    assert ind.weights.equals(before)


def test_norm_training_reaches_target():
    topo = build_topology([100, 8, 4], 0.8, 1)
    ind = Individual(0, Network(topo, init_weights(topo, 1), PlasticityGenome(0.05, 0.05, 0.05, 0.5)))
    policy = NormalizationPolicy("norm")
    train_individual(ind, make_dataset(8, 5, 1), policy)
    assert ind.weights.total() == pytest.approx(target_sum(topo, policy), rel=1e-9)


def test_evaluation_is_pure():
    topo = build_topology([100, 8, 4], 0.8, 2)
    net = Network(topo, init_weights(topo, 2, 0, 3), PlasticityGenome(0.05, 0.05, 0.05, 0.5))
    test = make_dataset(8, 10, 2)
    a, ra = evaluate_fitness(net, test, seed=5)
    b, rb = evaluate_fitness(net, test, seed=5)
    assert a.purity == b.purity and ra.equals(rb)


def test_mutation_changes_exactly_one_field():
    g = PlasticityGenome(0.05, 0.05, 0.05, 1.0)
    m = mutate(g, np.random.default_rng(3))
    changed = [f for f in GENOME_FIELDS if getattr(g, f) != getattr(m, f)]
    assert len(changed) == 1
    lo, hi = GENOME_BOUNDS[changed[0]]
    assert lo <= getattr(m, changed[0]) <= hi


def test_degenerate_bounds_fix_parameter():
    bounds = {k: (0.05, 0.05) for k in ("ltp", "inh_ltp", "ltd")} | {"discharge": (1.0, 1.0)}
    g = PlasticityGenome(0.05, 0.05, 0.05, 1.0)
    assert mutate(g, np.random.default_rng(0), bounds) == g


def test_mutation_selects_parameters_uniformly():
    rng = np.random.default_rng(12)
    g = PlasticityGenome(0.05, 0.05, 0.05, 1.0)
    counts = collections.Counter()
    for _ in range(10_000):
        m = mutate(g, rng)
        counts.update(f for f in GENOME_FIELDS if getattr(m, f) != getattr(g, f))
    assert all(abs(counts[f] - 2500) <= 150 for f in GENOME_FIELDS)


def _evaluated_population(size, fitness):
    topo = build_topology([100, 8, 4], 0.8, 0)
    inds = []
    for i in range(size):
        ind = Individual(i, Network(topo, init_weights(topo, i), PlasticityGenome(0.05, 0.05, 0.05, 1.0)))
        ind.fitness = fitness[i]
        inds.append(ind)
    return Population(inds, 0, topo)


def test_reproduction_shape_and_tie_break():
    exp = Experiment(resolve_config(TINY | {"population": 12}))
    pop = _evaluated_population(12, [0.5] * 12)
    children = exp.step_generation(pop, 0)
    assert len(children) == 12 and children.generation == 1
    assert collections.Counter(c.child_kind for c in children.individuals) == {
        "clone": 4, "clone_trained": 4, "mutant_trained": 4}
    assert sorted({c.parent_id for c in children.individuals}) == [0, 1, 2, 3]
    for c in children.individuals:
        if c.child_kind == "clone":
            assert c.weights.equals(pop.individuals[c.parent_id].weights)
            assert c.fitness == 0.5


def test_selection_takes_the_fittest_third():
    exp = Experiment(resolve_config(TINY | {"population": 6}))
    pop = _evaluated_population(6, [0.3, 0.9, 0.25, 0.9, 0.5, 0.8])
    children = exp.step_generation(pop, 0)
    assert sorted({c.parent_id for c in children.individuals}) == [1, 3]


def test_selection_requires_evaluation():
    pop = _evaluated_population(3, [0.5, None, 0.5])
    with pytest.raises(ValueError):
        Experiment(resolve_config(TINY)).step_generation(pop, 0)


def test_log_shape_and_determinism(tmp_path):
    cfg = resolve_config(TINY)
    a = run_experiment(cfg, "norm", tmp_path / "a")
    b = run_experiment(cfg, "norm", tmp_path / "b")
    assert len(a.rows) == cfg.repeats * cfg.generations * cfg.population
    assert (tmp_path / "a" / "log_norm.csv").read_bytes() == (tmp_path / "b" / "log_norm.csv").read_bytes()
    assert read_log(tmp_path / "a" / "log_norm.csv") == a.rows
    for row in a.rows:
        for name in GENOME_FIELDS:
            lo, hi = GENOME_BOUNDS[name]
            assert lo <= getattr(row, name) <= hi
    sizes = collections.Counter((r.repeat, r.generation) for r in a.rows)
    assert set(sizes.values()) == {cfg.population}


def test_generations_zero_logs_only_generation_zero():
    rows = run_experiment(resolve_config(TINY | {"generations": 0, "repeats": 1}), "control").rows
    assert {r.generation for r in rows} == {0} and len(rows) == 3


def test_workers_do_not_change_results():
    cfg = resolve_config(TINY | {"repeats": 1, "generations": 2})
    serial = run_experiment(cfg, "norm_capped").rows
    parallel = run_experiment(cfg.replace(workers=2), "norm_capped").rows
    assert serial == parallel


def test_elitism_with_fixed_data():
    cfg = resolve_config(TINY | {"repeats": 1, "generations": 4, "fixed_data": True})
    rows = run_experiment(cfg, "norm").rows
    best = [max(r.purity for r in rows if r.generation == g) for g in range(4)]
    assert all(b2 >= b1 for b1, b2 in itertools.pairwise(best))


def test_checkpoint_round_trip_and_resume(tmp_path):
    cfg = resolve_config(TINY | {"repeats": 1, "generations": 3})
    full = run_experiment(cfg, "norm_ie", tmp_path).rows
    pop, policy, repeat = load_checkpoint(checkpoint_path(tmp_path, "norm_ie", 0, 1), cfg)
    assert (policy, repeat, pop.generation, len(pop)) == ("norm_ie", 0, 1, 3)
    resumed = Experiment(cfg, policy).run_repeat(repeat, start=pop)
    assert resumed == [r for r in full if r.generation >= 1]


def test_log_floats_round_trip(tmp_path):
    cfg = resolve_config(TINY | {"repeats": 1, "generations": 1})
    rows = run_experiment(cfg, "control").rows
    path = write_log(tmp_path / "x.csv", rows)
    assert read_log(path) == rows
