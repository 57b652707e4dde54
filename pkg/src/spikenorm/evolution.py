"""Evolutionary training: clustering fitness, top-third selection, three-child reproduction."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .config import RunConfig
from .dynamics import EvalResult, Network, run_sequence
from .normalization import NormalizationPolicy
from .plasticity import GENOME_BOUNDS, GENOME_FIELDS, PlasticityGenome
from .seeds import Purpose, derive_rng, derive_seed
from .stimulus import DIRECTIONS, StimulusSequence, make_dataset
from .topology import NetworkTopology, build_topology, from_snapshot_dict, init_weights, snapshot_dict

logger = logging.getLogger(__name__)

CHILD_KINDS = ("clone", "clone_trained", "mutant_trained")
N_CLASSES = len(DIRECTIONS)


# --- fitness ----------------------------------------------------------------

@dataclass
class FitnessReport:
    purity: float
    cluster_assignments: np.ndarray
    confusion: np.ndarray  # (directions, clusters) counts


def confusion_matrix(labels: np.ndarray, clusters: np.ndarray, n_labels: int = N_CLASSES,
                     n_clusters: int = N_CLASSES) -> np.ndarray:
    m = np.zeros((n_labels, n_clusters), dtype=np.int64)
    np.add.at(m, (np.asarray(labels), np.asarray(clusters)), 1)
    return m


def purity(confusion: np.ndarray) -> float:
    """Fraction of inputs that carry their cluster's majority label."""
    total = confusion.sum()
    return float(confusion.max(axis=0).sum() / total) if total else 0.0


def cluster(vectors: np.ndarray, n_clusters: int = N_CLASSES, seed: int = 0, restarts: int = 10) -> np.ndarray:
    """k-means labels (best inertia over ``restarts`` seeded k-means++ starts)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(np.unique(vectors, axis=0)) < 2:
        return np.zeros(len(vectors), dtype=np.int64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=min(n_clusters, len(vectors)), n_init=restarts, random_state=seed % 2**32)
        return km.fit_predict(vectors).astype(np.int64)


def evaluate_fitness(
    network: Network, test_set: list[StimulusSequence], seed: int = 0, restarts: int = 10
) -> tuple[FitnessReport, EvalResult]:
    """Cluster output spike-count vectors into four groups and score them against movement direction."""
    result = run_sequence(network, test_set, plasticity_on=False)
    vectors = result.output_vectors
    if not vectors.any():
        logger.info("silent network: no output spikes on any test input")
    labels = np.array([s.label for s in test_set])
    assignments = cluster(vectors, N_CLASSES, seed, restarts)
    conf = confusion_matrix(labels, assignments)
    return FitnessReport(purity(conf), assignments, conf), result


def spiking_medians(result: EvalResult) -> tuple[float, float]:
    """Median spikes per neuron per test input for the first hidden and the output layer."""
    n_layers = len(result.layer_sizes)
    hidden = float(np.median(result.layer_counts(1))) if n_layers >= 3 else math.nan
    return hidden, float(np.median(result.output_vectors))


# --- individuals ------------------------------------------------------------

@dataclass
class Individual:
    id: int
    network: Network
    generation: int = 0
    parent_id: int = -1
    child_kind: str = "init"
    fitness: float | None = None
    spikes_hidden_median: float = math.nan
    spikes_output_median: float = math.nan

    @property
    def genome(self) -> PlasticityGenome:
        return self.network.genome

    @property
    def weights(self):
        return self.network.weights

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


def train_individual(individual: Individual, train_set: list[StimulusSequence],
                     policy: NormalizationPolicy) -> Individual:
    """One training cycle: STDP on every frame, ``policy`` after every input."""
    result = run_sequence(individual.network, train_set, plasticity_on=True, policy=policy)
    if result.events:
        logger.info("individual %d: %d dead-group events during training", individual.id, len(result.events))
    return individual


def mutate(genome: PlasticityGenome, rng: np.random.Generator,
           bounds: dict[str, tuple[float, float]] = GENOME_BOUNDS) -> PlasticityGenome:
    """Redraw one uniformly chosen learning parameter uniformly within its bounds."""
    name = GENOME_FIELDS[int(rng.integers(len(GENOME_FIELDS)))]
    lo, hi = bounds[name]
    return dataclasses.replace(genome, **{name: float(rng.uniform(lo, hi))})


# --- one repeat -------------------------------------------------------------

@dataclass
class Population:
    individuals: list[Individual]
    generation: int
    topology: NetworkTopology

    def __len__(self) -> int:
        return len(self.individuals)


@dataclass(frozen=True)
class LogRow:
    policy: str
    repeat: int
    generation: int
    individual_id: int
    child_kind: str
    ltp: float
    inh_ltp: float
    ltd: float
    discharge: float
    purity: float
    spikes_hidden_median: float
    spikes_output_median: float


LOG_COLUMNS = tuple(f.name for f in dataclasses.fields(LogRow))


def log_rows(population: Population, policy: str, repeat: int) -> list[LogRow]:
    rows = []
    for ind in sorted(population.individuals, key=lambda i: i.id):
        g = ind.genome
        rows.append(LogRow(policy, repeat, population.generation, ind.id, ind.child_kind, g.ltp, g.inh_ltp,
                           g.ltd, g.discharge, float(ind.fitness), ind.spikes_hidden_median,
                           ind.spikes_output_median))
    return rows


class Experiment:
    """Seeded evolutionary run of one normalisation policy.

    All randomness is drawn from :mod:`spikenorm.seeds` slots, so results do
    not depend on execution order or on the number of workers.
    """

    def __init__(self, cfg: RunConfig, policy: str | None = None):
        self.cfg = cfg
        self.policy = cfg.normalization(policy)
        self.sim = cfg.sim

    # data
    def test_set(self, repeat: int, generation: int) -> list[StimulusSequence]:
        g = 0 if self.cfg.fixed_data else generation
        return make_dataset(self.cfg.inputs_per_test_cycle, self.cfg.frames_per_test_input,
                            derive_seed(self.cfg.seed, repeat, Purpose.TEST_DATA, g))

    def train_set(self, repeat: int, generation: int, individual: int) -> list[StimulusSequence]:
        g, i = (0, 0) if self.cfg.fixed_data else (generation, individual)
        return make_dataset(self.cfg.inputs_per_train_cycle, self.cfg.frames_per_train_input,
                            derive_seed(self.cfg.seed, repeat, Purpose.TRAIN_DATA, g, i))

    def topology(self, repeat: int) -> NetworkTopology:
        return build_topology(self.cfg.layer_sizes, self.cfg.excitatory_fraction,
                              derive_seed(self.cfg.seed, repeat, Purpose.TOPOLOGY))

    # stages
    def initial_population(self, repeat: int) -> Population:
        """Random genomes and weights, each trained once and evaluated."""
        topo = self.topology(repeat)
        individuals = []
        for i in range(self.cfg.population):
            genome = PlasticityGenome.random(derive_rng(self.cfg.seed, repeat, Purpose.GENOME, i),
                                             self.cfg.genome_bounds)
            weights = init_weights(topo, derive_seed(self.cfg.seed, repeat, Purpose.WEIGHTS, i),
                                   self.cfg.w_init_lo, self.cfg.w_init_hi)
            individuals.append(Individual(i, Network(topo, weights, genome, self.sim)))
        population = Population(individuals, 0, topo)
        self._develop(population.individuals, repeat, 0)
        return population

    def step_generation(self, population: Population, repeat: int) -> Population:
        """Top third become parents; each yields a clone, a trained clone and a trained mutant."""
        if not all(ind.evaluated for ind in population.individuals):
            raise ValueError("every individual must be evaluated before selection")
        size = len(population)
        ranked = sorted(population.individuals, key=lambda ind: (-ind.fitness, ind.id))
        parents = ranked[: math.ceil(size / 3)]
        generation = population.generation + 1
        children: list[Individual] = []
        to_develop: list[Individual] = []
        for parent in parents:
            for kind in CHILD_KINDS:
                cid = len(children)
                net = parent.network.copy()
                if kind == "mutant_trained":
                    rng = derive_rng(self.cfg.seed, repeat, Purpose.MUTATION, generation, cid)
                    net = dataclasses.replace(net, genome=mutate(parent.genome, rng, self.cfg.genome_bounds))
                child = Individual(cid, net, generation, parent.id, kind)
                if kind == "clone":
                    child.fitness = parent.fitness
                    child.spikes_hidden_median = parent.spikes_hidden_median
                    child.spikes_output_median = parent.spikes_output_median
                else:
                    to_develop.append(child)
                children.append(child)
        self._develop(to_develop, repeat, generation)
        return Population(children, generation, population.topology)

    def _develop(self, individuals: list[Individual], repeat: int, generation: int) -> None:
        """Train one cycle, then evaluate, every individual given (in place)."""
        if not individuals:
            return
        test_set = self.test_set(repeat, generation)
        tasks = [(self, ind, repeat, generation, test_set) for ind in individuals]
        if self.cfg.workers > 1:
            with ProcessPoolExecutor(self.cfg.workers) as pool:
                done = list(pool.map(_develop_one, tasks))
        else:
            done = [_develop_one(t) for t in tasks]
        for ind, new in zip(individuals, done):
            ind.network = new.network
            ind.fitness = new.fitness
            ind.spikes_hidden_median = new.spikes_hidden_median
            ind.spikes_output_median = new.spikes_output_median

    def run_repeat(self, repeat: int, start: Population | None = None,
                   on_generation: Callable[[Population], None] | None = None) -> list[LogRow]:
        """Evolve one repeat and return its log rows.

        ``generations`` counts logged generations including generation 0.
        With ``start`` the run resumes from that (evaluated) population.
        """
        population = start if start is not None else self.initial_population(repeat)
        rows = log_rows(population, self.policy.name, repeat)
        if on_generation:
            on_generation(population)
        last = max(self.cfg.generations, 1) - 1
        while population.generation < last:
            population = self.step_generation(population, repeat)
            rows.extend(log_rows(population, self.policy.name, repeat))
            if on_generation:
                on_generation(population)
        return rows


def _develop_one(task) -> Individual:
    exp, ind, repeat, generation, test_set = task
    train_individual(ind, exp.train_set(repeat, generation, ind.id), exp.policy)
    seed = derive_seed(exp.cfg.seed, repeat, Purpose.KMEANS, generation, ind.id)
    report, result = evaluate_fitness(ind.network, test_set, seed, exp.cfg.kmeans_restarts)
    ind.fitness = report.purity
    ind.spikes_hidden_median, ind.spikes_output_median = spiking_medians(result)
    return ind


# --- persistence -------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_log(path, rows: Iterable[LogRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in dataclasses.astuple(row)])
    return path


def read_log(path) -> list[LogRow]:
    converters = {f.name: f.type for f in dataclasses.fields(LogRow)}
    casts = {"str": str, "int": int, "float": float}
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(LOG_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing log columns {sorted(missing)}")
        for rec in reader:
            rows.append(LogRow(**{k: casts[converters[k]](rec[k]) for k in LOG_COLUMNS}))
    return rows


def checkpoint_path(out_dir, policy: str, repeat: int, generation: int) -> Path:
    return Path(out_dir) / "checkpoints" / policy / f"repeat_{repeat:02d}" / f"gen_{generation:03d}.json"


def save_checkpoint(path, population: Population, policy: str, repeat: int) -> Path:
    """Population snapshot: one weight-snapshot record per individual plus genome and lineage."""
    records = []
    for ind in population.individuals:
        rec = snapshot_dict(population.topology, ind.weights)
        rec.update(ind.genome.as_dict())
        rec.update(id=ind.id, generation=ind.generation, parent_id=ind.parent_id, child_kind=ind.child_kind,
                   fitness=ind.fitness, spikes_hidden_median=ind.spikes_hidden_median,
                   spikes_output_median=ind.spikes_output_median)
        records.append(rec)
    doc = {"policy": policy, "repeat": repeat, "generation": population.generation, "individuals": records}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))
    return path


def load_checkpoint(path, cfg: RunConfig) -> tuple[Population, str, int]:
    doc = json.loads(Path(path).read_text())
    topology = None
    individuals = []
    sim = cfg.sim
    for rec in doc["individuals"]:
        topo, weights = from_snapshot_dict(rec)
        if topology is None:
            topology = topo
        elif not topology.same_as(topo):
            raise ValueError(f"{path}: individuals disagree on topology")
        genome = PlasticityGenome(**{k: rec[k] for k in GENOME_FIELDS})
        ind = Individual(rec["id"], Network(topology, weights, genome, sim), rec["generation"],
                         rec["parent_id"], rec["child_kind"], rec["fitness"],
                         rec["spikes_hidden_median"], rec["spikes_output_median"])
        individuals.append(ind)
    return Population(individuals, doc["generation"], topology), doc["policy"], doc["repeat"]


@dataclass
class ExperimentLog:
    rows: list[LogRow] = field(default_factory=list)

    def fitness(self, repeat: int, generation: int) -> list[float]:
        return [r.purity for r in self.rows if r.repeat == repeat and r.generation == generation]


def run_experiment(cfg: RunConfig, policy: str | None = None, out_dir=None) -> ExperimentLog:
    """All repeats of one policy; writes ``log_<policy>.csv`` and checkpoints under ``out_dir`` if given."""
    exp = Experiment(cfg, policy)
    name = exp.policy.name
    rows: list[LogRow] = []
    for repeat in range(cfg.repeats):
        hook = None
        if out_dir is not None and cfg.checkpoints:
            def hook(pop, repeat=repeat):
                save_checkpoint(checkpoint_path(out_dir, name, repeat, pop.generation), pop, name, repeat)
        rows.extend(exp.run_repeat(repeat, on_generation=hook))
        logger.info("policy %s repeat %d done", name, repeat)
    if out_dir is not None:
        write_log(Path(out_dir) / f"log_{name}.csv", rows)
    return ExperimentLog(rows)
