"""Genetic search over pipeline hyperparameters.

Fitness is measured on a fixed train/validation split: AUC first, specificity
at 80% sensitivity as the tiebreak (lexicographic by default; single-objective
modes are available). Fitness is a pure function of the genome, so evaluations
are cached and duplicate genomes are never retrained.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .errors import SingleClassData
from .evaluation import parallel_map
from .forest import ForestParams, predict_proba_batch, train_forest
from .metrics import ScoredSet, roc_curve, specificity_at_sensitivity
from .prep import Dataset, fit_scaler, transform_dataset
from .rng import child_generator, child_seed

# gene name -> (kind, domain); kinds: choice (unordered set),
# int (inclusive range), uniform (continuous range)
GENE_SPACE: dict[str, tuple[str, tuple]] = {
    "n_estimators": ("choice", (50, 100, 200, 400)),
    "criterion": ("choice", ("entropy", "gini")),
    "max_features": ("uniform", (0.1, 1.0)),
    "min_samples_leaf": ("int", (1, 20)),
    "min_samples_split": ("int", (2, 20)),
    "bootstrap": ("choice", (False, True)),
    "split_mode": ("choice", ("random", "best")),
    "l2_normalize": ("choice", (True, False)),
}


@dataclass(frozen=True)
class Genome:
    n_estimators: int = 100
    criterion: str = "entropy"
    max_features: float = 0.75
    min_samples_leaf: int = 4
    min_samples_split: int = 3
    bootstrap: bool = False
    split_mode: str = "random"
    l2_normalize: bool = True

    def __post_init__(self) -> None:
        for name, (kind, domain) in GENE_SPACE.items():
            value = getattr(self, name)
            if kind == "choice" and value not in domain:
                raise ValueError(f"{name}={value!r} outside {domain}")
            if kind == "int" and not (domain[0] <= value <= domain[1] and isinstance(value, int)):
                raise ValueError(f"{name}={value!r} outside [{domain[0]}, {domain[1]}]")
            if kind == "uniform" and not domain[0] <= value <= domain[1]:
                raise ValueError(f"{name}={value!r} outside [{domain[0]}, {domain[1]}]")

    def to_dict(self) -> dict:
        return asdict(self)

    def key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def forest_params(self, seed: int) -> ForestParams:
        return ForestParams(
            n_estimators=self.n_estimators,
            criterion=self.criterion,
            max_features=self.max_features,
            min_samples_leaf=self.min_samples_leaf,
            min_samples_split=self.min_samples_split,
            bootstrap=self.bootstrap,
            split_mode=self.split_mode,
            seed=seed,
        )


@dataclass(frozen=True)
class Fitness:
    auc: float          # percentage
    spec_at_80: float   # percentage

    def sort_key(self, objective: str = "lex") -> tuple:
        if objective == "auc":
            return (self.auc,)
        if objective == "spec80":
            return (self.spec_at_80,)
        if objective == "lex":
            return (self.auc, self.spec_at_80)
        raise ValueError(f"unknown objective {objective!r}")


def compare_fitness(a: Fitness, b: Fitness, objective: str = "lex") -> int:
    """-1, 0 or 1 as a is worse than, equal to, or better than b."""
    ka, kb = a.sort_key(objective), b.sort_key(objective)
    return (ka > kb) - (ka < kb)


@dataclass(frozen=True)
class SearchConfig:
    generations: int = 10
    population: int = 20
    tournament_size: int = 3
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    elitism_count: int = 2
    objective: str = "lex"
    sensitivity_target: float = 0.8
    seed: int = 42

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0 <= self.elitism_count < self.population:
            raise ValueError("elitism_count must be < population")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


def _sample_gene(name: str, rng: np.random.Generator):
    kind, domain = GENE_SPACE[name]
    if kind == "choice":
        return domain[int(rng.integers(len(domain)))]
    if kind == "int":
        return int(rng.integers(domain[0], domain[1] + 1))
    return float(rng.uniform(domain[0], domain[1]))


def random_genome(rng: np.random.Generator) -> Genome:
    return Genome(**{name: _sample_gene(name, rng) for name in GENE_SPACE})


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    """Uniform crossover: each gene swaps between the children with prob 0.5."""
    da, db = a.to_dict(), b.to_dict()
    ca, cb = {}, {}
    for name in GENE_SPACE:
        if rng.random() < 0.5:
            ca[name], cb[name] = db[name], da[name]
        else:
            ca[name], cb[name] = da[name], db[name]
    return Genome(**ca), Genome(**cb)


def mutate(g: Genome, rng: np.random.Generator, mutation_prob: float) -> Genome:
    """Per-gene resampling: mutated genes draw fresh uniform values."""
    d = g.to_dict()
    for name in GENE_SPACE:
        if rng.random() < mutation_prob:
            d[name] = _sample_gene(name, rng)
    return Genome(**d)


def _genome_train_seed(cfg_seed: int, genome: Genome) -> int:
    # fitness must be a pure function of the genome for the cache to be sound
    digest = hashlib.sha256(genome.key().encode()).hexdigest()[:16]
    return child_seed(cfg_seed, f"genome-{digest}")


class _Evaluator:
    def __init__(self, train: Dataset, val: Dataset, cfg: SearchConfig):
        self.cfg = cfg
        self.scaler = fit_scaler(train)
        self.cache: dict[str, Fitness] = {}
        self._splits = {}
        for l2 in (True, False):
            self._splits[l2] = (
                transform_dataset(train, self.scaler, l2=l2),
                transform_dataset(val, self.scaler, l2=l2),
            )

    def evaluate(self, genome: Genome) -> tuple[Fitness, float]:
        """Returns fitness and the training wall time (0.0 on cache hits)."""
        key = genome.key()
        if key in self.cache:
            return self.cache[key], 0.0
        start = time.perf_counter()
        train_t, val_t = self._splits[genome.l2_normalize]
        params = genome.forest_params(_genome_train_seed(self.cfg.seed, genome))
        model = train_forest(train_t.features, train_t.labels, params)
        scored = ScoredSet(predict_proba_batch(model, val_t.features), val_t.labels)
        auc = 100.0 * roc_curve(scored).auc
        spec, _ = specificity_at_sensitivity(scored, self.cfg.sensitivity_target)
        fitness = Fitness(auc=auc, spec_at_80=100.0 * spec)
        self.cache[key] = fitness
        return fitness, time.perf_counter() - start


def evolve(train: Dataset, val: Dataset, cfg: SearchConfig | None = None,
           jobs: int = 1, log_timing: bool = True,
           ) -> tuple[Genome, Fitness, list[dict]]:
    """Run the evolutionary loop; returns (best genome, its fitness, log).

    The log holds one record per population member per generation:
    {generation, genome, auc, spec_at_80, train_seconds}. train_seconds is
    wall clock and is nulled when log_timing is off (reproducible-log mode).
    """
    cfg = cfg or SearchConfig()
    for name, split in (("train", train), ("validation", val)):
        if split.labels is None or split.labels.min() == split.labels.max():
            raise SingleClassData(f"{name} split must contain both classes")

    rng = child_generator(cfg.seed, "search")
    evaluator = _Evaluator(train, val, cfg)
    log: list[dict] = []
    best: tuple[Genome, Fitness] | None = None

    def run_generation(generation: int, population: list[Genome]) -> list[Fitness]:
        nonlocal best
        outcomes = parallel_map(evaluator.evaluate, population, jobs=jobs)
        fitnesses = []
        for genome, (fitness, seconds) in zip(population, outcomes):
            fitnesses.append(fitness)
            log.append({
                "generation": generation,
                "genome": genome.to_dict(),
                "auc": fitness.auc,
                "spec_at_80": fitness.spec_at_80,
                "train_seconds": round(seconds, 3) if log_timing else None,
            })
            if best is None or compare_fitness(fitness, best[1], cfg.objective) > 0:
                best = (genome, fitness)
        return fitnesses

    population = [random_genome(rng) for _ in range(cfg.population)]
    fitnesses = run_generation(0, population)

    for generation in range(1, cfg.generations + 1):
        ranked = sorted(range(len(population)),
                        key=lambda i: fitnesses[i].sort_key(cfg.objective),
                        reverse=True)
        next_pop: list[Genome] = [population[i] for i in ranked[:cfg.elitism_count]]

        def tournament() -> Genome:
            picks = rng.integers(0, len(population), size=cfg.tournament_size)
            winner = max(picks, key=lambda i: fitnesses[i].sort_key(cfg.objective))
            return population[int(winner)]

        while len(next_pop) < cfg.population:
            pa, pb = tournament(), tournament()
            if rng.random() < cfg.crossover_prob:
                ca, cb = crossover(pa, pb, rng)
            else:
                ca, cb = pa, pb
            for child in (ca, cb):
                if len(next_pop) < cfg.population:
                    next_pop.append(mutate(child, rng, cfg.mutation_prob))
        population = next_pop
        fitnesses = run_generation(generation, population)

    assert best is not None
    return best[0], best[1], log


def write_search_log(path, records: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
