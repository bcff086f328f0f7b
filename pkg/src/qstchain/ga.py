"""Real-valued genetic algorithm over centrosymmetric coupling profiles.

Genomes hold the first ceil((N-1)/2) couplings; :func:`expand` mirrors them
into a full profile.  One generation keeps ``elitism_count`` elites in
place, replaces the remaining (worst) slots with offspring bred from the
``num_parents`` fittest individuals by uniform crossover and adaptive
multiplicative mutation, and evaluates the offspring.

Randomness for generation ``g`` of a run comes from a generator seeded by
``(rng_seed, g)``.  All draws for a generation happen in the engine thread
before fitness evaluation, so results do not depend on ``workers``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from qstchain.dynamics import CouplingProfile

log = logging.getLogger(__name__)

HALT_TOLERANCE = "tolerance"
HALT_MAX_GENERATIONS = "max_generations"
HALT_SATURATION = "saturation"

# "remains without change" for the saturation rule
SATURATION_EPS = 1e-12

Evaluator = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass
class GaHyperparameters:
    """GA settings.  ``gene_max=None`` means "the chain length N"."""

    max_generations: int = 2000
    population_size: int = 1000
    gene_min: float = 0.0
    gene_max: float | None = None
    saturation_generations: int = 20
    num_parents: int = 200
    selection: str = "steady_state"
    elitism_count: int = 100
    crossover: str = "uniform"
    crossover_probability: float = 0.6
    mutation_probability: float = 0.1
    strong_zeta: float = 0.05
    strong_zeta_first_gene: float = 0.1
    weak_zeta: float = 0.03
    convergence_window: int = 10
    convergence_threshold: float = 0.001
    tolerance: float = 0.01
    rng_seed: int = 0

    @classmethod
    def stringent(cls, n_sites: int, **overrides) -> "GaHyperparameters":
        """Preset for tolerance 0.005: wider gene range and more generations."""
        params = dict(tolerance=0.005, gene_max=1.2 * n_sites, max_generations=3000)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_dict(cls, data: dict) -> "GaHyperparameters":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved_gene_max(self, n_sites: int) -> float:
        return float(n_sites) if self.gene_max is None else float(self.gene_max)

    def validate(self, n_sites: int | None = None) -> None:
        if self.selection != "steady_state":
            raise ValueError(f"unsupported selection {self.selection!r}")
        if self.crossover != "uniform":
            raise ValueError(f"unsupported crossover {self.crossover!r}")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.elitism_count <= self.num_parents <= self.population_size:
            raise ValueError("need 0 <= elitism_count <= num_parents <= population_size")
        if self.num_parents < 1:
            raise ValueError("num_parents must be >= 1")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.saturation_generations < 1:
            raise ValueError("saturation_generations must be >= 1")
        for name in ("crossover_probability", "mutation_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if n_sites is not None:
            if not self.gene_min < self.resolved_gene_max(n_sites):
                raise ValueError("gene_min must be smaller than gene_max")
        elif self.gene_max is not None and not self.gene_min < self.gene_max:
            raise ValueError("gene_min must be smaller than gene_max")


def n_genes(n_sites: int) -> int:
    return math.ceil((n_sites - 1) / 2)


def expansion_index(n_sites: int) -> np.ndarray:
    # bond i (1-based) reads gene min(i, N - i)
    i = np.arange(1, n_sites)
    return np.minimum(i, n_sites - i) - 1


def expand_batch(genes: np.ndarray, n_sites: int) -> np.ndarray:
    genes = np.asarray(genes, dtype=float)
    if genes.shape[-1] != n_genes(n_sites):
        raise ValueError(f"expected {n_genes(n_sites)} genes for N={n_sites}, "
                         f"got {genes.shape[-1]}")
    return genes[..., expansion_index(n_sites)]


def expand(genes, n_sites: int) -> CouplingProfile:
    """Mirror a half-profile genome into a centrosymmetric CouplingProfile."""
    return CouplingProfile(expand_batch(np.asarray(genes, dtype=float), n_sites), n_sites)


@dataclass
class Individual:
    genome: np.ndarray
    fitness: float | None = None


@dataclass
class Population:
    """Genes ``(P, M)`` plus fitness and transfer probability ``(P,)``.

    Unevaluated entries hold NaN.
    """

    genes: np.ndarray
    fitness: np.ndarray
    probability: np.ndarray

    @classmethod
    def unevaluated(cls, genes: np.ndarray) -> "Population":
        nan = np.full(genes.shape[0], np.nan)
        return cls(genes, nan, nan.copy())

    def __len__(self):
        return self.genes.shape[0]

    def __getitem__(self, i) -> Individual:
        f = self.fitness[i]
        return Individual(self.genes[i].copy(), None if np.isnan(f) else float(f))

    @property
    def evaluated(self) -> bool:
        return not np.isnan(self.fitness).any()

    def best_index(self) -> int:
        return int(np.argmax(self.fitness))

    def copy(self) -> "Population":
        return Population(self.genes.copy(), self.fitness.copy(), self.probability.copy())


def init_population(hp: GaHyperparameters, n_sites: int, rng: np.random.Generator) -> Population:
    lo, hi = hp.gene_min, hp.resolved_gene_max(n_sites)
    genes = rng.uniform(lo, hi, size=(hp.population_size, n_genes(n_sites)))
    return Population.unevaluated(genes)


def evaluate(pop: Population, evaluator: Evaluator, n_sites: int,
             rows: np.ndarray | None = None, workers: int = 1) -> None:
    """Fill in fitness for ``rows`` (default: all) in place.

    With ``workers > 1`` the rows are split into contiguous chunks evaluated
    on a thread pool and written back by position.
    """
    if rows is None:
        rows = np.arange(len(pop))
    if rows.size == 0:
        return
    couplings = expand_batch(pop.genes[rows], n_sites)
    if workers <= 1 or rows.size < 2 * workers:
        fit, prob = evaluator(couplings)
    else:
        chunks = np.array_split(couplings, workers)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(evaluator, chunks))
        fit = np.concatenate([r[0] for r in results])
        prob = np.concatenate([r[1] for r in results])
    pop.fitness[rows] = fit
    pop.probability[rows] = prob


def select_parents_steady_state(fitness: np.ndarray, num_parents: int) -> np.ndarray:
    """Indices of the ``num_parents`` fittest individuals, best first.

    Ties go to the lower population index.
    """
    fitness = np.asarray(fitness, dtype=float)
    if num_parents > fitness.size:
        raise ValueError(f"num_parents={num_parents} exceeds population size {fitness.size}")
    if np.isnan(fitness).any():
        raise ValueError("population has unevaluated individuals")
    return np.argsort(-fitness, kind="stable")[:num_parents]


def crossover_batch(parents_a: np.ndarray, parents_b: np.ndarray, rng: np.random.Generator,
                    probability: float = 1.0) -> np.ndarray:
    """Uniform crossover, one child per row.

    A pair crosses with ``probability``; otherwise the child copies parent a.
    When crossing, each gene comes from either parent with probability 1/2.
    """
    parents_a = np.atleast_2d(parents_a)
    parents_b = np.atleast_2d(parents_b)
    if parents_a.shape != parents_b.shape:
        raise ValueError("parent genomes differ in length")
    crosses = rng.random(parents_a.shape[0]) < probability
    take_b = rng.random(parents_a.shape) < 0.5
    return np.where(crosses[:, None] & take_b, parents_b, parents_a)


def uniform_crossover(parent_a, parent_b, rng: np.random.Generator,
                      probability: float = 1.0, mask=None) -> np.ndarray:
    """Single-child uniform crossover.

    ``mask`` (boolean, True = take parent b) bypasses the random draw.
    """
    a = np.asarray(parent_a, dtype=float)
    b = np.asarray(parent_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("parent genomes differ in length")
    if mask is not None:
        return np.where(np.asarray(mask, dtype=bool), b, a)
    return crossover_batch(a[None, :], b[None, :], rng, probability)[0]


def mutation_regime(fitness_history, generation: int, hp: GaHyperparameters) -> str:
    """'strong' until the last ``convergence_window`` best-fitness values settle.

    Settled means no value exceeds the window mean by more than
    ``convergence_threshold``.
    """
    window = hp.convergence_window
    history = np.asarray(fitness_history, dtype=float)
    if generation < window or history.size < window:
        return "strong"
    recent = history[-window:]
    deviations = recent - recent.sum() / window
    return "strong" if np.any(deviations > hp.convergence_threshold) else "weak"


def mutation_zetas(regime: str, n: int, hp: GaHyperparameters) -> np.ndarray:
    if regime == "weak":
        return np.full(n, hp.weak_zeta)
    zeta = np.full(n, hp.strong_zeta)
    if n:
        zeta[0] = hp.strong_zeta_first_gene
    return zeta


def mutate_batch(genes: np.ndarray, zetas: np.ndarray, hp: GaHyperparameters,
                 gene_max: float, rng: np.random.Generator) -> np.ndarray:
    genes = np.atleast_2d(genes)
    hit = rng.random(genes.shape) < hp.mutation_probability
    delta = rng.uniform(-1.0, 1.0, size=genes.shape) * zetas
    out = np.where(hit, genes * (1.0 + delta), genes)
    return np.clip(out, hp.gene_min, gene_max)


def adaptive_mutation(genome, fitness_history, generation: int, hp: GaHyperparameters,
                      rng: np.random.Generator, n_sites: int | None = None) -> np.ndarray:
    """Mutate each gene with probability ``mutation_probability`` by J -> J (1 + delta).

    ``delta`` is uniform on [-zeta, zeta]; zeta follows :func:`mutation_regime`.
    Accepts a single genome or a ``(B, M)`` batch.  Results are clamped to
    the gene bounds (``n_sites`` resolves a default ``gene_max``).
    """
    genome = np.asarray(genome, dtype=float)
    if hp.gene_max is None and n_sites is None:
        raise ValueError("n_sites is required when gene_max defaults to N")
    gene_max = hp.resolved_gene_max(n_sites) if n_sites is not None else float(hp.gene_max)
    regime = mutation_regime(fitness_history, generation, hp)
    zetas = mutation_zetas(regime, genome.shape[-1], hp)
    out = mutate_batch(genome, zetas, hp, gene_max, rng)
    return out[0] if genome.ndim == 1 else out


def generation_rng(rng_seed: int, generation: int) -> np.random.Generator:
    return np.random.default_rng([int(rng_seed), int(generation)])


def evolve_generation(pop: Population, hp: GaHyperparameters, evaluator: Evaluator,
                      n_sites: int, rng: np.random.Generator,
                      fitness_history=(), generation: int = 0,
                      workers: int = 1) -> Population:
    """Produce the next generation from an evaluated population.

    Elites stay in their slots; every other slot is overwritten, in
    ascending index order, by offspring of parent pairs (1,2), (3,4), ...
    in fitness-rank order, wrapping around the parent list.
    """
    if not pop.evaluated:
        raise ValueError("population must be evaluated before evolving")
    size = len(pop)
    order = np.argsort(-pop.fitness, kind="stable")
    parents = order[:hp.num_parents]
    replace = np.sort(order[hp.elitism_count:])
    nxt = pop.copy()
    n_off = replace.size
    if n_off == 0:
        return nxt
    k = np.arange(n_off)
    a = pop.genes[parents[(2 * k) % parents.size]]
    b = pop.genes[parents[(2 * k + 1) % parents.size]]
    children = crossover_batch(a, b, rng, hp.crossover_probability)
    children = adaptive_mutation(children, fitness_history, generation, hp, rng, n_sites)
    nxt.genes[replace] = children
    nxt.fitness[replace] = np.nan
    nxt.probability[replace] = np.nan
    evaluate(nxt, evaluator, n_sites, rows=replace, workers=workers)
    assert len(nxt) == size
    return nxt


@dataclass
class RunRecord:
    n_sites: int
    rng_seed: int
    best_fitness_per_generation: list[float]
    best_probability_per_generation: list[float]
    best_genes: list[float]
    best_fitness: float
    best_probability: float
    best_generation: int
    halting_reason: str
    final_population_min_fitness: float
    final_population_min_probability: float
    initial_best_fitness: float
    wall_time: float = field(default=0.0, compare=False)

    @property
    def best_profile(self) -> CouplingProfile:
        return expand(self.best_genes, self.n_sites)

    @property
    def n_generations(self) -> int:
        return len(self.best_fitness_per_generation)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        d["best_couplings"] = [float(x) for x in self.best_profile.couplings]
        if not include_timing:
            d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def run_ga(hp: GaHyperparameters, evaluator: Evaluator, n_sites: int,
           rng_seed: int | None = None, workers: int = 1,
           on_generation: Callable[[int, Population], None] | None = None) -> RunRecord:
    """Evolve until tolerance, max_generations or saturation halts the run."""
    import time

    hp.validate(n_sites)
    seed = hp.rng_seed if rng_seed is None else int(rng_seed)
    start = time.perf_counter()
    pop = init_population(hp, n_sites, generation_rng(seed, 0))
    evaluate(pop, evaluator, n_sites, workers=workers)

    best_f: list[float] = []
    best_p: list[float] = []
    best = pop.best_index()
    champion = (float(pop.fitness[best]), float(pop.probability[best]), pop.genes[best].copy(), 0)
    initial_best = champion[0]
    stale = 0
    reason = HALT_MAX_GENERATIONS
    for generation in range(1, hp.max_generations + 1):
        rng = generation_rng(seed, generation)
        pop = evolve_generation(pop, hp, evaluator, n_sites, rng,
                                fitness_history=best_f, generation=generation - 1,
                                workers=workers)
        best = pop.best_index()
        f, p = float(pop.fitness[best]), float(pop.probability[best])
        stale = stale + 1 if f - champion[0] < SATURATION_EPS else 0
        if f > champion[0]:
            champion = (f, p, pop.genes[best].copy(), generation)
        best_f.append(max(f, champion[0]))
        best_p.append(champion[1])
        if on_generation is not None:
            on_generation(generation, pop)
        if champion[0] > 1.0 - hp.tolerance:
            reason = HALT_TOLERANCE
            break
        if generation == hp.max_generations:
            reason = HALT_MAX_GENERATIONS
            break
        if stale >= hp.saturation_generations:
            reason = HALT_SATURATION
            break
    log.debug("run seed=%d N=%d halted after %d generations (%s), best=%.6f",
              seed, n_sites, len(best_f), reason, champion[0])
    return RunRecord(
        n_sites=n_sites,
        rng_seed=seed,
        best_fitness_per_generation=best_f,
        best_probability_per_generation=best_p,
        best_genes=[float(g) for g in champion[2]],
        best_fitness=champion[0],
        best_probability=champion[1],
        best_generation=champion[3],
        halting_reason=reason,
        final_population_min_fitness=float(pop.fitness.min()),
        final_population_min_probability=float(pop.probability.min()),
        initial_best_fitness=initial_best,
        wall_time=time.perf_counter() - start,
    )


@dataclass
class ExperimentSummary:
    n_sites: int | None
    n_runs: int
    p_max: float
    p_avg: float
    p_avg_std: float
    p_min: float
    per_run_maxima: list[float]
    gen_of_p_max: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize_runs(records: list[RunRecord]) -> ExperimentSummary:
    """Maximal, average and minimal transfer probability over independent runs."""
    if not records:
        raise ValueError("no run records to summarize")
    maxima = np.array([r.best_probability for r in records])
    top = int(np.argmax(maxima))
    sizes = {r.n_sites for r in records}
    return ExperimentSummary(
        n_sites=sizes.pop() if len(sizes) == 1 else None,
        n_runs=len(records),
        p_max=float(maxima.max()),
        p_avg=float(maxima.mean()),
        p_avg_std=float(maxima.std()),
        p_min=float(min(r.final_population_min_probability for r in records)),
        per_run_maxima=[float(x) for x in maxima],
        gen_of_p_max=records[top].best_generation,
    )
