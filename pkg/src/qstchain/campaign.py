"""Design campaigns: many independent GA runs per chain length, written to disk."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qstchain import io as qio
from qstchain.dynamics import TransferTask
from qstchain.fitness import FitnessFunction, FitnessSpec
from qstchain.ga import ExperimentSummary, GaHyperparameters, RunRecord, run_ga, summarize_runs

log = logging.getLogger(__name__)

CONFIG_KEYS = {"chain_lengths", "fitness", "hyperparameters", "n_runs",
               "arrival_multiple", "output_dir", "master_seed", "workers"}


def derive_seed(master_seed: int, n_sites: int, run_index: int) -> int:
    """Stable per-run seed from (master_seed, N, run_index)."""
    ss = np.random.SeedSequence([int(master_seed), int(n_sites), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class CampaignConfig:
    chain_lengths: list[int] = field(default_factory=lambda: [21])
    fitness: FitnessSpec = field(default_factory=FitnessSpec)
    hyperparameters: GaHyperparameters = field(default_factory=GaHyperparameters)
    n_runs: int = 50
    arrival_multiple: float = 2
    output_dir: str = "qstchain-out"
    master_seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not self.chain_lengths:
            raise ValueError("chain_lengths is empty")
        for n in self.chain_lengths:
            if int(n) != n or n < 2:
                raise ValueError(f"chain lengths must be integers >= 2, got {n!r}")
        if not self.arrival_multiple > 0:
            raise ValueError("arrival_multiple must be positive")
        for n in self.chain_lengths:
            self.hyperparameters.validate(n)

    @classmethod
    def from_dict(cls, doc: dict) -> "CampaignConfig":
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown campaign key(s): {', '.join(sorted(unknown))}")
        kw = dict(doc)
        if "fitness" in kw:
            kw["fitness"] = FitnessSpec(**kw["fitness"])
        if "hyperparameters" in kw:
            kw["hyperparameters"] = GaHyperparameters.from_dict(kw["hyperparameters"])
        if "chain_lengths" in kw:
            kw["chain_lengths"] = [int(n) for n in kw["chain_lengths"]]
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "chain_lengths": list(self.chain_lengths),
            "fitness": self.fitness.to_dict(),
            "hyperparameters": self.hyperparameters.to_dict(),
            "n_runs": self.n_runs,
            "arrival_multiple": self.arrival_multiple,
            "output_dir": str(self.output_dir),
            "master_seed": self.master_seed,
            "workers": self.workers,
        }

    def identity(self) -> dict:
        """The part of the config that determines results (hashed into outputs)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return d


def _single_run(args) -> RunRecord:
    n_sites, seed, spec, hp, arrival_time = args
    evaluator = FitnessFunction(spec, n_sites, arrival_time)
    return run_ga(hp, evaluator, n_sites, rng_seed=seed)


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: dict[int, list[RunRecord]]
    summaries: dict[int, ExperimentSummary]

    def best_record(self, n_sites: int) -> RunRecord:
        recs = self.records[n_sites]
        return recs[int(np.argmax([r.best_fitness for r in recs]))]


def run_campaign(config: CampaignConfig) -> CampaignResult:
    """Run every (N, run) pair; order of results is independent of workers."""
    config.validate()
    jobs = []
    for n in config.chain_lengths:
        task = TransferTask.for_chain(n, config.arrival_multiple)
        for r in range(config.n_runs):
            jobs.append((n, derive_seed(config.master_seed, n, r), config.fitness,
                         config.hyperparameters, task.arrival_time))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_single_run, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_single_run(job))
            rec = results[-1]
            log.info("N=%d seed=%d: best=%.5f P=%.5f after %d generations (%s)",
                     rec.n_sites, rec.rng_seed, rec.best_fitness, rec.best_probability,
                     rec.n_generations, rec.halting_reason)
    records: dict[int, list[RunRecord]] = {n: [] for n in config.chain_lengths}
    for rec in results:
        records[rec.n_sites].append(rec)
    summaries = {n: summarize_runs(recs) for n, recs in records.items()}
    return CampaignResult(config, records, summaries)


def write_campaign(result: CampaignResult, out_dir=None) -> Path:
    """Write summary, traces, run records, best profiles and timings.

    Everything except ``timings.csv`` is a deterministic function of the
    config.
    """
    cfg = result.config
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    identity = cfg.identity()
    meta = qio.metadata(seed=cfg.master_seed, config=identity)

    qio.write_json(out / "config.json", {"config": identity, "meta": meta})
    rows = []
    for n in cfg.chain_lengths:
        s = result.summaries[n]
        rows.append([n, s.p_max, s.p_avg, s.p_avg_std, s.p_min, s.gen_of_p_max])
    qio.write_csv(out / "summary.csv", ["N", "P_M", "P_avg", "P_avg_std", "P_m", "gen_of_P_M"],
                  rows, meta)

    timing_rows = []
    for n in cfg.chain_lengths:
        for r, rec in enumerate(result.records[n]):
            stem = f"N{n}_run{r:03d}"
            trace = zip(range(1, rec.n_generations + 1), rec.best_fitness_per_generation,
                        rec.best_probability_per_generation)
            qio.write_csv(out / "traces" / f"{stem}.csv",
                          ["generation", "best_fitness", "best_probability"], trace,
                          dict(meta, run_seed=rec.rng_seed))
            qio.write_json(out / "records" / f"{stem}.json",
                           {"record": rec.to_dict(), "meta": dict(meta, run_seed=rec.rng_seed)})
            timing_rows.append([n, r, rec.rng_seed, rec.n_generations, rec.wall_time])

        best = result.best_record(n)
        task = TransferTask.for_chain(n, cfg.arrival_multiple)
        qio.save_profile(out / f"best_N{n}.json", best.best_profile, dict(
            meta, fitness=cfg.fitness.to_dict(), best_fitness=best.best_fitness,
            transmission_probability=best.best_probability, arrival_time=task.arrival_time,
            run_seed=best.rng_seed, generation=best.best_generation))
    qio.write_csv(out / "timings.csv", ["N", "run", "run_seed", "generations", "wall_seconds"],
                  timing_rows, dict(meta, note="wall times are not reproducible"))
    return out


def mean_wall_time(records: list[RunRecord]) -> float:
    return float(np.mean([r.wall_time for r in records]))
