"""Command line entry point: ``qstchain design|disorder|spectra``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from qstchain import io as qio
from qstchain.campaign import CampaignConfig, run_campaign, write_campaign
from qstchain.disorder import DisorderConfig, FitConvergenceError, disorder_sweep, fit_decay_curve
from qstchain.dynamics import (
    ConvergenceError,
    ProfileError,
    SectorTooLargeError,
    TransferTask,
    transmission_probability,
)
from qstchain.fitness import FitnessSpec
from qstchain.spectral import kay_report, sector_gap_ratio_histogram

log = logging.getLogger("qstchain")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

DEFAULT_SIGMAS = [round(0.05 * i, 2) for i in range(11)]


class ConfigError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file; flags override it")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel worker count (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstchain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="run GA design campaigns")
    _add_common(d)
    d.add_argument("--n", type=int, nargs="+", help="chain length(s)")
    d.add_argument("--fitness", choices=["fit1", "fit2"])
    d.add_argument("--beta", type=float)
    d.add_argument("--tolerance", type=float)
    d.add_argument("--runs", type=int, help="independent runs per chain length")
    d.add_argument("--arrival-multiple", type=float, help="T = multiple * N")
    d.add_argument("--max-generations", type=int)
    d.add_argument("--population-size", type=int)
    d.add_argument("--num-parents", type=int)
    d.add_argument("--elitism", type=int)
    d.add_argument("--stringent", action="store_true",
                   help="tolerance 0.005 preset (gene_max 1.2 N, 3000 generations)")

    s = sub.add_parser("disorder", help="static-disorder sweep and decay fit")
    _add_common(s)
    s.add_argument("profile", nargs="?", help="coupling profile JSON")
    s.add_argument("--sigmas", type=_parse_floats, help="comma-separated sigma grid")
    s.add_argument("--realizations", type=int, help="disorder realizations per sigma")
    s.add_argument("--arrival-time", type=float)
    s.add_argument("--arrival-multiple", type=float)

    g = sub.add_parser("spectra", help="gap-ratio histogram and Kay report")
    _add_common(g)
    g.add_argument("profile", nargs="?", help="coupling profile JSON")
    g.add_argument("--k-max", type=int, help="largest excitation sector")
    g.add_argument("--pool", choices=["within", "across"])
    g.add_argument("--cap", type=int, help="dense diagonalization cap")
    g.add_argument("--threshold", type=float, help="Kay-active weight threshold")
    g.add_argument("--arrival-time", type=float)
    g.add_argument("--arrival-multiple", type=float)
    return parser


# --- design ----------------------------------------------------------------------

def design_config(args) -> CampaignConfig:
    doc = _load_config(args.config)
    try:
        cfg = CampaignConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid campaign config: {exc}")
    hp = cfg.hyperparameters
    if args.n:
        cfg.chain_lengths = args.n
    if args.stringent:
        if len(cfg.chain_lengths) != 1:
            raise ConfigError("--stringent needs a single chain length")
        hp = hp.stringent(cfg.chain_lengths[0])
    fitness = cfg.fitness
    if args.fitness or args.beta is not None:
        try:
            fitness = FitnessSpec(args.fitness or fitness.kind,
                                  fitness.beta if args.beta is None else args.beta)
        except ValueError as exc:
            raise ConfigError(str(exc))
    cfg.fitness = fitness
    for flag, name in [("tolerance", "tolerance"), ("max_generations", "max_generations"),
                       ("population_size", "population_size"), ("num_parents", "num_parents"),
                       ("elitism", "elitism_count")]:
        value = getattr(args, flag)
        if value is not None:
            setattr(hp, name, value)
    cfg.hyperparameters = hp
    if args.runs is not None:
        cfg.n_runs = args.runs
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.arrival_multiple is not None:
        cfg.arrival_multiple = args.arrival_multiple
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg


def cmd_design(args) -> int:
    cfg = design_config(args)
    try:
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.output_dir}: {exc}")
    result = run_campaign(cfg)
    out = write_campaign(result)
    for n in cfg.chain_lengths:
        s = result.summaries[n]
        print(f"N={n}: P_M={s.p_max:.5f} <P>_M={s.p_avg:.5f} (std {s.p_avg_std:.5f}) "
              f"P_m={s.p_min:.5f}")
    print(f"wrote {out}")
    return EXIT_OK


# --- shared profile handling --------------------------------------------------

def _profile_and_task(args, doc: dict):
    path = args.profile or doc.get("profile")
    if not path:
        raise ConfigError("no profile file given")
    try:
        profile = qio.load_profile(path)
    except FileNotFoundError:
        raise ConfigError(f"profile file not found: {path}")
    except ProfileError as exc:
        raise ConfigError(f"invalid profile {path}: {exc}")
    arrival = args.arrival_time if args.arrival_time is not None else doc.get("arrival_time")
    multiple = args.arrival_multiple if args.arrival_multiple is not None \
        else doc.get("arrival_multiple")
    if arrival is None and multiple is None:
        arrival = profile.meta.get("arrival_time")
    try:
        if arrival is not None:
            task = TransferTask(float(arrival))
        else:
            task = TransferTask.for_chain(profile.n_sites, 2 if multiple is None else multiple)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return path, profile, task


def _out_dir(args, doc, default: str) -> Path:
    out = Path(args.out or doc.get("output_dir") or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}")
    return out


# --- disorder -------------------------------------------------------------------

def cmd_disorder(args) -> int:
    doc = _load_config(args.config)
    path, profile, task = _profile_and_task(args, doc)
    sigmas = args.sigmas if args.sigmas is not None else doc.get("sigmas", DEFAULT_SIGMAS)
    n_real = args.realizations or doc.get("n_realizations", 1000)
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    try:
        cfg = DisorderConfig(0.0, int(n_real), int(seed))
        if not sigmas or any(s < 0 for s in sigmas):
            raise ValueError("sigma grid must be nonempty and nonnegative")
    except ValueError as exc:
        raise ConfigError(str(exc))
    out = _out_dir(args, doc, "qstchain-disorder")
    identity = {"profile": profile.to_dict()["couplings"], "n": profile.n_sites,
                "arrival_time": task.arrival_time, "sigmas": list(sigmas),
                "n_realizations": cfg.n_realizations}
    meta = qio.metadata(seed=cfg.rng_seed, config=identity, arrival_time=task.arrival_time)

    curve = disorder_sweep(profile, task, sigmas, cfg)
    qio.write_csv(out / "disorder_curve.csv", ["sigma", "mean", "std"],
                  zip(curve.sigmas.tolist(), curve.means.tolist(), curve.stds.tolist()), meta)
    p0 = transmission_probability(profile, task)
    print(f"N={profile.n_sites} T={task.arrival_time:g} design P={p0:.6f}")
    for s, m, sd in zip(curve.sigmas, curve.means, curve.stds):
        print(f"  sigma={s:<6g} mean={m:.6f} std={sd:.6f}")
    if curve.sigmas.size < 6:
        print("fewer than 6 sigma values: decay fit skipped")
        return EXIT_OK
    try:
        fit = fit_decay_curve(curve, n_sites=profile.n_sites)
    except FitConvergenceError as exc:
        raise RuntimeFailure(str(exc))
    qio.write_json(out / "decay_fit.json", {**fit.to_dict(), "meta": meta})
    print(f"fit: a={fit.a:.5g} b={fit.b:.5g} c={fit.c:.5g} d={fit.d:.5g} "
          f"rms={fit.residual_norm:.3g}")
    if fit.failed:
        print(f"decay fit failed: {'; '.join(fit.notes)}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# --- spectra -------------------------------------------------------------------

def cmd_spectra(args) -> int:
    doc = _load_config(args.config)
    path, profile, task = _profile_and_task(args, doc)
    k_max = args.k_max or doc.get("k_max", 1)
    pool = args.pool or doc.get("pool", "within")
    cap = args.cap or doc.get("cap", 20_000)
    threshold = args.threshold if args.threshold is not None else doc.get("threshold", 0.01)
    out = _out_dir(args, doc, "qstchain-spectra")
    try:
        hist = sector_gap_ratio_histogram(profile, int(k_max), pool=pool, cap=int(cap))
    except SectorTooLargeError as exc:
        raise ConfigError(str(exc))
    except ValueError as exc:
        raise ConfigError(str(exc))
    identity = {"profile": profile.to_dict()["couplings"], "n": profile.n_sites,
                "k_max": int(k_max), "pool": pool, "arrival_time": task.arrival_time,
                "threshold": threshold}
    meta = qio.metadata(config=identity, n_ratios=hist.n_ratios,
                        mean_ratio=format(hist.mean_ratio(), ".17g"))
    ref = hist.poisson_reference()
    rows = zip(hist.edges[:-1].tolist(), hist.edges[1:].tolist(), hist.masses.tolist(),
               ref.tolist())
    qio.write_csv(out / "gap_ratio_histogram.csv",
                  ["bin_left", "bin_right", "mass", "poisson_reference_mass"], rows, meta)
    report = kay_report(profile, task, threshold=float(threshold))
    qio.write_json(out / "kay_report.json", {**report.to_dict(), "meta": meta})
    print(f"N={profile.n_sites} sectors 1..{k_max}: {hist.n_ratios} gap ratios, "
          f"mean r={hist.mean_ratio():.4f} (Poisson {2 * np.log(2) - 1:.4f})")
    print(f"Kay-active levels: {int(report.active.sum())}, weight {report.active_weight:.4f}")
    return EXIT_OK


COMMANDS = {"design": cmd_design, "disorder": cmd_disorder, "spectra": cmd_spectra}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, ConvergenceError, FitConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
