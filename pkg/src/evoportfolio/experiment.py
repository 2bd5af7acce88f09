"""Experiment driver: one config in, per-seed run directories out.

Layout under <output root>/<out_dir>:

    config.toml            canonical snapshot of the resolved config
    seed_<s>/metrics.csv   one row per generation (see orchestrator columns)
    seed_<s>/allocation.csv  cumulative rollout counts and shares per learner
    seed_<s>/champion.net  best actor at the end of the run
    seed_<s>/learner_<j>.net  each gradient learner's actor
    seed_<s>/timing.json   wall-clock info (not part of the determinism contract)

The output root is the EVOPORTFOLIO_OUT environment variable when set,
else the current directory.  metrics.csv and allocation.csv are written
with repr() floats, so rerunning the same config and seed reproduces
them byte for byte.  If a seed fails partway, its directory is removed
before the error propagates.
"""

import csv
import json
import math
import os
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import save_config, validate_config
from .evolution import MutationConfig
from .nets import save_params
from .orchestrator import CerlState, metric_columns, run_generation


def output_root():
    return Path(os.environ.get("EVOPORTFOLIO_OUT", "."))


def build_state(cfg, seed, allocator=None, population_enabled=True):
    """Instantiate the training state a config describes, for one seed."""
    mut = MutationConfig(
        mut_prob=cfg.mut_prob, mut_frac=cfg.mut_frac,
        mut_strength=cfg.mut_strength, supermut_prob=cfg.supermut_prob,
        reset_prob=cfg.reset_prob,
    )
    return CerlState(
        cfg.env, list(cfg.gammas), k=cfg.k, b=cfg.b,
        elite_count=cfg.elite_count, hidden=tuple(cfg.hidden), seed=seed,
        buffer_capacity=cfg.buffer_capacity, batch_size=cfg.batch_size,
        alpha=cfg.alpha, omega=cfg.omega, ucb_c=cfg.ucb_c, tau=cfg.tau,
        policy_delay=cfg.policy_delay, actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr, explore_sigma=cfg.explore_sigma,
        smoothing_sigma=cfg.smoothing_sigma, smoothing_clip=cfg.smoothing_clip,
        mutation=mut, tournament_size=cfg.tournament_size,
        crossover_frac=cfg.crossover_frac,
        soft_update_every_iter=cfg.soft_update_every_iter,
        max_episode_steps=cfg.max_episode_steps or None,
        champion_episodes=cfg.champion_episodes, workers=cfg.workers,
        allocator=allocator, population_enabled=population_enabled,
    )


def fraction_threshold(optimum, fraction):
    """Score that counts as reaching `fraction` of the optimum.

    Positive optimum: fraction * optimum.  Negative optimum: optimum /
    fraction, i.e. the same multiplicative closeness from the other side.
    """
    if optimum >= 0:
        return fraction * optimum
    return optimum / fraction


def format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_rows_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row[c]) for c in columns])


def write_allocation_csv(path, state):
    total = sum(ln.count for ln in state.portfolio)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["learner", "gamma", "rollouts", "share"])
        for j, ln in enumerate(state.portfolio):
            share = ln.count / total if total else 0.0
            w.writerow([j, repr(ln.gamma), ln.count, repr(share)])


@dataclass
class SeedResult:
    seed: int
    directory: Path
    rows: list
    final_champion: float
    env_steps: int
    stopped_early: bool
    wall_seconds: float


@dataclass
class RunRecord:
    config: object
    out_dir: Path
    optimum: object  # float or None
    results: list = field(default_factory=list)

    @property
    def seed_dirs(self):
        return [r.directory for r in self.results]


def run_seed(cfg, seed, seed_dir, allocator=None, population_enabled=True,
             echo=False):
    """Train one seed to the step budget (or early-stop target) and write
    its directory.  On any failure the partial directory is deleted."""
    seed_dir = Path(seed_dir)
    seed_dir.mkdir(parents=True, exist_ok=True)
    try:
        state = build_state(cfg, seed, allocator, population_enabled)
        threshold = None
        if cfg.target_fraction > 0:
            optimum = state.eval_optimum()
            if optimum is not None:
                threshold = fraction_threshold(optimum, cfg.target_fraction)

        t0 = time.perf_counter()
        rows = []
        stopped = False
        while state.total_env_steps < cfg.max_env_steps:
            row = run_generation(state)
            rows.append(row)
            if echo:
                print(f"seed {seed} gen {row['gen']:4d} steps {row['steps']:7d} "
                      f"champion {row['champion']:.3f}", flush=True)
            if threshold is not None and row["champion"] >= threshold:
                stopped = True
                break
        wall = time.perf_counter() - t0

        write_rows_csv(seed_dir / "metrics.csv", metric_columns(state.q), rows)
        write_allocation_csv(seed_dir / "allocation.csv", state)
        if state.champion_actor is not None:
            save_params(state.champion_actor, seed_dir / "champion.net")
        for j, ln in enumerate(state.portfolio):
            save_params(ln.actor, seed_dir / f"learner_{j}.net")
        with open(seed_dir / "timing.json", "w", encoding="utf-8") as f:
            json.dump({"seed": seed, "wall_seconds": wall,
                       "generations": len(rows),
                       "env_steps": state.total_env_steps,
                       "stopped_early": stopped}, f, indent=2)

        final = rows[-1]["champion"] if rows else math.nan
        return SeedResult(seed, seed_dir, rows, final,
                          state.total_env_steps, stopped, wall)
    except BaseException:
        shutil.rmtree(seed_dir, ignore_errors=True)
        raise


def run_experiment(cfg, allocator=None, population_enabled=True, echo=False):
    """Run every seed in the config; returns a RunRecord of what happened."""
    validate_config(cfg)
    out = output_root() / cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.toml")

    probe = build_state(cfg, cfg.seeds[0], allocator, population_enabled)
    optimum = probe.eval_optimum()

    record = RunRecord(cfg, out, optimum)
    for seed in cfg.seeds:
        record.results.append(
            run_seed(cfg, seed, out / f"seed_{seed}", allocator,
                     population_enabled, echo)
        )
    return record
