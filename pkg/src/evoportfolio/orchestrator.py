"""The generation loop binding evolution, learners, buffer, and allocator.

Each generation runs six barrier-separated phases:

1. every population genome is evaluated noiselessly (transitions stored);
2. the population reproduces (elites, tournaments, crossover, mutation);
3. each learner runs its allocated noisy rollouts, updating its value
   statistic and rollout count after every episode;
4. gradient phase: ups = env steps taken this generation; per iteration
   each learner does one critic update, an actor update every d-th
   iteration, and (by default, as a config switch) a soft target update
   every iteration;
5. UCB scores are recomputed and the next allocation sampled;
6. every omega generations the learner actors are copied over the weakest
   population genomes (one distinct victim each).

A champion evaluation (the generation's best genome re-run noiselessly on
a fixed set of fresh episodes) is logged after phase 1; its episodes are
excluded from both the replay buffer and the step count.

Rollouts inside phases 1 and 3 stage their transitions locally and merge
into the shared buffer in rollout order, so results are reproducible at
any worker count.  Every consumer of randomness draws from its own named
stream spawned off the master seed; in particular the allocation sampler
has a private stream, so replacing the allocator cannot perturb anything
else.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bandit import allocate, initial_allocation, normalized_values, ucb_scores
from .envs import make_env
from .errors import ConfigError
from .evolution import MutationConfig, Population, next_generation
from .nets import MlpParams, forward
from .replay import ReplayBuffer
from .td3 import (
    Learner,
    actor_update,
    critic_update,
    soft_update,
    update_value_stat,
)


BASE_COLUMNS = [
    "gen", "steps", "gen_steps", "best_fitness", "mean_fitness",
    "min_fitness", "champion", "elites", "mutations", "crossovers",
]
LEARNER_COLUMNS = [
    "gamma", "v", "vn", "y", "ucb", "alloc", "critic_loss", "actor_updates",
]


def metric_columns(q):
    """Column order of the rows produced by run_generation."""
    return BASE_COLUMNS + [f"l{j}_{c}" for j in range(q) for c in LEARNER_COLUMNS]


@dataclass
class RolloutResult:
    """Outcome of one episode."""

    fitness: float
    steps: int
    source: str


class _Stage:
    """Local transition staging so parallel rollouts merge deterministically."""

    def __init__(self):
        self.items = []

    def push(self, *transition):
        self.items.append(transition)


def evaluate(actor, env, buffer, noise_sigma, rng, source="genome"):
    """Run one full episode of the actor on the env.

    Actions are taken in unit space (optionally Gaussian-noised, then
    clipped) and scaled to the env's native bounds.  Every transition is
    pushed to `buffer` (unit-space action, done flag masked on truncation);
    pass buffer=None to discard them.  Returns the undiscounted return and
    step count.
    """
    state = env.reset(rng)
    fitness = 0.0
    steps = 0
    done = False
    while not done:
        a, _ = forward(actor, state[None, :], need_tape=False)
        a = a[0]
        if noise_sigma > 0:
            a = a + rng.normal(0.0, noise_sigma, a.shape)
            a = np.clip(a, -1.0, 1.0)
        nxt, reward, done, truncated = env.step(env.spec.scale_action(a))
        if buffer is not None:
            buffer.push(state, a, reward, nxt, done and not truncated)
        fitness += reward
        steps += 1
        state = nxt
    return RolloutResult(fitness, steps, source)


class CerlState:
    """All mutable state of one training run."""

    def __init__(self, env_name, gammas, k=10, b=10, elite_count=None,
                 hidden=(64, 64), seed=0, buffer_capacity=200_000,
                 batch_size=256, alpha=0.2, omega=5, ucb_c=0.9, tau=5e-3,
                 policy_delay=2, actor_lr=1e-3, critic_lr=1e-3,
                 explore_sigma=0.1, smoothing_sigma=0.2, smoothing_clip=0.5,
                 mutation=None, tournament_size=3, crossover_frac=0.5,
                 soft_update_every_iter=True, max_episode_steps=None,
                 champion_episodes=10, workers=1, allocator=None,
                 population_enabled=True):
        q = len(gammas)
        if q < 1:
            raise ConfigError("portfolio needs at least one learner")
        if population_enabled and q > k:
            raise ConfigError(f"portfolio size {q} exceeds population size {k}")
        if elite_count is None:
            elite_count = max(1, k // 5)

        self.env_name = env_name
        self.max_episode_steps = max_episode_steps
        probe = make_env(env_name, max_episode_steps)
        sdim, adim = probe.spec.state_dim, probe.spec.action_dim

        ss = np.random.SeedSequence(seed)
        (init_ss, evo_ss, alloc_ss, rollout_ss, champ_ss, batch_ss) = ss.spawn(6)
        init_rng = np.random.default_rng(init_ss)
        self.evo_rng = np.random.default_rng(evo_ss)
        self.alloc_rng = np.random.default_rng(alloc_ss)
        self._rollout_ss = rollout_ss
        self.champ_seeds = champ_ss.spawn(champion_episodes)
        batch_seeds = batch_ss.spawn(q)

        self.portfolio = [
            Learner(g, sdim, adim, hidden, init_rng, actor_lr=actor_lr,
                    critic_lr=critic_lr, tau=tau, policy_delay=policy_delay,
                    smoothing_sigma=smoothing_sigma, smoothing_clip=smoothing_clip)
            for g in gammas
        ]
        self.learner_rngs = [np.random.default_rng(s) for s in batch_seeds]

        self.population_enabled = population_enabled
        if population_enabled:
            genomes = [
                MlpParams([sdim, *hidden, adim], squash="tanh", rng=init_rng)
                for _ in range(k)
            ]
            self.population = Population(genomes, elite_count)
        else:
            self.population = None

        self.buffer = ReplayBuffer(buffer_capacity, sdim, adim)
        self.allocation = initial_allocation(q, b)
        self.b = int(b)
        self.batch_size = int(batch_size)
        self.alpha = float(alpha)
        self.omega = int(omega)
        self.ucb_c = float(ucb_c)
        self.explore_sigma = float(explore_sigma)
        self.mutation = mutation or MutationConfig()
        self.tournament_size = int(tournament_size)
        self.crossover_frac = float(crossover_frac)
        self.soft_update_every_iter = bool(soft_update_every_iter)
        self.champion_episodes = int(champion_episodes)
        self.workers = int(workers)
        self.allocator = allocator or allocate

        self.generation = 0
        self.total_env_steps = 0
        self.last_scores = np.full(q, np.nan)
        self.champion_actor = None

    @property
    def q(self):
        return len(self.portfolio)

    def _spawn_rollout_rngs(self, n):
        return [np.random.default_rng(s) for s in self._rollout_ss.spawn(n)]

    def _run_rollouts(self, jobs):
        """Execute rollout jobs (actor, sigma, rng, source), merge staged
        transitions into the shared buffer in job order."""
        def run_one(job):
            actor, sigma, rng, source = job
            stage = _Stage()
            env = make_env(self.env_name, self.max_episode_steps)
            res = evaluate(actor, env, stage, sigma, rng, source)
            return res, stage

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(run_one, jobs))
        else:
            outcomes = [run_one(j) for j in jobs]
        for _, stage in outcomes:
            for t in stage.items:
                self.buffer.push(*t)
        return [res for res, _ in outcomes]

    def champion_eval(self, n_episodes=None):
        """Mean noiseless return of the current best actor on fixed fresh
        episodes; nothing here touches the buffer or the step count."""
        n = n_episodes or self.champion_episodes
        if self.population_enabled:
            best = int(self.population.ranking()[0])
            actors = [self.population.genomes[best]]
        else:
            actors = [ln.actor for ln in self.portfolio]
        best_mean = -np.inf
        best_actor = actors[0]
        for actor in actors:
            total = 0.0
            for i in range(n):
                env = make_env(self.env_name, self.max_episode_steps)
                rng = np.random.default_rng(self.champ_seeds[i % len(self.champ_seeds)])
                total += evaluate(actor, env, None, 0.0, rng, "champion").fitness
            if total / n > best_mean:
                best_mean = total / n
                best_actor = actor
        # Reproduction may later overwrite the winning genome in place, so
        # keep a detached copy for checkpointing.
        self.champion_actor = best_actor.copy()
        return best_mean

    def eval_optimum(self, n_episodes=None):
        """Mean closed-form optimal return over the champion-eval episodes,
        or None when the env has no known optimum."""
        n = n_episodes or self.champion_episodes
        total = 0.0
        for i in range(n):
            env = make_env(self.env_name, self.max_episode_steps)
            rng = np.random.default_rng(self.champ_seeds[i % len(self.champ_seeds)])
            start = env.reset(rng)
            opt = env.optimal_return(start)
            if opt is None:
                return None
            total += opt
        return total / n


def lamarckian_transfer(portfolio, population):
    """Copy each learner's actor over the weakest population genome.

    Victims are the lowest-fitness genomes (by the population's current
    fitness estimates), each used at most once; elite slots are eligible
    only after every non-elite slot is taken.
    """
    if len(portfolio) > population.k:
        raise ConfigError(
            f"portfolio size {len(portfolio)} exceeds population size {population.k}"
        )
    population.require_evaluated()
    elite_slots = set(population.elite_slots)
    order = sorted(
        range(population.k),
        key=lambda i: (i in elite_slots, population.fitness[i], i),
    )
    for learner, victim in zip(portfolio, order):
        population.genomes[victim].copy_from(learner.actor)


def run_generation(state):
    """Advance one full generation; returns the metrics row as a dict."""
    state.generation += 1
    gen_steps = 0

    best = mean = worst = float("nan")
    champion = float("nan")
    evo_stats = {"elites": [], "mutations": 0, "crossovers": 0}

    if state.population_enabled:
        pop = state.population
        rngs = state._spawn_rollout_rngs(pop.k)
        jobs = [
            (pop.genomes[i], 0.0, rngs[i], f"genome{i}") for i in range(pop.k)
        ]
        results = state._run_rollouts(jobs)
        pop.fitness = np.array([r.fitness for r in results])
        gen_steps += sum(r.steps for r in results)
        best = float(pop.fitness.max())
        mean = float(pop.fitness.mean())
        worst = float(pop.fitness.min())
        champion = state.champion_eval()
        evo_stats = next_generation(
            pop, state.mutation, state.evo_rng,
            state.tournament_size, state.crossover_frac,
        )
    else:
        champion = state.champion_eval()

    used_allocation = state.allocation.copy()
    rngs = state._spawn_rollout_rngs(int(used_allocation.sum()))
    jobs = []
    owners = []
    pos = 0
    for i, learner in enumerate(state.portfolio):
        for _ in range(int(used_allocation[i])):
            jobs.append((learner.actor, state.explore_sigma, rngs[pos], f"learner{i}"))
            owners.append(i)
            pos += 1
    results = state._run_rollouts(jobs)
    for i, res in zip(owners, results):
        update_value_stat(state.portfolio[i], res.fitness, state.alpha)
        gen_steps += res.steps

    ups = gen_steps
    losses = np.zeros(state.q)
    n_updates = np.zeros(state.q, dtype=int)
    actor_upds = np.zeros(state.q, dtype=int)
    if state.buffer.size >= state.batch_size:
        for _ in range(ups):
            for j, learner in enumerate(state.portfolio):
                rng = state.learner_rngs[j]
                batch = state.buffer.sample(state.batch_size, rng)
                losses[j] += critic_update(learner, batch, rng)
                n_updates[j] += 1
                stepped_actor = learner.update_counter % learner.policy_delay == 0
                if stepped_actor:
                    actor_update(learner, batch)
                    actor_upds[j] += 1
                if state.soft_update_every_iter or stepped_actor:
                    soft_update(learner)

    values = [ln.value for ln in state.portfolio]
    counts = [ln.count for ln in state.portfolio]
    scores = ucb_scores(values, counts, state.ucb_c)
    state.last_scores = scores
    state.allocation = np.asarray(
        state.allocator(scores, state.b, state.alloc_rng), dtype=np.int64
    )
    if state.allocation.sum() != state.b:
        raise ConfigError("allocator returned counts not summing to the budget")

    if state.population_enabled and state.generation % state.omega == 0:
        lamarckian_transfer(state.portfolio, state.population)

    state.total_env_steps += gen_steps

    row = {
        "gen": state.generation,
        "steps": state.total_env_steps,
        "gen_steps": gen_steps,
        "best_fitness": best,
        "mean_fitness": mean,
        "min_fitness": worst,
        "champion": champion,
        "elites": ";".join(str(i) for i in evo_stats["elites"]),
        "mutations": evo_stats["mutations"],
        "crossovers": evo_stats["crossovers"],
    }
    vn = normalized_values(values)
    for j, learner in enumerate(state.portfolio):
        row[f"l{j}_gamma"] = learner.gamma
        row[f"l{j}_v"] = learner.value
        row[f"l{j}_vn"] = float(vn[j])
        row[f"l{j}_y"] = learner.count
        row[f"l{j}_ucb"] = float(scores[j])
        row[f"l{j}_alloc"] = int(used_allocation[j])
        row[f"l{j}_critic_loss"] = (
            float(losses[j] / n_updates[j]) if n_updates[j] else float("nan")
        )
        row[f"l{j}_actor_updates"] = int(actor_upds[j])
    return row
