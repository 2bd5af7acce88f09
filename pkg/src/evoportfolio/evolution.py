"""Neuroevolution over actor genomes.

A population of k actor networks is ranked by undiscounted episode return.
The top e pass to the next generation untouched (elites); the remaining
slots are filled half by tournament-selected copies and half by
single-point crossover children of (random elite x random survivor), each
then mutated with probability mut_prob.

The crossover cut operates on the flat genome in the network engine's
documented layout: layer by layer, weight matrix row-major, bias, then
norm gain and offset on hidden layers.

Mutation follows a three-branch scheme per parameter block: a rare large
multiplicative kick (supermutation), a rare hard reset to N(0,1), and an
ordinary small multiplicative perturbation otherwise.  The branch draws
are nested: the reset test only happens after the supermutation test
fails, giving joint probabilities (p_super, (1-p_super)*p_reset, rest).
"""

import numpy as np

from .errors import ShapeError, StateError


class MutationConfig:
    """Knobs of the mutation operator (defaults per the standard recipe)."""

    def __init__(self, mut_prob=0.9, mut_frac=0.1, mut_strength=0.1,
                 supermut_prob=0.05, reset_prob=0.05):
        for name, p in (("mut_prob", mut_prob), ("mut_frac", mut_frac),
                        ("supermut_prob", supermut_prob), ("reset_prob", reset_prob)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {p}")
        if mut_strength < 0:
            raise ValueError(f"mut_strength must be >= 0, got {mut_strength}")
        self.mut_prob = mut_prob
        self.mut_frac = mut_frac
        self.mut_strength = mut_strength
        self.supermut_prob = supermut_prob
        self.reset_prob = reset_prob


class Population:
    """k genomes with their last-known fitness.

    Fitness is NaN until evaluated; operators that need a ranking refuse
    to run on NaN entries.  After reproduction, offspring carry an
    inherited fitness estimate (parent value, or parent mean for crossover
    children) so consumers that need a ranking between evaluations (e.g.
    picking replacement victims) have one; it is overwritten by the next
    true evaluation.
    """

    def __init__(self, genomes, elite_count):
        if len(genomes) < 2:
            raise ValueError(f"population needs >= 2 genomes, got {len(genomes)}")
        if not 1 <= elite_count < len(genomes):
            raise ValueError(
                f"elite count must be in [1, k), got e={elite_count} k={len(genomes)}"
            )
        self.genomes = list(genomes)
        self.fitness = np.full(len(genomes), np.nan)
        self.elite_count = int(elite_count)
        self.generation = 0
        # slots currently holding elite copies (set by next_generation)
        self.elite_slots = []

    @property
    def k(self):
        return len(self.genomes)

    def require_evaluated(self):
        if np.isnan(self.fitness).any():
            raise StateError("population fitness not fully evaluated")

    def ranking(self):
        """Indices best-first; ties broken toward the lower index."""
        self.require_evaluated()
        return np.argsort(-self.fitness, kind="stable")


def tournament_select(pop, n, tournament_size, rng):
    """n independent picks; each is the best of tournament_size uniform
    draws (with replacement) from the population."""
    if tournament_size < 1:
        raise ValueError(f"tournament size must be >= 1, got {tournament_size}")
    pop.require_evaluated()
    entrants = rng.integers(0, pop.k, size=(int(n), int(tournament_size)))
    fits = pop.fitness[entrants]
    # ties go to the earliest-drawn entrant (argmax returns the first max)
    winners = entrants[np.arange(len(entrants)), fits.argmax(axis=1)]
    return winners


def rank_and_select(pop, rng, tournament_size=3):
    """Elites (top-e, ties to the lower index) plus k-e tournament picks."""
    order = pop.ranking()
    elites = list(order[: pop.elite_count])
    survivors = list(tournament_select(pop, pop.k - pop.elite_count, tournament_size, rng))
    return elites, survivors


def crossover(parent_a, parent_b, rng, cut=None):
    """Single-point crossover on the flat genomes.

    The child takes parent_a's genes before the cut and parent_b's from
    the cut on; cut is uniform over 0..n inclusive, so either pure parent
    is reachable at the boundaries.
    """
    if not parent_a.same_architecture(parent_b):
        raise ShapeError("crossover between different architectures")
    n = parent_a.n_params
    if cut is None:
        cut = int(rng.integers(0, n + 1))
    if not 0 <= cut <= n:
        raise ValueError(f"cut must be in [0, {n}], got {cut}")
    child = parent_a.copy()
    child.flat[cut:] = parent_b.flat[cut:]
    child.version += 1
    return child


def mutate(genome, cfg, rng):
    """Perturb a genome in place per the three-branch scheme.

    Every parameter block (weight matrix, bias, norm gain/offset) receives
    floor(mut_frac * block_size) perturbation events at indices drawn with
    replacement.  Each event: with prob supermut_prob multiply by
    N(0, 100*mut_strength); else with prob reset_prob overwrite with
    N(0,1); else multiply by N(0, mut_strength).
    """
    for W, b, g, o in genome.layers:
        for block in (W, b, g, o):
            if block is None:
                continue
            flat = block.reshape(-1)
            n_events = int(np.floor(cfg.mut_frac * flat.size))
            for _ in range(n_events):
                idx = int(rng.integers(0, flat.size))
                if rng.random() < cfg.supermut_prob:
                    flat[idx] *= rng.normal(0.0, 100.0 * cfg.mut_strength)
                elif rng.random() < cfg.reset_prob:
                    flat[idx] = rng.normal(0.0, 1.0)
                else:
                    flat[idx] *= rng.normal(0.0, cfg.mut_strength)
    genome.version += 1


def next_generation(pop, cfg, rng, tournament_size=3, crossover_frac=0.5):
    """Advance the population in place.

    Slot layout of the new generation: elites first (bit-identical
    pass-through), then tournament-selected copies, then crossover
    children of (random elite x random tournament survivor).  Non-elites
    are mutated with probability mut_prob.  crossover_frac controls the
    share of non-elite slots filled by crossover (0 disables it).
    """
    elites, survivors = rank_and_select(pop, rng, tournament_size)
    k, e = pop.k, pop.elite_count
    n_cross = int(round((k - e) * crossover_frac))
    n_copy = (k - e) - n_cross

    new_genomes = [pop.genomes[i] for i in elites]
    new_fitness = [pop.fitness[i] for i in elites]

    for slot in range(n_copy):
        src = survivors[slot % len(survivors)]
        new_genomes.append(pop.genomes[src].copy())
        new_fitness.append(pop.fitness[src])
    for _ in range(n_cross):
        idx_a = elites[rng.integers(0, len(elites))]
        idx_b = survivors[rng.integers(0, len(survivors))]
        child = crossover(pop.genomes[idx_a], pop.genomes[idx_b], rng)
        new_genomes.append(child)
        new_fitness.append(0.5 * (pop.fitness[idx_a] + pop.fitness[idx_b]))

    mutation_events = 0
    for slot in range(e, k):
        if rng.random() < cfg.mut_prob:
            mutate(new_genomes[slot], cfg, rng)
            mutation_events += 1

    pop.genomes = new_genomes
    pop.fitness = np.array(new_fitness)
    pop.elite_slots = list(range(e))
    pop.generation += 1
    return {"elites": elites, "mutations": mutation_events, "crossovers": n_cross}
