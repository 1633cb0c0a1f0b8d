"""Agent-based evolutionary dynamics with an optional payoff controller.

Protocol per round (all payoffs evaluated once, at the start of the round):

* every agent revises with probability ``prob_revision``;
* a revising agent mutates with probability ``prob_mutation`` to a uniformly
  drawn strategy;
* otherwise it samples one other agent uniformly and copies that agent's
  strategy with probability ``max(0, U_other - U_self) / delta``, clipped
  to 1, where ``delta`` is the payoff range of the game.

Payoffs come from complete matching (expected payoff against the whole
population) plus the controller's per-agent reward and tax. In the large
population limit this is the controlled replicator field slowed down by
``prob_revision * (1 - prob_mutation) / delta`` per round, see
:func:`time_scale`.

Randomness is numpy's PCG64 generator (``numpy.random.default_rng``), so a
seed reproduces a run bit for bit on any platform.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, fields

import numpy as np

from .dynamics import Trajectory, per_agent_adjustment
from .game import _matrix, payoffs

RNG_NAME = "numpy.random.PCG64"


class ConfigError(ValueError):
    pass


@dataclass
class ABMConfig:
    n_agents: int = 1000
    initial_counts: tuple[int, ...] = (200, 200, 200, 200, 200)
    prob_revision: float = 0.2
    prob_mutation: float = 0.05
    rounds: int = 6000
    seed: int = 0
    controller: object | None = None
    random_initial: bool = False

    def __post_init__(self):
        self.initial_counts = tuple(int(c) for c in self.initial_counts)
        for name in ("prob_revision", "prob_mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if min(self.initial_counts) < 0 or sum(self.initial_counts) != self.n_agents:
            raise ConfigError(f"initial counts {self.initial_counts} must be nonnegative "
                              f"and sum to n_agents={self.n_agents}")
        if self.rounds < 0:
            raise ConfigError("rounds must be nonnegative")

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["initial_counts"] = list(self.initial_counts)
        d["controller"] = None if self.controller is None else self.controller.to_json()
        return d


class Population:
    """Strategy index (0-based) of every agent."""

    def __init__(self, strategies, n_strategies):
        self.strategies = np.asarray(strategies, dtype=np.int64)
        self.n_strategies = n_strategies

    def __len__(self):
        return self.strategies.shape[0]

    def counts(self) -> np.ndarray:
        return np.bincount(self.strategies, minlength=self.n_strategies)

    @property
    def state(self) -> np.ndarray:
        return self.counts() / len(self)


def init_population(cfg: ABMConfig, rng=None) -> Population:
    n = len(cfg.initial_counts)
    if cfg.random_initial:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        counts = rng.multinomial(cfg.n_agents, np.full(n, 1.0 / n))
    else:
        counts = cfg.initial_counts
    return Population(np.repeat(np.arange(n), counts), n)


def controlled_payoffs(A, pop, c=None) -> np.ndarray:
    """Per-strategy payoff an individual agent experiences."""
    x = pop.state if isinstance(pop, Population) else np.asarray(pop, dtype=float)
    u = payoffs(A, x)
    if c is None:
        return u
    return u + per_agent_adjustment(c, x)


def payoff_range(A) -> float:
    a = _matrix(A)
    span = float(a.max() - a.min())
    return span if span > 0 else 1.0


def time_scale(cfg: ABMConfig, A) -> float:
    """Replicator time elapsed per round in the large-population limit."""
    return cfg.prob_revision * (1.0 - cfg.prob_mutation) / payoff_range(A)


def revision_step(pop, A, c, rng, prob_revision=0.2, prob_mutation=0.05, delta=None):
    """One synchronous round of revisions; returns a new Population."""
    s = pop.strategies
    n_agents = s.shape[0]
    delta = payoff_range(A) if delta is None else delta
    u = controlled_payoffs(A, pop, c)
    revise = rng.random(n_agents) < prob_revision
    mutate = rng.random(n_agents) < prob_mutation
    other = rng.integers(0, n_agents - 1, n_agents)
    other += other >= np.arange(n_agents)
    p_adopt = np.clip((u[s[other]] - u[s]) / delta, 0.0, 1.0)
    adopt = rng.random(n_agents) < p_adopt
    fresh = rng.integers(0, pop.n_strategies, n_agents)
    new = s.copy()
    imitate = revise & ~mutate & adopt
    new[imitate] = s[other[imitate]]
    mutants = revise & mutate
    new[mutants] = fresh[mutants]
    return Population(new, pop.n_strategies)


def run_abm(A, cfg: ABMConfig) -> Trajectory:
    """Simulate ``cfg.rounds`` rounds; the trajectory has one row per round
    including the initial state, with time measured in rounds."""
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, rng)
    delta = payoff_range(A)
    states = np.empty((cfg.rounds + 1, pop.n_strategies))
    states[0] = pop.state
    started = time.perf_counter()
    for r in range(1, cfg.rounds + 1):
        pop = revision_step(pop, A, cfg.controller, rng, cfg.prob_revision,
                            cfg.prob_mutation, delta)
        states[r] = pop.state
    meta = {
        "engine": "abm",
        "seed": cfg.seed,
        "rng": RNG_NAME,
        "b": None if cfg.controller is None else cfg.controller.b,
        "payoff_range": delta,
        "wall_clock_s": time.perf_counter() - started,
    }
    return Trajectory(np.arange(cfg.rounds + 1, dtype=float), states, meta)


def write_manifest(path, cfg: ABMConfig, traj: Trajectory, extra=None) -> None:
    manifest = {
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "rng": RNG_NAME,
        "controller": None if cfg.controller is None else cfg.controller.to_json(),
        "wall_clock_s": traj.metadata.get("wall_clock_s"),
    }
    manifest.update(extra or {})
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
