"""Agent policies: what each region proposes, accepts, defects on, and executes.

Policies stand in for trained negotiators. Four kinds are provided:

* fixed   - pledges and executes one level, always honest, floor tariffs.
* random  - uniform over the legal action set; the fuzzing driver.
* greedy  - one-step lookahead best response holding opponents at their
            last observed actions; the strategic baseline.
* evolved - a four-parameter reactive policy whose parameters a seeded
            hill climber tunes on mean episode reward.

Every policy is a deterministic function of (spec, observation, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import RegionFlows, RegionState
from .protocol import Proposal, RoundOutcome
from .trade import LEVEL_MAX, check_level

CONSUMPTION_FLOOR = 1e-9


@dataclass(frozen=True)
class Observation:
    """What one region sees at the start of a step. No private opponent state."""

    region: int
    state: RegionState
    flows: RegionFlows | None      # previous step's own flows, None at step 0
    t_at: float
    last_round: RoundOutcome | None
    punished: bool
    step: int


def reward(consumption: float, labor: float) -> float:
    """Log utility of per-capita consumption, weighted by population.

    Consumption is floored at a tiny epsilon so prohibitive-tariff corner
    cases stay finite.
    """
    c = max(consumption, CONSUMPTION_FLOOR)
    return labor * math.log(c / labor)


@dataclass(frozen=True)
class PolicySpec:
    """Serializable description of one region's policy."""

    kind: str = "greedy"
    level: int = 9                 # fixed: pledged and executed level
    seed: int = 0                  # random: stream offset
    propose_level: int = 9         # evolved parameters
    accept_threshold: int = 9
    defect_propensity: float = 0.0
    tariff_aggressiveness: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "random", "greedy", "evolved"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        check_level(self.level, "fixed level")
        check_level(self.propose_level, "propose_level")
        check_level(self.accept_threshold, "accept_threshold")
        if not 0.0 <= self.defect_propensity <= 1.0:
            raise ValueError("defect_propensity must lie in [0, 1]")
        if not 0.0 <= self.tariff_aggressiveness <= 1.0:
            raise ValueError("tariff_aggressiveness must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "seed": self.seed,
            "propose_level": self.propose_level,
            "accept_threshold": self.accept_threshold,
            "defect_propensity": self.defect_propensity,
            "tariff_aggressiveness": self.tariff_aggressiveness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicySpec":
        return cls(**data)


class Policy:
    """Stage hooks called by the negotiation round and the engine."""

    def begin_round(self, obs: Observation, preview) -> None:
        pass

    def propose(self, obs: Observation) -> int:
        raise NotImplementedError

    def vote(self, obs: Observation, proposals: tuple[Proposal, ...]) -> list[bool]:
        raise NotImplementedError

    def decide_defect(self, obs: Observation, commitment: Commitment) -> bool:
        return False

    def choose_tariffs(self, obs, low: np.ndarray, high: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def choose_mitigation(self, obs: Observation, floor: int, forced_zero: bool) -> int:
        raise NotImplementedError


class FixedPolicy(Policy):
    """Pledge one level, accept anything at or below it, never defect."""

    def __init__(self, level: int):
        self.level = check_level(level)

    def propose(self, obs):
        return self.level

    def vote(self, obs, proposals):
        return [p.level <= self.level for p in proposals]

    def choose_tariffs(self, obs, low, high):
        return low.copy()

    def choose_mitigation(self, obs, floor, forced_zero):
        if forced_zero:
            return 0
        return max(floor, self.level)


class RandomPolicy(Policy):
    """Uniform over the legal action set. Used to fuzz the protocol."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def propose(self, obs):
        return int(self.rng.integers(0, LEVEL_MAX + 1))

    def vote(self, obs, proposals):
        return self.rng.random(len(proposals)) < 0.5

    def decide_defect(self, obs, commitment):
        return bool(self.rng.random() < 0.5)

    def choose_tariffs(self, obs, low, high):
        return self.rng.integers(low, high + 1)

    def choose_mitigation(self, obs, floor, forced_zero):
        if forced_zero:
            return 0
        return int(self.rng.integers(floor, LEVEL_MAX + 1))


@dataclass(frozen=True)
class GreedyPlan:
    commit: int
    defect: bool
    mode: str            # "floor" or "ceiling"
    mitigation: int      # executed level the plan implies


class GreedyPolicy(Policy):
    """One-step best response through the engine's forward preview.

    Candidates enumerate every commitment level, the defect bit (when
    available) and tariffs at either bound. Reward ties break toward the
    lowest executed mitigation level, then the lowest tariff stance, then
    the lowest pledge, then honesty.
    """

    def __init__(self):
        self.plan: GreedyPlan | None = None

    def begin_round(self, obs, preview):
        best_key = None
        best = None
        for commit in range(LEVEL_MAX + 1):
            defect_options = (False, True) if preview.allows_defection else (False,)
            for defect in defect_options:
                if defect and commit == 0:
                    continue  # defecting on an empty pledge is just level 0
                mitigation = 0 if defect else commit
                for mode_idx, mode in enumerate(("floor", "ceiling")):
                    value = preview.evaluate(obs.region, commit, defect, mode)
                    key = (-value, mitigation, mode_idx, commit, defect)
                    if best_key is None or key < best_key:
                        best_key = key
                        best = GreedyPlan(commit, defect, mode, mitigation)
        self.plan = best

    def propose(self, obs):
        return self.plan.commit

    def vote(self, obs, proposals):
        return [p.level <= self.plan.commit for p in proposals]

    def decide_defect(self, obs, commitment):
        return self.plan.defect

    def choose_tariffs(self, obs, low, high):
        return low.copy() if self.plan.mode == "floor" else high.copy()

    def choose_mitigation(self, obs, floor, forced_zero):
        if forced_zero or self.plan.defect:
            return 0
        return max(floor, self.plan.mitigation)


class ParametricPolicy(Policy):
    """Reactive policy driven by the four evolvable parameters."""

    def __init__(self, spec: PolicySpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng

    def propose(self, obs):
        return self.spec.propose_level

    def vote(self, obs, proposals):
        return [p.level <= self.spec.accept_threshold for p in proposals]

    def decide_defect(self, obs, commitment):
        return bool(self.rng.random() < self.spec.defect_propensity)

    def choose_tariffs(self, obs, low, high):
        span = (high - low).astype(float)
        return low + np.rint(self.spec.tariff_aggressiveness * span).astype(np.int64)

    def choose_mitigation(self, obs, floor, forced_zero):
        if forced_zero:
            return 0
        return floor


def build_policy(spec: PolicySpec, rng: np.random.Generator) -> Policy:
    """Instantiate a policy from its spec with a per-episode random stream."""
    if spec.kind == "fixed":
        return FixedPolicy(spec.level)
    if spec.kind == "random":
        return RandomPolicy(rng)
    if spec.kind == "greedy":
        return GreedyPolicy()
    return ParametricPolicy(spec, rng)


def _mutate_spec(spec: PolicySpec, rng: np.random.Generator) -> PolicySpec:
    field = rng.integers(0, 4)
    if field == 0:
        level = int(np.clip(spec.propose_level + rng.integers(-2, 3), 0, LEVEL_MAX))
        return replace(spec, propose_level=level)
    if field == 1:
        level = int(np.clip(spec.accept_threshold + rng.integers(-2, 3), 0, LEVEL_MAX))
        return replace(spec, accept_threshold=level)
    if field == 2:
        p = float(np.clip(spec.defect_propensity + rng.normal(0.0, 0.2), 0.0, 1.0))
        return replace(spec, defect_propensity=p)
    p = float(np.clip(spec.tariff_aggressiveness + rng.normal(0.0, 0.2), 0.0, 1.0))
    return replace(spec, tariff_aggressiveness=p)


def _random_spec(rng: np.random.Generator) -> PolicySpec:
    return PolicySpec(
        kind="evolved",
        propose_level=int(rng.integers(0, LEVEL_MAX + 1)),
        accept_threshold=int(rng.integers(0, LEVEL_MAX + 1)),
        defect_propensity=float(rng.random()),
        tariff_aggressiveness=float(rng.random()),
    )


def evolve_policies(
    config,
    population_size: int,
    generations: int,
    seed: int,
    eval_runs: int = 2,
) -> tuple[PolicySpec, ...]:
    """Hill-climb parametric policy profiles on mean per-region episode reward.

    Seeds an initial population of joint profiles, keeps the best by total
    reward, then lets each region in turn try one mutation per generation,
    adopted when its own mean reward improves. Fully reproducible.
    """
    if population_size < 1 or generations < 0:
        raise ValueError("population_size must be >= 1 and generations >= 0")
    from .engine import mean_region_rewards  # runtime import avoids a cycle

    n = config.n_regions
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def fitness(profile: tuple[PolicySpec, ...]) -> np.ndarray:
        cfg = replace(config, policies=profile)
        return mean_region_rewards(cfg, eval_runs)

    population = [
        tuple(_random_spec(rng) for _ in range(n)) for _ in range(population_size)
    ]
    scores = [fitness(profile) for profile in population]
    best_idx = int(np.argmax([s.sum() for s in scores]))
    current, current_scores = population[best_idx], scores[best_idx]

    for _ in range(generations):
        for region in range(n):
            candidate = list(current)
            candidate[region] = _mutate_spec(current[region], rng)
            candidate = tuple(candidate)
            candidate_scores = fitness(candidate)
            if candidate_scores[region] > current_scores[region]:
                current, current_scores = candidate, candidate_scores
    return current
