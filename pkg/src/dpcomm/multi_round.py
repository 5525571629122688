"""Multiple-round sums: a finite-horizon Markov game over private spending.

Each of N agents starts with a saving x_i and at every round chooses how much
to give out (b_i, from a finite spend grid, never more than it has left) and
a privacy level p_i for the message announcing the spend. Savings evolve
deterministically, x_i <- x_i - b_i, and the per-round reward of agent i is

    r_i = sum_j (1 - p_j) b_j  +  alpha * x_i  +  beta * p_i

a team term (spending is only worth what its announcement reveals) plus
individual terms rewarding remaining savings and privacy. The game is a
Markov potential game with potential

    J = sum_j [ (1 - p_j) b_j + alpha * x_j + beta * p_j ]

since r_i - J = -sum_{j != i} (alpha * x_j + beta * p_j) contains nothing
agent i controls. Policies are tabular in each agent's own component of the
state, (own saving, round); that is what makes the difference exact, because
no other agent's behaviour can react to agent i's choices.

``verify_mpg`` checks the potential property exhaustively over the tabular
policy space, ``best_response_policy`` solves one agent by backward
induction, and ``find_mpg_nash`` runs sequential best-response sweeps, which
on a potential game must drive J monotonically upward until a Nash
equilibrium is reached.

Per-agent ``team_weights`` (default all 1) scale the team term of the named
agent's reward only; any weight != 1 deliberately breaks the potential
structure, which ``verify_mpg`` then detects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EnumerationBudgetError, InvalidActionError, InvalidParameterError

_KEY_DECIMALS = 9
_SPEND_TOL = 1e-9


def _rounded(x: float) -> float:
    return round(x, _KEY_DECIMALS)


@dataclass(frozen=True)
class MrsConfig:
    num_agents: int
    horizon: int
    discount: float
    reward_alpha: float
    reward_beta: float
    initial_savings: tuple
    spend_grid: tuple
    privacy_grid: tuple
    team_weights: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "initial_savings", tuple(float(x) for x in self.initial_savings))
        object.__setattr__(self, "spend_grid", tuple(sorted(float(b) for b in set(self.spend_grid))))
        object.__setattr__(self, "privacy_grid", tuple(sorted(float(p) for p in set(self.privacy_grid))))
        if self.num_agents < 1:
            raise InvalidParameterError("num_agents must be >= 1")
        if self.horizon < 0:
            raise InvalidParameterError("horizon must be >= 0")
        if not (0.0 < self.discount <= 1.0):
            raise InvalidParameterError("discount must be in (0, 1]")
        if len(self.initial_savings) != self.num_agents:
            raise InvalidParameterError("need one initial saving per agent")
        if any(x < 0 for x in self.initial_savings):
            raise InvalidParameterError("initial savings must be nonnegative")
        if not self.spend_grid or not self.privacy_grid:
            raise InvalidParameterError("spend and privacy grids must be non-empty")
        if any(b < 0 for b in self.spend_grid):
            raise InvalidParameterError("spend grid values must be nonnegative")
        if any(not 0.0 <= p <= 1.0 for p in self.privacy_grid):
            raise InvalidParameterError("privacy grid values must lie in [0, 1]")
        weights = self.team_weights
        if weights is None:
            weights = (1.0,) * self.num_agents
        weights = tuple(float(w) for w in weights)
        if len(weights) != self.num_agents:
            raise InvalidParameterError("need one team weight per agent")
        object.__setattr__(self, "team_weights", weights)

    def start_state(self) -> "MrsState":
        return MrsState(self.initial_savings, 0)


@dataclass(frozen=True)
class MrsState:
    savings: tuple
    step: int

    def __post_init__(self):
        cleaned = tuple(0.0 if abs(x) < 1e-12 else float(x) for x in self.savings)
        object.__setattr__(self, "savings", cleaned)
        if any(x < 0 for x in cleaned):
            raise InvalidParameterError(f"savings must be nonnegative, got {cleaned}")
        if self.step < 0:
            raise InvalidParameterError("step must be nonnegative")


@dataclass(frozen=True)
class MrsAction:
    spend: float
    privacy: float

    def __post_init__(self):
        if not 0.0 <= self.privacy <= 1.0:
            raise InvalidParameterError(f"privacy must be in [0,1], got {self.privacy}")
        if self.spend < 0:
            raise InvalidParameterError(f"spend must be nonnegative, got {self.spend}")


@dataclass
class TabularPolicy:
    """One agent's deterministic policy, keyed by (own saving, round)."""

    agent: int
    actions: dict = field(default_factory=dict)

    def action_at(self, saving: float, step: int) -> MrsAction:
        key = (_rounded(saving), step)
        try:
            return self.actions[key]
        except KeyError:
            raise InvalidActionError(
                f"policy of agent {self.agent} has no action for saving "
                f"{saving:.6g} at round {step}"
            ) from None


def valid_actions(cfg: MrsConfig, saving: float) -> list:
    """Actions available at a saving level: spends that do not overdraw,
    in ascending (spend, privacy) order."""
    return [
        MrsAction(b, p)
        for b in cfg.spend_grid
        if b <= saving + _SPEND_TOL
        for p in cfg.privacy_grid
    ]


def transition(state: MrsState, actions: Sequence[MrsAction]) -> MrsState:
    """Deterministic update: each saving drops by the agent's spend."""
    if len(actions) != len(state.savings):
        raise InvalidParameterError("need one action per agent")
    for x, a in zip(state.savings, actions):
        if a.spend > x + _SPEND_TOL:
            raise InvalidActionError(f"spend {a.spend:.6g} exceeds saving {x:.6g}")
    return MrsState(tuple(x - a.spend for x, a in zip(state.savings, actions)), state.step + 1)


def step_reward(state: MrsState, actions: Sequence[MrsAction], agent: int, cfg: MrsConfig) -> float:
    """Per-round reward of one agent (team term plus own saving/privacy)."""
    team = math.fsum((1.0 - a.privacy) * a.spend for a in actions)
    return math.fsum((
        cfg.team_weights[agent] * team,
        cfg.reward_alpha * state.savings[agent],
        cfg.reward_beta * actions[agent].privacy,
    ))


def potential(state: MrsState, actions: Sequence[MrsAction], cfg: MrsConfig) -> float:
    """Potential J: the team term plus everyone's saving and privacy terms."""
    terms = [(1.0 - a.privacy) * a.spend for a in actions]
    terms += [cfg.reward_alpha * x for x in state.savings]
    terms += [cfg.reward_beta * a.privacy for a in actions]
    return math.fsum(terms)


def theta(state: MrsState, actions: Sequence[MrsAction], agent: int, cfg: MrsConfig) -> float:
    """The non-common reward part, r_i - J = -sum_{j != i}(alpha x_j + beta p_j).

    Contains no term agent i controls, so it is invariant to the agent's own
    action and saving. (Stated for unit team weights.)
    """
    return -math.fsum(
        cfg.reward_alpha * x + cfg.reward_beta * a.privacy
        for j, (x, a) in enumerate(zip(state.savings, actions))
        if j != agent
    )


def _profile_actions(policies: Sequence[TabularPolicy], state: MrsState) -> list:
    return [
        policies[j].action_at(state.savings[j], state.step)
        for j in range(len(state.savings))
    ]


def rollout(policies: Sequence[TabularPolicy], cfg: MrsConfig, start: MrsState):
    """Deterministic rollout; returns (per-agent values, potential value)."""
    n = len(start.savings)
    reward_terms = [[] for _ in range(n)]
    potential_terms = []
    state = start
    for t in range(start.step, cfg.horizon):
        actions = _profile_actions(policies, state)
        gamma_t = cfg.discount ** (t - start.step)
        for i in range(n):
            reward_terms[i].append(gamma_t * step_reward(state, actions, i, cfg))
        potential_terms.append(gamma_t * potential(state, actions, cfg))
        state = transition(state, actions)
    return tuple(math.fsum(terms) for terms in reward_terms), math.fsum(potential_terms)


def policy_value(policies: Sequence[TabularPolicy], agent: int, cfg: MrsConfig,
                 start: MrsState) -> float:
    """Discounted return of one agent along the joint deterministic rollout."""
    return rollout(policies, cfg, start)[0][agent]


def potential_value(policies: Sequence[TabularPolicy], cfg: MrsConfig, start: MrsState) -> float:
    """Discounted sum of the potential along the joint rollout."""
    return rollout(policies, cfg, start)[1]


def reachable_savings(cfg: MrsConfig, agent: int, start: MrsState) -> list:
    """Per round, the agent's savings reachable under any valid spend path."""
    if cfg.horizon <= start.step:
        return []
    levels = [{_rounded(start.savings[agent])}]
    for _ in range(start.step, cfg.horizon - 1):
        nxt = set()
        for x in levels[-1]:
            for b in cfg.spend_grid:
                if b <= x + _SPEND_TOL:
                    nxt.add(_rounded(x - b))
        levels.append(nxt)
    return [sorted(s) for s in levels]


def enumerate_policies(cfg: MrsConfig, agent: int, start: MrsState) -> list:
    """All tabular policies of one agent over its reachable decision points."""
    keys = []
    choices = []
    levels = reachable_savings(cfg, agent, start)
    for offset, savings in enumerate(levels):
        t = start.step + offset
        for s in savings:
            keys.append((s, t))
            choices.append(valid_actions(cfg, s))
    policies = []
    for combo in itertools.product(*choices):
        policies.append(TabularPolicy(agent, dict(zip(keys, combo))))
    return policies


def policy_space_size(cfg: MrsConfig, start: MrsState) -> int:
    """Number of joint tabular policy profiles of the instance."""
    total = 1
    for agent in range(cfg.num_agents):
        per_agent = 1
        for offset, savings in enumerate(reachable_savings(cfg, agent, start)):
            for s in savings:
                per_agent *= len(valid_actions(cfg, s))
        total *= per_agent
    return total


def verify_mpg(cfg: MrsConfig, start: MrsState, tol: float = 1e-12,
               budget: int = 10**6):
    """Exhaustively test the potential property on the tabular policy space.

    For every agent i and every fixed opponent profile, the gap V_i - Phi
    must be constant across agent i's policies; the maximum spread observed
    is returned as the violation. Raises EnumerationBudgetError when the
    joint policy space exceeds ``budget`` profiles.

    Returns (is_mpg, max_violation).
    """
    total = policy_space_size(cfg, start)
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} joint policy profiles exceed the budget of {budget}; "
            "use a smaller instance"
        )
    policy_lists = [enumerate_policies(cfg, agent, start) for agent in range(cfg.num_agents)]
    sizes = [len(pl) for pl in policy_lists]
    values = {}
    for combo in itertools.product(*(range(s) for s in sizes)):
        profile = [policy_lists[j][combo[j]] for j in range(cfg.num_agents)]
        values[combo] = rollout(profile, cfg, start)
    max_violation = 0.0
    for i in range(cfg.num_agents):
        gaps = {}
        for combo, (vals, phi) in values.items():
            others = combo[:i] + combo[i + 1:]
            gaps.setdefault(others, []).append(vals[i] - phi)
        for gap_list in gaps.values():
            max_violation = max(max_violation, max(gap_list) - min(gap_list))
    return max_violation <= tol, max_violation


def best_response_policy(policies: Sequence[TabularPolicy], agent: int, cfg: MrsConfig,
                         start: MrsState) -> TabularPolicy:
    """Exact best response by backward induction.

    Opponents' own-state policies make their trajectories autonomous, so the
    agent faces a deterministic single-agent problem with known per-round
    team contributions from the others. Ties break toward the smallest
    (spend, privacy) action.
    """
    team_others = []
    others = [j for j in range(cfg.num_agents) if j != agent]
    savings = {j: start.savings[j] for j in others}
    for t in range(start.step, cfg.horizon):
        contributions = []
        for j in others:
            a = policies[j].action_at(savings[j], t)
            if a.spend > savings[j] + _SPEND_TOL:
                raise InvalidActionError(
                    f"policy of agent {j} overspends at round {t}"
                )
            contributions.append((1.0 - a.privacy) * a.spend)
            savings[j] -= a.spend
        team_others.append(math.fsum(contributions))

    levels = reachable_savings(cfg, agent, start)
    best_actions = {}
    value_next: dict = {}  # optimal values one round later; empty past the horizon
    for offset in reversed(range(len(levels))):
        t = start.step + offset
        level_value = {}
        for s in levels[offset]:
            best_q = -math.inf
            best_a = None
            for a in valid_actions(cfg, s):
                own = (1.0 - a.privacy) * a.spend
                q = math.fsum((
                    cfg.team_weights[agent] * (own + team_others[offset]),
                    cfg.reward_alpha * s,
                    cfg.reward_beta * a.privacy,
                ))
                if offset + 1 < len(levels):
                    q += cfg.discount * value_next[_rounded(s - a.spend)]
                if q > best_q:
                    best_q = q
                    best_a = a
            level_value[_rounded(s)] = best_q
            best_actions[(_rounded(s), t)] = best_a
        value_next = level_value
    return TabularPolicy(agent, best_actions)


def simulate_with_channel(policies: Sequence[TabularPolicy], cfg: MrsConfig,
                          start: MrsState, rng_seed: int) -> list:
    """Roll the profile out while privatizing each spend announcement.

    Purely a realism hook: at privacy level p the announced spend is replaced
    by a uniform draw from the spend grid with probability p (randomized
    response over the grid). Rewards and transitions use the true spends, so
    values are identical to ``rollout``'s; only the message column differs.
    Returns one record per round: (state, actions, announcements, rewards).
    """
    from .rng import substream

    trajectory = []
    state = start
    n = len(start.savings)
    for t in range(start.step, cfg.horizon):
        actions = _profile_actions(policies, state)
        announced = []
        for i, a in enumerate(actions):
            rng = substream(rng_seed, i, t)
            if rng.random() < a.privacy:
                announced.append(float(rng.choice(cfg.spend_grid)))
            else:
                announced.append(a.spend)
        rewards = tuple(step_reward(state, actions, i, cfg) for i in range(n))
        trajectory.append((state, tuple(actions), tuple(announced), rewards))
        state = transition(state, actions)
    return trajectory


@dataclass(frozen=True)
class MpgNashResult:
    policies: tuple
    converged: bool
    sweeps: int
    potential_trace: tuple  # potential value after the initial profile and each best response


def lex_min_profile(cfg: MrsConfig, start: MrsState) -> list:
    """Deterministic starting profile: smallest valid action everywhere."""
    profile = []
    for agent in range(cfg.num_agents):
        actions = {}
        for offset, savings in enumerate(reachable_savings(cfg, agent, start)):
            t = start.step + offset
            for s in savings:
                actions[(s, t)] = valid_actions(cfg, s)[0]
        profile.append(TabularPolicy(agent, actions))
    return profile


def find_mpg_nash(cfg: MrsConfig, start: MrsState, max_sweeps: int = 20) -> MpgNashResult:
    """Sequential best-response sweeps from the lexicographic-min profile.

    Converged when a full sweep changes no policy. On the (unweighted) game
    the potential trace is non-decreasing after every single best response.
    """
    profile = lex_min_profile(cfg, start)
    trace = [potential_value(profile, cfg, start)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for agent in range(cfg.num_agents):
            new = best_response_policy(profile, agent, cfg, start)
            if new.actions != profile[agent].actions:
                changed = True
                profile[agent] = new
            trace.append(potential_value(profile, cfg, start))
        if not changed:
            converged = True
            break
    return MpgNashResult(tuple(profile), converged, sweeps, tuple(trace))
