import pytest

from dpcomm import (
    EnumerationBudgetError,
    InvalidActionError,
    InvalidParameterError,
    MrsAction,
    MrsConfig,
    MrsState,
    TabularPolicy,
    best_response_policy,
    find_mpg_nash,
    policy_value,
    potential,
    potential_value,
    step_reward,
    theta,
    transition,
    verify_mpg,
)
from dpcomm.multi_round import (
    enumerate_policies,
    lex_min_profile,
    policy_space_size,
    simulate_with_channel,
    valid_actions,
)


def small_config(**overrides):
    kwargs = dict(
        num_agents=2,
        horizon=2,
        discount=1.0,
        reward_alpha=0.1,
        reward_beta=0.2,
        initial_savings=(2.0, 2.0),
        spend_grid=(0.0, 1.0),
        privacy_grid=(0.0, 0.5),
    )
    kwargs.update(overrides)
    return MrsConfig(**kwargs)


STATE = MrsState((2.0, 2.0), 0)
ACTIONS = [MrsAction(1.0, 0.5), MrsAction(0.0, 0.0)]


class TestTransition:
    def test_spend_reduces_savings(self):
        nxt = transition(STATE, ACTIONS)
        assert nxt.savings == (1.0, 2.0)
        assert nxt.step == 1

    def test_zero_spend_keeps_savings(self):
        nxt = transition(STATE, [MrsAction(0.0, 0.5), MrsAction(0.0, 0.0)])
        assert nxt.savings == STATE.savings
        assert nxt.step == 1

    def test_overspend_rejected(self):
        with pytest.raises(InvalidActionError):
            transition(MrsState((1.0,), 0), [MrsAction(2.0, 0.0)])


class TestRewardAndPotential:
    def test_step_reward_example(self):
        cfg = small_config()
        assert step_reward(STATE, ACTIONS, 0, cfg) == pytest.approx(0.8, abs=1e-12)
        assert step_reward(STATE, ACTIONS, 1, cfg) == pytest.approx(0.7, abs=1e-12)

    def test_zero_actions_leave_only_savings_term(self):
        cfg = small_config()
        acts = [MrsAction(0.0, 0.0)] * 2
        assert step_reward(STATE, acts, 0, cfg) == pytest.approx(0.1 * 2.0, abs=1e-15)

    def test_team_only_reward_identical_across_agents(self):
        cfg = small_config(reward_alpha=0.0, reward_beta=0.0)
        r = [step_reward(STATE, ACTIONS, i, cfg) for i in range(2)]
        assert r[0] == r[1] == pytest.approx(0.5, abs=1e-15)

    def test_potential_example(self):
        cfg = small_config()
        assert potential(STATE, ACTIONS, cfg) == pytest.approx(1.0, abs=1e-12)
        zero = [MrsAction(0.0, 0.0)] * 2
        assert potential(MrsState((0.0, 0.0), 0), zero, cfg) == 0.0

    def test_theta_identity(self):
        cfg = small_config()
        assert theta(STATE, ACTIONS, 0, cfg) == pytest.approx(-0.2, abs=1e-12)
        for i in range(2):
            gap = step_reward(STATE, ACTIONS, i, cfg) - potential(STATE, ACTIONS, cfg)
            assert theta(STATE, ACTIONS, i, cfg) == pytest.approx(gap, abs=1e-12)

    def test_theta_ignores_own_action_and_saving(self):
        cfg = small_config()
        base = theta(STATE, ACTIONS, 0, cfg)
        for own in valid_actions(cfg, 2.0):
            assert theta(STATE, [own, ACTIONS[1]], 0, cfg) == base
        moved = MrsState((0.5, 2.0), 0)
        assert theta(moved, ACTIONS, 0, cfg) == base

    def test_single_agent_theta_is_zero(self):
        cfg = MrsConfig(1, 2, 1.0, 0.1, 0.2, (2.0,), (0.0, 1.0), (0.0, 0.5))
        assert theta(MrsState((2.0,), 0), [MrsAction(1.0, 0.5)], 0, cfg) == 0.0


def hand_rolled_profile(cfg):
    """Fixed two-round policy pair used for the frozen-value tests."""
    p0 = TabularPolicy(0, {
        (2.0, 0): MrsAction(1.0, 0.5),
        (1.0, 1): MrsAction(1.0, 0.0),
        (2.0, 1): MrsAction(0.0, 0.5),
    })
    p1 = TabularPolicy(1, {
        (1.0, 0): MrsAction(0.0, 0.0),
        (1.0, 1): MrsAction(1.0, 0.5),
        (0.0, 1): MrsAction(0.0, 0.0),
    })
    return [p0, p1]


class TestPolicyValues:
    def test_horizon_one_equals_step_reward(self):
        cfg = small_config(horizon=1)
        profile = [
            TabularPolicy(0, {(2.0, 0): ACTIONS[0]}),
            TabularPolicy(1, {(2.0, 0): ACTIONS[1]}),
        ]
        assert policy_value(profile, 0, cfg, STATE) == step_reward(STATE, ACTIONS, 0, cfg)

    def test_hand_rolled_two_round_values(self):
        # Start (2, 1). Round 0: a0 = (1, .5), a1 = (0, 0) -> r0 = .8, r1 = .6,
        # J = .9; state becomes (1, 1). Round 1: a0 = (1, 0), a1 = (1, .5) ->
        # r0 = 1.6, r1 = 1.7, J = 1.8.
        cfg = small_config(initial_savings=(2.0, 1.0))
        start = cfg.start_state()
        profile = hand_rolled_profile(cfg)
        assert policy_value(profile, 0, cfg, start) == pytest.approx(2.4, abs=1e-12)
        assert policy_value(profile, 1, cfg, start) == pytest.approx(2.3, abs=1e-12)
        assert potential_value(profile, cfg, start) == pytest.approx(2.7, abs=1e-12)

    def test_hand_rolled_discounted(self):
        cfg = small_config(initial_savings=(2.0, 1.0), discount=0.9)
        start = cfg.start_state()
        profile = hand_rolled_profile(cfg)
        assert policy_value(profile, 0, cfg, start) == pytest.approx(0.8 + 0.9 * 1.6, abs=1e-12)
        assert policy_value(profile, 1, cfg, start) == pytest.approx(0.6 + 0.9 * 1.7, abs=1e-12)
        assert potential_value(profile, cfg, start) == pytest.approx(0.9 + 0.9 * 1.8, abs=1e-12)

    def test_zero_policies_zero_alpha_give_zero(self):
        cfg = small_config(reward_alpha=0.0)
        profile = lex_min_profile(cfg, cfg.start_state())  # all (spend 0, privacy 0)
        assert policy_value(profile, 0, cfg, cfg.start_state()) == 0.0
        assert potential_value(profile, cfg, cfg.start_state()) == 0.0

    def test_missing_policy_entry_raises(self):
        cfg = small_config()
        profile = [TabularPolicy(0, {}), TabularPolicy(1, {})]
        with pytest.raises(InvalidActionError):
            policy_value(profile, 0, cfg, cfg.start_state())

    def test_single_agent_value_equals_potential(self):
        # With one agent the non-common term is empty: V = Phi exactly.
        cfg = MrsConfig(1, 2, 1.0, 0.1, 0.2, (2.0,), (0.0, 1.0), (0.0, 0.5))
        start = cfg.start_state()
        for pol in enumerate_policies(cfg, 0, start):
            assert policy_value([pol], 0, cfg, start) == pytest.approx(
                potential_value([pol], cfg, start), abs=1e-15
            )


class TestMpgProperty:
    def test_exhaustive_alignment_single_state_deviations(self):
        # Direct check of the defining identity on every single-state
        # unilateral deviation, independent of verify_mpg's grouping trick.
        cfg = small_config(initial_savings=(1.0, 1.0))
        start = cfg.start_state()
        policies = [enumerate_policies(cfg, a, start) for a in range(2)]
        for i in range(2):
            for pi in policies[i]:
                for key in pi.actions:
                    for alt in valid_actions(cfg, key[0]):
                        if alt == pi.actions[key]:
                            continue
                        pj = policies[1 - i][17 % len(policies[1 - i])]
                        deviated = TabularPolicy(i, {**pi.actions, key: alt})
                        base = [None, None]
                        base[i], base[1 - i] = pi, pj
                        dev = [None, None]
                        dev[i], dev[1 - i] = deviated, pj
                        d_phi = potential_value(dev, cfg, start) - potential_value(base, cfg, start)
                        d_val = policy_value(dev, i, cfg, start) - policy_value(base, i, cfg, start)
                        assert d_phi == pytest.approx(d_val, abs=1e-12)

    def test_verify_mpg_true_on_standard_reward(self):
        cfg = small_config()
        ok, violation = verify_mpg(cfg, cfg.start_state())
        assert ok
        assert violation <= 1e-12

    def test_verify_mpg_discounted(self):
        cfg = small_config(discount=0.9, initial_savings=(1.0, 1.0))
        ok, violation = verify_mpg(cfg, cfg.start_state(), tol=1e-9)
        assert ok
        assert violation <= 1e-9

    def test_scaled_team_term_breaks_potential(self):
        cfg = small_config(team_weights=(1.5, 1.0), initial_savings=(1.0, 1.0))
        ok, violation = verify_mpg(cfg, cfg.start_state())
        assert not ok
        assert violation > 1e-3

    def test_single_agent_trivially_mpg(self):
        cfg = MrsConfig(1, 2, 1.0, 0.1, 0.2, (1.0,), (0.0, 1.0), (0.0, 0.5))
        ok, violation = verify_mpg(cfg, cfg.start_state())
        assert ok
        assert violation == 0.0

    def test_budget_guard(self):
        cfg = small_config(
            horizon=4,
            initial_savings=(4.0, 4.0),
            spend_grid=(0.0, 0.5, 1.0),
            privacy_grid=(0.0, 0.25, 0.5, 1.0),
        )
        assert policy_space_size(cfg, cfg.start_state()) > 10**6
        with pytest.raises(EnumerationBudgetError):
            verify_mpg(cfg, cfg.start_state())


class TestBestResponse:
    def test_large_privacy_reward_dominates(self):
        cfg = small_config(reward_beta=25.0)
        start = cfg.start_state()
        opponents = lex_min_profile(cfg, start)
        br = best_response_policy(opponents, 0, cfg, start)
        assert all(a.privacy == max(cfg.privacy_grid) for a in br.actions.values())

    def test_team_term_alone_prefers_open_spending(self):
        cfg = small_config(reward_alpha=0.0, reward_beta=0.0)
        start = cfg.start_state()
        opponents = lex_min_profile(cfg, start)
        br = best_response_policy(opponents, 0, cfg, start)
        for (saving, _), action in br.actions.items():
            feasible = [b for b in cfg.spend_grid if b <= saving + 1e-9]
            assert action.spend == max(feasible)
            assert action.privacy == 0.0

    def test_exhaustive_optimality(self):
        cfg = small_config(initial_savings=(1.0, 2.0))
        start = cfg.start_state()
        opponents = lex_min_profile(cfg, start)
        br = best_response_policy(opponents, 0, cfg, start)
        profile = [br, opponents[1]]
        best = policy_value(profile, 0, cfg, start)
        for candidate in enumerate_policies(cfg, 0, start):
            value = policy_value([candidate, opponents[1]], 0, cfg, start)
            assert value <= best + 1e-12

    def test_horizon_zero_empty_policy(self):
        cfg = small_config(horizon=0)
        br = best_response_policy(lex_min_profile(cfg, cfg.start_state()), 0, cfg, cfg.start_state())
        assert br.actions == {}


class TestFindNash:
    def test_converges_with_monotone_potential(self):
        cfg = small_config()
        res = find_mpg_nash(cfg, cfg.start_state())
        assert res.converged
        trace = res.potential_trace
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_no_profitable_deviation_at_fixed_point(self):
        cfg = small_config(initial_savings=(1.0, 1.0))
        start = cfg.start_state()
        res = find_mpg_nash(cfg, start)
        assert res.converged
        values = [policy_value(list(res.policies), i, cfg, start) for i in range(2)]
        for i in range(2):
            for candidate in enumerate_policies(cfg, i, start):
                trial = list(res.policies)
                trial[i] = candidate
                assert policy_value(trial, i, cfg, start) <= values[i] + 1e-12

    def test_single_agent_one_sweep(self):
        cfg = MrsConfig(1, 3, 1.0, 0.1, 0.2, (2.0,), (0.0, 1.0), (0.0, 0.5))
        res = find_mpg_nash(cfg, cfg.start_state())
        assert res.converged
        assert res.sweeps == 2  # second sweep only confirms the fixed point

    def test_symmetric_config_symmetric_equilibrium(self):
        cfg = small_config()
        res = find_mpg_nash(cfg, cfg.start_state())
        assert res.policies[0].actions == res.policies[1].actions


class TestChannelSimulation:
    def test_rewards_unaffected_by_channel(self):
        cfg = small_config()
        start = cfg.start_state()
        profile = find_mpg_nash(cfg, start).policies
        trajectory = simulate_with_channel(profile, cfg, start, 3)
        values = [policy_value(list(profile), i, cfg, start) for i in range(2)]
        replayed = [sum(rec[3][i] for rec in trajectory) for i in range(2)]
        assert replayed == pytest.approx(values, abs=1e-12)

    def test_zero_privacy_announces_truthfully(self):
        cfg = small_config(privacy_grid=(0.0,))
        start = cfg.start_state()
        profile = lex_min_profile(cfg, start)
        for _, actions, announced, _ in simulate_with_channel(profile, cfg, start, 0):
            assert announced == tuple(a.spend for a in actions)

    def test_channel_deterministic(self):
        cfg = small_config()
        start = cfg.start_state()
        profile = find_mpg_nash(cfg, start).policies
        a = simulate_with_channel(profile, cfg, start, 9)
        b = simulate_with_channel(profile, cfg, start, 9)
        assert [r[2] for r in a] == [r[2] for r in b]


class TestValidation:
    def test_bad_discount(self):
        with pytest.raises(InvalidParameterError):
            small_config(discount=0.0)

    def test_bad_savings_length(self):
        with pytest.raises(InvalidParameterError):
            small_config(initial_savings=(1.0,))

    def test_bad_privacy_grid(self):
        with pytest.raises(InvalidParameterError):
            small_config(privacy_grid=(0.0, 1.5))

    def test_negative_state(self):
        with pytest.raises(InvalidParameterError):
            MrsState((-1.0, 2.0), 0)

    def test_masked_actions_at_zero_saving(self):
        cfg = small_config()
        acts = valid_actions(cfg, 0.0)
        assert all(a.spend == 0.0 for a in acts)
        assert len(acts) == len(cfg.privacy_grid)
