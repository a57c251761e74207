from __future__ import annotations

import ast
import dataclasses
import inspect
import math

import pytest

from implicit_ba import committee as cm
from implicit_ba import protocol
from implicit_ba.engine import (
    TrialConfig,
    _Trial,
    build_setup,
    check_properties,
    make_inputs,
    run_explicit,
    run_implicit,
    run_kt1,
    run_leader_election,
    run_trial,
)
from implicit_ba.errors import ConfigError, PhaseClock, PhaseOrderError
from implicit_ba.protocol import Verifier


def test_trial_is_byte_identical_on_replay():
    cfg = TrialConfig(n=128, seed=21, profile="desk", adversary="equivocate", inputs="random")
    assert run_trial(cfg).to_json() == run_trial(cfg).to_json()


def test_honest_run_passes_all_properties():
    r = run_trial(TrialConfig(n=256, f=0, profile="desk", seed=1))
    assert all(r.verdict.values())
    assert r.adversary_messages == 0


def test_unanimous_candidates_decide_others_undecided():
    r = run_trial(TrialConfig(n=64, f=0, profile="desk", input_value=7, seed=2))
    for i, d in enumerate(r.decisions):
        assert d == (7 if i in r.committee else None)


def test_validity_under_crash_faults():
    r = run_trial(TrialConfig(n=256, f=102, profile="desk", adversary="silent", input_value=5, seed=3))
    assert r.f == math.floor(0.4 * 256)
    honest_cands = [u for u in r.committee if r.honest[u]]
    assert honest_cands and all(r.decisions[u] == 5 for u in honest_cands)


def test_iteration_budget_is_exact():
    r = run_trial(TrialConfig(n=256, profile="desk", seed=4))
    assert r.iterations == r.iteration_budget == cm.iteration_budget(256, cm.DESK_C)
    assert r.phase_rounds.keys() == {"step0", "relay0", "up", "down"}


def test_config_rejections():
    with pytest.raises(ConfigError):
        run_trial(TrialConfig(n=256, f=103))
    with pytest.raises(ConfigError):
        run_trial(TrialConfig(n=1))
    with pytest.raises(ConfigError):
        run_trial(TrialConfig(n=64, mode="nope"))
    with pytest.raises(ConfigError):
        run_trial(TrialConfig(n=64, input_value=16))
    with pytest.raises(ConfigError):
        run_trial(TrialConfig(n=8, input_values=(0, 1)))


def test_coin_before_commitment_is_a_fault():
    clock = PhaseClock()
    with pytest.raises(PhaseOrderError):
        cm.draw_coin(1, clock=clock)
    clock.mark("adversary_committed")
    with pytest.raises(PhaseOrderError):
        clock.mark("adversary_committed")


def test_setup_order_recorded():
    assert build_setup(TrialConfig(n=64, seed=1)).clock.done == ["adversary_committed", "pki_published", "coin_drawn"]
    assert build_setup(TrialConfig(n=64, seed=1, mode="pubkey-select")).clock.done == [
        "adversary_committed", "pki_published",
    ]


def test_input_modes():
    assert make_inputs(TrialConfig(n=8, input_value=3)) == [3] * 8
    rnd = make_inputs(TrialConfig(n=64, inputs="random", seed=1))
    assert len(set(rnd)) > 1 and all(0 <= v < 16 for v in rnd)
    assert make_inputs(TrialConfig(n=8, inputs="alternate", seed=2)) == [5] * 8
    assert make_inputs(TrialConfig(n=8, inputs="alternate", seed=3)) == make_inputs(
        TrialConfig(n=8, inputs="random", seed=3)
    )


def test_checker_flags_split_decisions():
    r = run_trial(TrialConfig(n=64, f=0, profile="desk", seed=5))
    inputs = [5] * 64
    assert check_properties(r, inputs).consistency
    a, b = r.committee[:2]
    r.decisions[a], r.decisions[b] = 1, 2
    v = check_properties(r, inputs)
    assert not v.consistency and not v.validity


def test_checker_flags_decided_non_candidate():
    r = run_trial(TrialConfig(n=64, f=0, profile="desk", seed=5))
    outsider = next(i for i in range(64) if i not in r.committee)
    r.decisions[outsider] = 5
    assert not check_properties(r, [5] * 64).implicit_states


def test_run_helpers_agree_with_run_trial():
    cfg = TrialConfig(n=64, profile="desk", seed=6, inputs="random")
    assert run_implicit(cfg) == run_trial(cfg).decisions
    assert run_kt1(cfg) == run_trial(dataclasses.replace(cfg, mode="kt1")).decisions
    assert run_explicit(cfg) == run_trial(dataclasses.replace(cfg, mode="explicit")).decisions


def test_explicit_mode_everyone_decides():
    r = run_trial(TrialConfig(n=256, profile="desk", seed=7, mode="explicit", adversary="equivocate"))
    honest_cands = sum(1 for u in r.committee if r.honest[u])
    assert r.final_messages == honest_cands * (r.n - 1)
    assert all(d is not None for d, h in zip(r.decisions, r.honest) if h)
    assert all(r.verdict.values())


def test_explicit_finals_cannot_be_flipped_by_corrupt_minority():
    for seed in range(5):
        r = run_trial(TrialConfig(n=128, profile="desk", seed=seed, mode="explicit", adversary="equivocate",
                                  inputs="random"))
        if r.honest_majority:
            assert len(r.decided_values) == 1


def test_kt1_matches_kt0_under_transport_honest_adversary():
    for seed in range(100):
        cfg = TrialConfig(n=64, profile="desk", seed=seed, inputs="random")
        assert run_kt1(cfg) == run_implicit(cfg), seed


def test_kt1_message_bound():
    for seed in range(5):
        r = run_trial(TrialConfig(n=256, profile="desk", seed=seed, mode="kt1", inputs="random"))
        assert r.honest_messages <= r.committee_size ** 2 * (r.iteration_budget + 2)
        assert r.referee_sample == 0


def test_pubkey_select_uses_smallest_keys():
    cfg = TrialConfig(n=128, profile="desk", seed=8, mode="pubkey-select")
    s = build_setup(cfg)
    keys = s.pki.public_keys
    assert sorted(s.committee.members) == sorted(sorted(range(128), key=lambda i: keys[i])[: len(s.committee)])
    assert all(run_trial(cfg).verdict.values())


def test_leader_election_sends_nothing():
    res = run_leader_election(1024, 409, seed=3)
    assert res.messages == 0
    assert 0 <= res.leader < 1024


def test_trial_invariants_monotone_and_sound_chains():
    cfg = TrialConfig(n=128, profile="desk", seed=11, adversary="delay_chain", inputs="random")
    t = _Trial(cfg, None)
    t.run()
    fresh = Verifier(t.pki, t.committee)
    for st in t.candidates.values():
        assert st.sent_keys == sorted(st.sent_keys)
        for c in st.accepted:
            assert fresh.chain_ok(c)
            assert len(set(c.signers)) == len(c.sigs)
            assert set(c.signers) <= set(t.committee.members)


def test_protocol_logic_never_touches_port_identities():
    """KT0 audit: the state machines neither import the wiring nor read peer identities."""
    tree = ast.parse(inspect.getsource(protocol))
    banned = {"PortMap", "portmap", "peer", "peers", "port_of", "arrival_ports", "ports_at", "network"}
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.Attribute):
            names.add(node.attr)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            names.update(a.name for a in node.names)
            if isinstance(node, ast.ImportFrom) and node.module:
                names.add(node.module.split(".")[-1])
    assert not names & banned


def test_sublinear_messages_at_n_1024():
    """honest_messages < n at n = 1024 with the desk committee."""
    r = run_trial(TrialConfig(n=1024, profile="desk", seed=0))
    assert r.honest_messages < r.n, (
        f"honest_messages={r.honest_messages} with |C|={r.committee_size} and {r.referee_sample} referees each"
    )
