import json

import pytest

from arsim.scenario import (
    RunFailure,
    ScenarioError,
    bundled_scenarios,
    eval_size,
    instantiate,
    load_scenario,
    run,
    sweep,
)


def doc(**changes):
    base = json.loads(json.dumps(load_scenario("figure1").doc))
    base.update(changes)
    return base


@pytest.mark.parametrize("path", bundled_scenarios(), ids=lambda p: p.stem)
def test_bundled_scenarios_meet_their_expectations(path):
    report = run(load_scenario(path))
    assert report.ok, report.mismatches
    assert report.scenario.expect


def test_figure1_groups():
    scen = load_scenario("figure1")
    assert [len(g) for g in scen.groups.values()] == [1, 1, 1, 2]
    assert scen.groups["G4"] == (4, 5)


def test_figure2_groups():
    scen = load_scenario("figure2")
    sizes = {k: len(v) for k, v in scen.groups.items()}
    f, tau, n = scen.cfg.f, scen.cfg.tau, scen.cfg.n
    assert sizes["G4"] == 2 * f - 1
    assert sizes["G5"] == n - tau - 2 * f + 1


def test_overrides_reexpand_groups():
    scen = load_scenario("figure1", tau=4, n=6)
    assert [len(g) for g in scen.groups.values()] == [1, 2, 1, 2]


def test_fault_budget_enforced():
    d = doc(objects=[{"objects": ["G1", "G2"], "faulty": True}])
    with pytest.raises(ScenarioError, match="budget"):
        instantiate(d)


def test_schema_errors_name_the_field():
    d = doc()
    d["steps"][0]["op"] = "teleport"
    with pytest.raises(ScenarioError, match="steps/0/op"):
        instantiate(d)
    d = doc()
    d["cfg"]["n"] = "five"
    with pytest.raises(ScenarioError, match="cfg/n"):
        instantiate(d)


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"name": "x",\n "cfg": }')
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(p)


def test_semantic_errors():
    with pytest.raises(ScenarioError, match="negative"):
        load_scenario("figure2", n=4, tau=4)
    d = doc()
    d["steps"][2]["quorum"] = ["G1"]
    with pytest.raises(ScenarioError, match="quorum"):
        instantiate(d)
    d = doc()
    d["steps"][1]["reader"] = "ghost"
    with pytest.raises(ScenarioError, match="undeclared"):
        instantiate(d)
    d = doc()
    d["steps"][0]["late"] = [{"to": ["G4"], "at": "nowhere"}]
    with pytest.raises(ScenarioError, match="unknown step"):
        instantiate(d)
    d = doc(groups={"A": "n"})
    d["objects"] = []
    d["steps"][1]["targets"] = ["A"]
    d["steps"][2]["quorum"] = ["G1"]
    with pytest.raises(ScenarioError):
        instantiate(d)


def test_size_formulas():
    env = {"n": 7, "f": 2, "tau": 5}
    assert eval_size("n-tau-2*f+1", env) == -1
    assert eval_size("tau//2", env) == 2
    assert eval_size(3, env) == 3
    for bad in ("__import__('os')", "n**2", "m+1", "n +"):
        with pytest.raises(ScenarioError):
            eval_size(bad, env)


def test_blocked_audit_is_reported_with_its_step():
    d = doc(objects=[{"objects": ["G1"], "faulty": True, "crash_after_event": 0}])
    with pytest.raises(RunFailure, match="audit"):
        run(instantiate(d))


def test_seed_override_from_environment(monkeypatch):
    assert load_scenario("figure1").seed == 7
    monkeypatch.setenv("ARSIM_SEED", "99")
    assert load_scenario("figure1").seed == 99
    assert load_scenario("figure1", seed=3).seed == 3


def test_seed_changes_tokens_not_verdicts():
    a = run(load_scenario("token_replay", seed=1))
    b = run(load_scenario("token_replay", seed=2))
    assert a.trace.to_jsonl() != b.trace.to_jsonl()
    assert a.verdicts() == b.verdicts()


def test_runs_are_byte_identical():
    for path in bundled_scenarios():
        first = run(load_scenario(path)).json_lines()
        second = run(load_scenario(path)).json_lines()
        assert first == second


def test_expectation_mismatch_is_reported():
    d = doc(expect=[{"t": 1, "completeness": False}])
    report = run(instantiate(d))
    assert not report.ok
    assert "completeness" in report.mismatches[0]


def test_sweep_marks_unfit_parameters():
    cells = sweep("figure2", taus=[3, 7], ts=[1], ns=[7])
    fit = {c.tau: c.verdicts for c in cells}
    assert fit[7] is None
    assert fit[3]["completeness"] and not fit[3]["strong_accuracy"]
