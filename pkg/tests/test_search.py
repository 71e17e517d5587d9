import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arsim.oracle import ALL_PROPERTIES, COMPLETENESS, STRONG_ACCURACY, WEAK_ACCURACY, check_all
from arsim.scenario import instantiate, run
from arsim.search import (
    SearchSpace,
    SearchTooLarge,
    _evaluate,
    _violations,
    emit,
    execution_doc,
    find_violation,
    parse_properties,
    quorum_exclusions,
    summarize,
)

from conftest import adversaries

SMALL = SearchSpace(4, 1, 2, "fast")


def analytic_counts(space, ev, logs, excluded):
    counts = {}
    for pair in space.universe:
        c = len(ev.correct_holders.get(pair, frozenset()) - set(excluded))
        for k in range(1, space.f + 1):
            if k not in excluded and pair in logs[k - 1] and pair in ev.accepted[k]:
                c += 1
        counts[pair] = c
    return counts


@pytest.mark.parametrize("model", ["fast", "signed", "total", "nonfast-signed"])
def test_enumeration_size_matches_closed_form(model):
    space = SearchSpace(4, 1, 2, model)
    assert space.execution_count() == len(list(space.executions()))
    assert space.variant_count == 2 ** 6
    assert summarize(space).states_explored == space.state_count()


def test_quorum_exclusions_are_quorum_sized():
    for ex in SMALL.executions():
        for excluded in quorum_exclusions(SMALL, ex):
            assert len(excluded) == SMALL.f
            assert len(set(excluded)) == SMALL.f


def test_completeness_breaks_with_two_objects_and_no_records():
    result = find_violation(SMALL, COMPLETENESS, t=1)
    cx = result.counterexample
    assert result.violated and cx.records == 0
    assert not cx.verdict.holds
    assert cx.run.ok


def test_counterexamples_replay_to_a_failing_verdict():
    for props in ("completeness", "weak_accuracy", "strong_accuracy"):
        result = find_violation(SMALL, props, t=1)
        if result.violated:
            cx = result.counterexample
            replay = run(instantiate(cx.scenario))
            assert not replay.verdicts(1, props=[cx.property])[cx.property].holds


def test_searches_are_deterministic():
    a = find_violation(SMALL, "completeness+strong_accuracy")
    summarize.cache_clear()
    b = find_violation(SMALL, "completeness+strong_accuracy")
    assert a.line() == b.line()
    assert a.counterexample.dumps() == b.counterexample.dumps()


def test_no_violation_reports_satisfying_thresholds():
    result = find_violation(SearchSpace(6, 1, 4, "fast"), "completeness+weak_accuracy", t=2)
    assert not result.violated and result.counterexample is None
    assert 2 in result.satisfying_thresholds
    assert "no violation" in result.line()


def test_fast_model_cannot_have_both_properties():
    result = find_violation(SearchSpace(5, 1, 3, "fast"), "completeness+strong_accuracy")
    assert result.violated and result.satisfying_thresholds == []


def test_where_filters_counterexamples():
    space = SearchSpace(5, 1, 3, "signed")
    result = find_violation(space, STRONG_ACCURACY, where=lambda cx: cx.forged)
    assert result.violated and result.counterexample.forged


def test_cap_refuses_large_spaces():
    with pytest.raises(SearchTooLarge):
        find_violation(SearchSpace(5, 1, 3, "fast", cap=10), COMPLETENESS)


def test_property_parsing():
    assert parse_properties("completeness+weak_accuracy") == (COMPLETENESS, WEAK_ACCURACY)
    with pytest.raises(ValueError):
        parse_properties("liveness")


def test_emit_writes_a_replayable_file(tmp_path):
    result = find_violation(SMALL, COMPLETENESS, t=1)
    path = emit(result, tmp_path)
    doc = json.loads(path.read_text())
    assert run(instantiate(doc)).ok
    assert emit(find_violation(SearchSpace(6, 1, 4, "fast"), COMPLETENESS, t=2), tmp_path) is None


@pytest.mark.parametrize("model", ["fast", "signed"])
def test_summary_agrees_with_direct_checks(model):
    space = SearchSpace(4, 1, 2, model)
    summary = summarize(space)
    for (prop, t), w in summary.first.items():
        doc = execution_doc(space, w.execution, w.logs, w.excluded)
        doc["cfg"]["t"] = t
        rep = run(instantiate(doc))
        assert not rep.verdicts(t, props=[prop])[prop].holds


SPACES = [SearchSpace(5, 1, 3, m) for m in ("fast", "signed", "total", "nonfast", "nonfast-signed")]


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_analytic_route_matches_simulated_audit(data):
    """Counts derived from logs agree with a full run and audit of the same adversary."""
    space = data.draw(st.sampled_from(SPACES))
    ex, logs, excluded = data.draw(adversaries(space))
    ev = _evaluate(space, ex)
    counts = analytic_counts(space, ev, logs, excluded)
    broken = {(p, t) for p, t, _ in _violations(space, ev, counts, ALL_PROPERTIES)}

    scen = instantiate(execution_doc(space, ex, logs, excluded))
    rep = run(scen)
    report = rep.audits[rep.last_audit]
    for (reader, alias), c in counts.items():
        attesting = report.attestations.get((reader, scen.label(alias)), frozenset())
        assert len(attesting) == c
    for t in space.thresholds:
        verdicts = check_all(rep.trace, report.at_threshold(t), ALL_PROPERTIES)
        for prop, v in verdicts.items():
            assert v.holds == ((prop, t) not in broken), (prop, t)
