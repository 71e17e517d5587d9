"""Acceptance criteria 1-12.

Each test carries ``@pytest.mark.criterion(N)``; the terminal summary prints
one PASS/FAIL line per criterion.  Run alone with
``pytest tests/test_acceptance.py -v``.
"""
import itertools

import pytest

from arsim.dispersal import PRIME, Block, CodecParams, InsufficientBlocks, Label, combine, split
from arsim.oracle import COMPLETENESS, STRONG_ACCURACY, WEAK_ACCURACY
from arsim.scenario import bundled_scenarios, load_scenario, run, sweep
from arsim.search import SearchSpace, expected_table, find_violation, render_table, table1

L = Label("w1", 1)
BOTH_WEAK = f"{COMPLETENESS}+{WEAK_ACCURACY}"
BOTH_STRONG = f"{COMPLETENESS}+{STRONG_ACCURACY}"


def say(number, text):
    print(f"criterion {number}: {text}")


def interpolate_at(points, x):
    """Lagrange evaluation over GF(PRIME) of the polynomial through ``points``."""
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i != j:
                num = num * (x - xj) % PRIME
                den = den * (xi - xj) % PRIME
        total += yi * num * pow(den, PRIME - 2, PRIME)
    return total % PRIME


def records_of(report, scen, reader, alias):
    return len(report.attestations.get((reader, scen.label(alias)), frozenset()))


@pytest.mark.criterion(1)
def test_codec_threshold_is_exact():
    """Codec: every tau-subset decodes, no (tau-1)-subset does, 256 candidates fit each."""
    checked = 0
    for n in range(1, 8):
        for tau in range(1, n + 1):
            params = CodecParams(n, tau)
            blocks = split(b"\x5c", L, params)
            for subset in itertools.combinations(blocks, tau):
                assert combine(subset, params) == b"\x5c"
            for subset in itertools.combinations(blocks, tau - 1):
                if subset:
                    with pytest.raises(InsufficientBlocks):
                        combine(subset, params)
                missing = next(k for k in range(1, n + 1) if k not in {b.index for b in subset})
                known = [(b.index, b.share[0]) for b in subset]
                candidates = set()
                for guess in range(256):
                    share = interpolate_at([(0, guess), *known], missing)
                    completed = [*subset, Block(L, missing, (share,))]
                    if combine(completed, params) == bytes([guess]):
                        candidates.add(guess)
                assert len(candidates) >= 2
                checked += 1
    say(1, f"PASS over {checked} (tau-1)-subsets")


@pytest.mark.criterion(2)
def test_min_records_scenario():
    """Min records: figure1 leaves tau-2f records of the effective read in the quorum."""
    found = {}
    for tau, n in ((3, 5), (4, 5), (4, 6)):
        rep = run(load_scenario("figure1", tau=tau, n=n))
        found[(tau, n)] = records_of(rep.audits["audit"], rep.scenario, "r1", "v")
        assert ("r1", rep.scenario.label("v")) in rep.facts["audit"].effective()
    assert found == {(3, 5): 1, (4, 5): 2, (4, 6): 2}
    say(2, f"PASS records {found}")


@pytest.mark.criterion(3)
@pytest.mark.parametrize("n", [4, 5])
def test_completeness_impossible_at_tau_2f(n):
    """Completeness fails for every t when tau <= 2f."""
    res = find_violation(SearchSpace(n, 1, 2, "fast"), COMPLETENESS)
    cx = res.counterexample
    assert res.violated and res.satisfying_thresholds == []
    assert res.violated_thresholds == list(range(1, n + 1))
    assert cx.records == 0 and not cx.verdict.holds and cx.t == 1
    say(3, f"PASS n={n}: {res.line()}")


@pytest.mark.criterion(4)
def test_weak_accuracy_needs_t_above_f():
    """Fabrication: a forged record convicts a correct non-reader at t=1, not at t=2."""
    rep = run(load_scenario("fabrication"))
    scen, report = rep.scenario, rep.audits["audit"]
    assert scen.readers["r1"]
    assert not any(e.op == "a_read" and e.actor == "r1" for e in rep.trace)
    assert report.evidence_for("r1", scen.label("v")) is not None
    assert not rep.verdicts(1)[WEAK_ACCURACY].holds
    assert rep.verdicts(2)[WEAK_ACCURACY].holds
    say(4, "PASS t=1 weak_accuracy=false, t=2 true")


@pytest.mark.criterion(5)
def test_weak_auditability_boundary():
    """Weak auditability: tau=3 has no working t at n=6, tau=4 with t=2 has no violation."""
    low = find_violation(SearchSpace(6, 1, 3, "fast"), BOTH_WEAK)
    high = find_violation(SearchSpace(6, 1, 4, "fast"), BOTH_WEAK, t=2)
    assert low.violated and low.satisfying_thresholds == []
    assert not low.counterexample.verdict.holds
    assert not high.violated and high.counterexample is None
    say(5, f"PASS tau=3: {low.line()} | tau=4: {high.line()}")


@pytest.mark.criterion(6)
def test_strong_accuracy_alone():
    """Strong accuracy alone: figure2 breaks it at t=tau+f-1 and not at tau+f."""
    rep = run(load_scenario("figure2", n=7, tau=3))
    assert not rep.verdicts(3)[STRONG_ACCURACY].holds
    assert rep.verdicts(4)[STRONG_ACCURACY].holds
    res = find_violation(SearchSpace(7, 1, 3, "fast"), STRONG_ACCURACY, t=4)
    assert not res.violated
    say(6, f"PASS figure2 t=3 false, t=4 true; search: {res.line()}")


@pytest.mark.criterion(7)
def test_strong_auditability_impossible_with_fast_reads():
    """Fast reads: no t gives completeness and strong accuracy for any tau in [3, n]."""
    swept = searched = 0
    for n in range(4, 8):
        for tau in range(3, n + 1):
            cells = [c for c in sweep("figure2", taus=[tau], ts=range(1, n + 1), ns=[n]) if c.verdicts is not None]
            if cells:
                for c in cells:
                    assert not (c.verdicts[COMPLETENESS] and c.verdicts[STRONG_ACCURACY])
                    if not c.verdicts[COMPLETENESS]:
                        assert c.witnesses[COMPLETENESS][0] == "r1"
                    if not c.verdicts[STRONG_ACCURACY]:
                        assert c.witnesses[STRONG_ACCURACY][0] == "r2"
                swept += 1
            else:
                # the figure2 layout needs n - tau - 2f + 1 >= 0; tau = n goes through the search
                res = find_violation(SearchSpace(n, 1, tau, "fast"), BOTH_STRONG)
                assert res.violated and res.satisfying_thresholds == []
                searched += 1
    say(7, f"PASS {swept} (n, tau) swept on figure2, {searched} with tau=n searched")


@pytest.mark.criterion(8)
@pytest.mark.parametrize("n", [5, 6])
def test_signed_reads(n):
    """Signed reads: weak auditability at t=1 with tau=3, strong accuracy still broken by replay."""
    rep = run(load_scenario("fabrication", model="signed"))
    assert rep.verdicts(1)[WEAK_ACCURACY].holds
    space = SearchSpace(n, 1, 3, "signed")
    both = find_violation(space, BOTH_WEAK, t=1)
    assert not both.violated
    replay = find_violation(space, STRONG_ACCURACY, where=lambda cx: cx.forged)
    assert replay.violated and replay.counterexample.forged
    assert not replay.counterexample.verdict.holds
    say(8, f"PASS n={n}: {both.line()} | {replay.line()}")


@pytest.mark.criterion(9)
def test_total_order():
    """Total order: tau=4, t=2 is strongly auditable; t=1 falls to a fabrication."""
    space = SearchSpace(6, 1, 4, "total")
    ok = find_violation(space, BOTH_STRONG, t=2)
    assert not ok.violated
    forged = find_violation(space, STRONG_ACCURACY, t=1, where=lambda cx: cx.forged)
    assert forged.violated and forged.counterexample.forged
    say(9, f"PASS {ok.line()} | {forged.line()}")


@pytest.mark.criterion(10)
def test_nonfast_reads():
    """Non-fast reads: strong auditability at tau=4 t=2, and at tau=3 t=1 with value-scoped tokens."""
    plain = find_violation(SearchSpace(6, 1, 4, "nonfast"), BOTH_STRONG, t=2)
    signed = find_violation(SearchSpace(6, 1, 3, "nonfast-signed"), BOTH_STRONG, t=1)
    assert not plain.violated and not signed.violated
    rep = run(load_scenario("token_replay"))
    report = rep.audits["audit"]
    assert rep.ok
    assert any(rec.label == rep.scenario.label("x") for _, rec in report.rejected)
    assert rep.verdicts(1)[STRONG_ACCURACY].holds
    say(10, f"PASS {plain.line()} | {signed.line()} | replay rejected")


@pytest.mark.criterion(11)
def test_table1_reproduction():
    """Bounds table at f=1 matches every known cell."""
    table, expected = table1(1), expected_table(1)
    mismatched = [(r, c) for r in expected for c in expected[r] if table[r][c].text != expected[r][c]]
    print(render_table(table, expected))
    assert not mismatched, mismatched
    say(11, "PASS all cells match")


@pytest.mark.criterion(12)
def test_runs_are_deterministic():
    """Determinism: every bundled scenario gives byte-identical reports twice."""
    names = []
    for path in bundled_scenarios():
        first = "\n".join(run(load_scenario(path)).json_lines())
        second = "\n".join(run(load_scenario(path)).json_lines())
        assert first == second
        names.append(path.stem)
    say(12, f"PASS {', '.join(names)}")
