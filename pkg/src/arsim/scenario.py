"""Scenario files: JSON descriptions of scripted executions, and their runner.

A scenario names object groups by size formulas in n, f and tau, assigns
fault scripts to groups, and lists high-level steps.  Step i runs at clock i;
a ``late`` delivery lands during a named later step, after that step's own
immediate messages.
"""
from __future__ import annotations

import ast
import copy
import hashlib
import json
import operator
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema

from .audit import AuditBlocked, AuditReport
from .base_object import WILDCARD, FaultScript, ReadRecord
from .dispersal import Label
from .emulation import MODELS, AuditableRegister, ConfigError, ModelConfig
from .oracle import ALL_PROPERTIES, PROPERTIES, PropertyVerdict, TraceFacts, check_facts
from .trace import ExecutionTrace

SCENARIO_DIR = Path(__file__).parent / "scenarios"
BOGUS = Label("bogus", 0)  # stands for every label that is never written

_REFS = {
    "oneOf": [
        {"const": "all"},
        {"type": "array", "items": {"type": ["string", "integer"]}},
    ]
}
_LATE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["to", "at"],
        "properties": {"to": _REFS, "at": {"type": "string"}},
        "additionalProperties": False,
    },
}
_PAIR = {
    "type": "object",
    "required": ["reader", "label"],
    "properties": {"reader": {"type": "string"}, "label": {"type": "string"}},
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "cfg", "steps"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "cfg": {
            "type": "object",
            "required": ["n", "f", "tau"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "f": {"type": "integer", "minimum": 0},
                "tau": {"type": ["integer", "string"]},
                "t": {"type": ["integer", "string"]},
                "model": {"enum": sorted(MODELS)},
            },
        },
        "seed": {"type": "integer"},
        "groups": {"type": "object", "additionalProperties": {"type": ["integer", "string"]}},
        "readers": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {"correct": {"type": "boolean"}},
                "additionalProperties": False,
            },
        },
        "writers": {"type": "array", "items": {"type": "string"}},
        "auditors": {"type": "array", "items": {"type": "string"}},
        "priority": {"type": "array", "items": {"type": ["string", "integer"]}},
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["objects"],
                "additionalProperties": False,
                "properties": {
                    "objects": _REFS,
                    "faulty": {"type": "boolean"},
                    "omit_block_to": {"type": "array", "items": _PAIR},
                    "omit_records_to_audit": {"type": "boolean"},
                    "fabricate": {"type": "array", "items": _PAIR},
                    "crash_after_event": {"type": ["integer", "null"]},
                },
            },
        },
        "steps": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["op"],
                "properties": {
                    "op": {"enum": ["write", "read", "audit", "crash"]},
                    "id": {"type": "string"},
                    "writer": {"type": "string"},
                    "value": {"type": "string"},
                    "as": {"type": "string"},
                    "reader": {"type": "string"},
                    "targets": _REFS,
                    "deliver": _REFS,
                    "late": _LATE,
                    "request": {"type": "string"},
                    "auditor": {"type": "string"},
                    "quorum": _REFS,
                    "process": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "expect": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t"],
                "additionalProperties": False,
                "properties": {
                    "t": {"type": ["integer", "string"]},
                    "audit": {"type": "string"},
                    **{p: {"type": "boolean"} for p in ALL_PROPERTIES},
                    "records": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["reader", "label", "count"],
                            "properties": {
                                "reader": {"type": "string"},
                                "label": {"type": "string"},
                                "count": {"type": ["integer", "string"]},
                            },
                            "additionalProperties": False,
                        },
                    },
                },
            },
        },
    },
}


class ScenarioError(ValueError):
    pass


class RunFailure(RuntimeError):
    """A step could not complete (for example an audit that cannot gather n - f logs)."""


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.FloorDiv: operator.floordiv,
}


def eval_size(expr: int | str, env: Mapping[str, int]) -> int:
    """Evaluate a size formula such as ``"n-tau-2*f+1"`` over integer names."""
    if isinstance(expr, int):
        return expr

    def walk(node: ast.AST) -> int:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        if isinstance(node, ast.Name) and node.id in env:
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -walk(node.operand)
        raise ScenarioError(f"unsupported size formula {expr!r}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ScenarioError(f"bad size formula {expr!r}") from exc
    return walk(tree)


@dataclass(frozen=True)
class Expectation:
    t: int
    audit: str | None
    verdicts: Mapping[str, bool]
    records: tuple[tuple[str, str, int], ...] = ()


@dataclass
class Scenario:
    name: str
    cfg: ModelConfig
    seed: int
    groups: dict[str, tuple[int, ...]]
    readers: dict[str, bool]
    scripts: list[FaultScript]
    steps: list[dict]
    labels: dict[str, Label]
    priority: dict[int, int]
    expect: list[Expectation]
    doc: dict = field(repr=False, default_factory=dict)

    def objects(self, refs: Any) -> list[int]:
        if refs == "all":
            return list(range(1, self.cfg.n + 1))
        out: list[int] = []
        for ref in refs:
            if isinstance(ref, int):
                if not 1 <= ref <= self.cfg.n:
                    raise ScenarioError(f"object {ref} outside 1..{self.cfg.n}")
                out.append(ref)
            elif ref in self.groups:
                out.extend(self.groups[ref])
            else:
                raise ScenarioError(f"unknown group {ref!r}")
        return sorted(set(out))

    def label(self, alias: str) -> Label:
        if alias in self.labels:
            return self.labels[alias]
        try:
            return Label.parse(alias)
        except ValueError:
            raise ScenarioError(f"unknown label {alias!r}") from None

    def to_json(self) -> dict:
        return self.doc


def _format_errors(exc: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
    return f"{where}: {exc.message}"


def validate(doc: Mapping) -> None:
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ScenarioError("; ".join(_format_errors(e) for e in errors))


def instantiate(doc: Mapping, *, check_schema: bool = True, **overrides: Any) -> Scenario:
    """Resolve a validated document into a Scenario.

    ``overrides`` may set n, f, tau, t, model and seed; group sizes are
    re-evaluated afterwards.  ``ARSIM_SEED`` beats the file's seed.
    """
    if check_schema:
        validate(doc)
    raw = dict(doc["cfg"])
    for key in ("n", "f", "tau", "t", "model"):
        if overrides.get(key) is not None:
            raw[key] = overrides[key]
    n, f = raw["n"], raw["f"]
    env = {"n": n, "f": f}
    env["tau"] = eval_size(raw["tau"], env)
    env["t"] = eval_size(raw.get("t", 1), env)
    try:
        cfg = ModelConfig.for_model(raw.get("model", "fast"), n=n, f=f, tau=env["tau"], t=env["t"])
    except ConfigError as exc:
        raise ScenarioError(str(exc)) from exc

    groups: dict[str, tuple[int, ...]] = {}
    nxt = 1
    for gname, expr in doc.get("groups", {}).items():
        size = eval_size(expr, env)
        if size < 0:
            raise ScenarioError(f"group {gname} has negative size {size} at n={n} f={f} tau={env['tau']}")
        groups[gname] = tuple(range(nxt, nxt + size))
        nxt += size
    if groups and nxt - 1 != n:
        raise ScenarioError(f"groups cover {nxt - 1} objects, n={n}")

    readers = {r: spec.get("correct", True) for r, spec in doc.get("readers", {}).items()}
    writers = set(doc.get("writers", ["w1"]))
    auditors = set(doc.get("auditors", ["a1"]))

    seed = overrides.get("seed")
    if seed is None:
        env_seed = os.environ.get("ARSIM_SEED")
        seed = int(env_seed) if env_seed not in (None, "") else doc.get("seed", 0)

    steps = copy.deepcopy(doc["steps"])
    labels = {"bogus": BOGUS}
    step_ids: dict[str, int] = {}
    writes = 0
    for clock, step in enumerate(steps, start=1):
        sid = step.setdefault("id", f"s{clock}")
        if sid in step_ids:
            raise ScenarioError(f"duplicate step id {sid!r}")
        step_ids[sid] = clock
        step["clock"] = clock
        op = step["op"]
        need = {"write": ("writer", "value"), "read": ("reader",), "crash": ("process",), "audit": ()}[op]
        for key in need:
            if key not in step:
                raise ScenarioError(f"steps/{clock - 1}: {op} needs {key!r}")
        if op == "write":
            if step["writer"] not in writers:
                raise ScenarioError(f"undeclared writer {step['writer']!r}")
            writes += 1
            # labels carry a global write counter, known before the run
            labels[step.get("as", sid)] = Label(step["writer"], writes)
        elif op == "read" and step["reader"] not in readers:
            raise ScenarioError(f"undeclared reader {step['reader']!r}")
        elif op == "audit" and step.get("auditor", "a1") not in auditors:
            raise ScenarioError(f"undeclared auditor {step.get('auditor')!r}")

    scen = Scenario(doc["name"], cfg, seed, groups, readers, [], steps, labels, {}, [], copy.deepcopy(dict(doc)))

    for step in steps:
        for late in step.get("late", []):
            if late["at"] not in step_ids:
                raise ScenarioError(f"late delivery at unknown step {late['at']!r}")
            if step_ids[late["at"]] < step["clock"]:
                raise ScenarioError(f"step {step['id']} schedules a delivery in the past")
            late["due"] = step_ids[late["at"]]
        if step["op"] == "audit" and "quorum" in step:
            if len(scen.objects(step["quorum"])) != cfg.quorum_size:
                raise ScenarioError(f"audit {step['id']} quorum must have n - f = {cfg.quorum_size} objects")

    scripts = [FaultScript()] * n
    for entry in doc.get("objects", []):
        script = FaultScript(
            is_faulty=entry.get("faulty", False),
            omit_block_to=frozenset(
                (p["reader"], WILDCARD if p["label"] == "*" else scen.label(p["label"]))
                for p in entry.get("omit_block_to", [])
            ),
            omit_records_to_audit=entry.get("omit_records_to_audit", False),
            fabricate=frozenset(ReadRecord(p["reader"], scen.label(p["label"])) for p in entry.get("fabricate", [])),
            crash_after_event=entry.get("crash_after_event"),
        )
        for k in scen.objects(entry["objects"]):
            scripts[k - 1] = script
    faulty = sum(s.is_faulty for s in scripts)
    if faulty > f:
        raise ScenarioError(f"{faulty} faulty objects exceed the budget f={f}")
    scen.scripts = scripts

    if "priority" in doc:
        order = scen.objects(doc["priority"])
        scen.priority = {k: rank for rank, k in enumerate(order)}
        for k in range(1, n + 1):
            scen.priority.setdefault(k, len(order) + k)

    audit_ids = [s["id"] for s in steps if s["op"] == "audit"]
    for e in doc.get("expect", []):
        audit = e.get("audit")
        if audit is not None and audit not in audit_ids:
            raise ScenarioError(f"expectation names unknown audit {audit!r}")
        records = tuple((r["reader"], r["label"], eval_size(r["count"], env)) for r in e.get("records", []))
        verdicts = {p: e[p] for p in ALL_PROPERTIES if p in e}
        scen.expect.append(Expectation(eval_size(e["t"], env), audit, verdicts, records))
    return scen


def load_scenario(path: str | os.PathLike, **overrides: Any) -> Scenario:
    path = resolve_path(path)
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instantiate(doc, **overrides)


def resolve_path(path: str | os.PathLike) -> Path:
    """Accept a path or the bare name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    bundled = SCENARIO_DIR / (p.name if p.suffix else p.name + ".json")
    if bundled.exists():
        return bundled
    raise ScenarioError(f"no scenario at {path}")


def bundled_scenarios() -> list[Path]:
    return sorted(SCENARIO_DIR.glob("*.json"))


@dataclass
class RunReport:
    scenario: Scenario
    trace: ExecutionTrace
    audits: dict[str, AuditReport]
    facts: dict[str, TraceFacts]
    mismatches: list[str] = field(default_factory=list)

    def verdicts(self, t: int | None = None, audit: str | None = None, props: Iterable[str] = PROPERTIES) -> dict[str, PropertyVerdict]:
        audit = audit if audit is not None else self.last_audit
        report = self.audits[audit]
        if t is not None:
            report = report.at_threshold(t)
        return {p: check_facts(p, self.facts[audit], report) for p in props}

    @property
    def last_audit(self) -> str:
        if not self.audits:
            raise ScenarioError(f"scenario {self.scenario.name} has no audit")
        return list(self.audits)[-1]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def summary_lines(self) -> list[str]:
        cfg = self.scenario.cfg
        lines = [f"scenario {self.scenario.name}: model={cfg.model} n={cfg.n} f={cfg.f} tau={cfg.tau} t={cfg.t} seed={self.scenario.seed}"]
        for aid, rep in self.audits.items():
            lines.append(f"audit {aid} quorum={','.join(map(str, sorted(rep.quorum)))}")
            lines += ["  " + ln for ln in rep.lines()] or ["  (no evidences)"]
            for v in self.verdicts(cfg.t, aid).values():
                lines.append("  " + v.line())
        lines += [f"MISMATCH {m}" for m in self.mismatches]
        return lines

    def json_lines(self) -> list[str]:
        cfg = self.scenario.cfg
        trace_text = self.trace.to_jsonl()
        rows: list[dict] = []
        for aid, rep in self.audits.items():
            rows.append({"type": "audit", "audit": aid, **rep.to_json()})
            for v in self.verdicts(cfg.t, aid).values():
                rows.append({
                    "type": "verdict",
                    "audit": aid,
                    "t": cfg.t,
                    "property": v.property,
                    "holds": v.holds,
                    "witness": None if v.holds else [v.witness[0], str(v.witness[1])],
                })
        rows.append({
            "type": "run",
            "scenario": self.scenario.name,
            "model": cfg.model,
            "n": cfg.n,
            "f": cfg.f,
            "tau": cfg.tau,
            "t": cfg.t,
            "seed": self.scenario.seed,
            "events": len(self.trace),
            "trace_sha256": hashlib.sha256(trace_text.encode()).hexdigest(),
            "expectations_met": self.ok,
            "mismatches": self.mismatches,
        })
        return [json.dumps(r, sort_keys=True) for r in rows]


def execute(scen: Scenario) -> tuple[AuditableRegister, dict[str, AuditReport]]:
    reg = AuditableRegister(scen.cfg, scen.scripts, scen.readers, seed=scen.seed, priority=scen.priority)
    audits: dict[str, AuditReport] = {}
    for step in scen.steps:
        # set the clock without settling: messages due now land after this step's own
        reg.clock = step["clock"]
        op = step["op"]
        late = {k: lt["due"] for lt in step.get("late", []) for k in scen.objects(lt["to"])}
        deliver = scen.objects(step["deliver"]) if "deliver" in step else None
        try:
            if op == "write":
                label = reg.a_write(step["writer"], step["value"].encode(), deliver, late)
                expected = scen.labels[step.get("as", step["id"])]
                if label != expected:
                    raise RunFailure(f"write {step['id']} got label {label}, expected {expected}")
            elif op == "read":
                targets = scen.objects(step["targets"]) if "targets" in step else None
                request = scen.label(step["request"]) if "request" in step else None
                reg.a_read(step["reader"], targets, deliver, late, request)
            elif op == "audit":
                quorum = scen.objects(step["quorum"]) if "quorum" in step else None
                audits[step["id"]] = reg.a_audit(step.get("auditor", "a1"), quorum)
            elif op == "crash":
                reg.crash(step["process"])
            reg.settle()
        except AuditBlocked as exc:
            raise RunFailure(f"step {step['id']} blocked: {exc}") from exc
        except ValueError as exc:
            raise RunFailure(f"step {step['id']}: {exc}") from exc
    return reg, audits


def run(scen: Scenario) -> RunReport:
    reg, audits = execute(scen)
    facts = {
        aid: TraceFacts.from_trace(reg.trace, until=rep.invoked_at) for aid, rep in audits.items()
    }
    report = RunReport(scen, reg.trace, audits, facts)
    for e in scen.expect:
        aid = e.audit if e.audit is not None else report.last_audit
        got = report.verdicts(e.t, aid, e.verdicts)
        for prop, want in e.verdicts.items():
            if got[prop].holds != want:
                report.mismatches.append(f"audit {aid} t={e.t} {prop}: expected {want}, got {got[prop].holds}")
        for reader, alias, count in e.records:
            have = audits[aid].records_for(reader, scen.label(alias))
            if have != count:
                report.mismatches.append(f"audit {aid} records for {reader}/{alias}: expected {count}, got {have}")
    return report


@dataclass(frozen=True)
class SweepCell:
    model: str
    n: int
    tau: int
    t: int
    verdicts: Mapping[str, bool] | None  # None: the template does not fit these parameters
    witnesses: Mapping[str, tuple[str, str] | None] = field(default_factory=dict)


def sweep(
    template: str | os.PathLike,
    taus: Iterable[int],
    ts: Iterable[int],
    ns: Iterable[int] | None = None,
    models: Iterable[str] | None = None,
) -> list[SweepCell]:
    """Run the template once per (model, n, tau) and judge it at every t."""
    path = resolve_path(template)
    doc = json.loads(path.read_text())
    ns = list(ns) if ns is not None else [doc["cfg"]["n"]]
    models = list(models) if models is not None else [doc["cfg"].get("model", "fast")]
    ts = list(ts)
    cells = []
    for model in models:
        for n in ns:
            for tau in taus:
                try:
                    scen = instantiate(doc, n=n, tau=tau, t=1, model=model)
                    rep = run(scen)
                except (ScenarioError, RunFailure):
                    cells += [SweepCell(model, n, tau, t, None) for t in ts]
                    continue
                for t in ts:
                    if t > n:
                        cells.append(SweepCell(model, n, tau, t, None))
                        continue
                    vs = rep.verdicts(t)
                    cells.append(SweepCell(
                        model, n, tau, t,
                        {p: v.holds for p, v in vs.items()},
                        {p: None if v.holds else (v.witness[0], str(v.witness[1])) for p, v in vs.items()},
                    ))
    return cells


def render_sweep(cells: list[SweepCell]) -> str:
    lines = ["model          n  tau  t  completeness  weak_accuracy  strong_accuracy"]
    for c in cells:
        if c.verdicts is None:
            cols = ["n/a"] * 3
        else:
            cols = ["ok" if c.verdicts[p] else "VIOLATED" for p in PROPERTIES]
        lines.append(f"{c.model:<14} {c.n:>1}  {c.tau:>3}  {c.t:>1}  {cols[0]:<12}  {cols[1]:<13}  {cols[2]}")
    return "\n".join(lines)
