"""a-write / a-read protocols over n loggable objects, driven by the scheduler.

One ``AuditableRegister`` is one execution.  Callers (the scenario runner,
the search) advance ``clock`` step by step and pass per-object delivery
schedules; every low-level action lands in ``trace``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import audit as audit_mod
from .audit import AuditBlocked
from .base_object import (
    FaultScript,
    NoResponse,
    make_objects,
    rw_get_log,
    rw_read,
    rw_read_label,
    rw_write,
)
from .dispersal import DEFAULT_CODEC, Block, Codec, CodecParams, Label
from .scheduler import NEVER, Scheduler
from .tokens import SignedToken, TokenRegistry
from .trace import ExecutionTrace

READ_MODES = ("fast", "non_fast")
SIGNING = ("none", "generic", "specific")

MODELS: dict[str, dict] = {
    "fast": dict(read_mode="fast", signing="none", total_order=False),
    "signed": dict(read_mode="fast", signing="generic", total_order=False),
    "total": dict(read_mode="fast", signing="none", total_order=True),
    "total-signed": dict(read_mode="fast", signing="generic", total_order=True),
    "nonfast": dict(read_mode="non_fast", signing="none", total_order=False),
    "nonfast-signed": dict(read_mode="non_fast", signing="specific", total_order=False),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n: int
    f: int
    tau: int
    t: int = 1
    read_mode: str = "fast"
    signing: str = "none"
    total_order: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0 <= self.f < self.n:
            raise ConfigError(f"need 0 <= f < n, got f={self.f} n={self.n}")
        if not self.f < self.tau <= self.n:
            raise ConfigError(f"need f < tau <= n, got tau={self.tau}")
        if not 1 <= self.t <= self.n:
            raise ConfigError(f"need 1 <= t <= n, got t={self.t}")
        if self.read_mode not in READ_MODES:
            raise ConfigError(f"read_mode must be one of {READ_MODES}")
        if self.signing not in SIGNING:
            raise ConfigError(f"signing must be one of {SIGNING}")
        if self.signing == "specific" and self.read_mode != "non_fast":
            raise ConfigError("value-specific tokens need the label up front: non_fast reads only")

    @classmethod
    def for_model(cls, model: str, **kw) -> "ModelConfig":
        if model not in MODELS:
            raise ConfigError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
        return cls(**kw, **MODELS[model])

    @property
    def model(self) -> str:
        mine = dict(read_mode=self.read_mode, signing=self.signing, total_order=self.total_order)
        for name, spec in MODELS.items():
            if spec == mine:
                return name
        return f"{self.read_mode}/{self.signing}/{'to' if self.total_order else 'async'}"

    @property
    def params(self) -> CodecParams:
        return CodecParams(self.n, self.tau)

    @property
    def quorum_size(self) -> int:
        return self.n - self.f

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ReadOutcome:
    reader: str
    blocks_received: frozenset[Block]
    recovered: bytes | None
    values: Mapping[Label, bytes] = field(default_factory=dict)


@dataclass
class _Msg:
    op_id: str
    sender: str
    obj: int
    kind: str
    block: Block | None = None
    requested: Label | None = None
    token: SignedToken | None = None


@dataclass
class _Op:
    op_id: str
    client: str
    kind: str
    schedule: dict[int, tuple[int | None, bool]] = field(default_factory=dict)
    responses: int = 0
    done: bool = False
    # non-fast reads
    labels: dict[int, Label | None] = field(default_factory=dict)
    selected: Label | None = None
    logs: dict[int, frozenset] = field(default_factory=dict)


Schedule = Mapping[int, tuple[int | None, bool]]


class AuditableRegister:
    def __init__(
        self,
        cfg: ModelConfig,
        scripts: Sequence[FaultScript] | None = None,
        readers: Mapping[str, bool] | None = None,
        seed: int = 0,
        priority: Mapping[int, int] | None = None,
        codec: Codec = DEFAULT_CODEC,
    ) -> None:
        self.cfg = cfg
        self.codec = codec
        self.objects = make_objects(cfg.n, scripts)
        faulty = [o.index for o in self.objects if o.faulty]
        if len(faulty) > cfg.f:
            raise ConfigError(f"{len(faulty)} faulty objects exceed f={cfg.f}")
        self.readers = dict(readers or {})
        self.trace = ExecutionTrace(
            meta={
                "n": cfg.n,
                "f": cfg.f,
                "tau": cfg.tau,
                "model": cfg.model,
                "readers": dict(self.readers),
                "faulty_objects": faulty,
            }
        )
        self.sched = Scheduler(dict(priority or {}))
        self.tokens = TokenRegistry(seed) if cfg.signing != "none" else None
        self.clock = 0
        self._writes = 0
        self._op_count = 0
        self._ops: dict[str, _Op] = {}
        self._blocks: dict[str, dict[Label, dict[int, Block]]] = {}
        self._values: dict[str, dict[Label, bytes]] = {}
        self.crashed: set[str] = set()

    # scheduling helpers

    def _schedule(
        self,
        targets: Iterable[int],
        deliver: Iterable[int] | None,
        late: Mapping[int, int] | None,
    ) -> dict[int, tuple[int | None, bool]]:
        targets = sorted(set(targets))
        late = dict(late or {})
        bad = set(late) - set(targets)
        if bad:
            raise ValueError(f"late deliveries to non-targets {sorted(bad)}")
        now = set(targets) - set(late) if deliver is None else set(deliver)
        if now - set(targets):
            raise ValueError("deliver set must be a subset of targets")
        if now & set(late):
            raise ValueError("an object cannot get both immediate and late delivery")
        if self.cfg.total_order and (late or now != set(targets)):
            raise ValueError("total order delivers every request within its own step")
        sched: dict[int, tuple[int | None, bool]] = {}
        for k in targets:
            if k in now:
                sched[k] = (self.clock, False)
            elif k in late:
                if late[k] < self.clock:
                    raise ValueError(f"late delivery to {k} scheduled in the past")
                sched[k] = (late[k], True)
            else:
                sched[k] = (NEVER, False)
        return sched

    def _post(self, op: _Op, msg: _Msg) -> None:
        due, is_late = op.schedule[msg.obj]
        if due is not NEVER and due < self.clock:
            due, is_late = self.clock, False
        self.sched.post(msg, msg.obj, due, is_late)

    def _new_op(self, client: str, kind: str, schedule: dict) -> _Op:
        if client in self.crashed:
            raise ValueError(f"{client} has crashed")
        self._op_count += 1
        op = _Op(f"{kind}#{self._op_count}", client, kind, schedule)
        self._ops[op.op_id] = op
        self.trace.record("invoke", client, kind, op_id=op.op_id)
        return op

    def settle(self) -> None:
        for msg in self.sched.pop_due(self.clock):
            self._deliver(msg)

    def advance(self, clock: int) -> None:
        self.clock = max(self.clock, clock)
        self.settle()

    # high-level operations

    def a_write(
        self,
        writer: str,
        value: bytes,
        deliver: Iterable[int] | None = None,
        late: Mapping[int, int] | None = None,
    ) -> Label:
        """Split ``value`` and send block k to object k per the schedule."""
        self._writes += 1
        label = Label(writer, self._writes)
        blocks = self.codec.split(value, label, self.cfg.params)
        everyone = [o.index for o in self.objects if not (self.cfg.total_order and o.crashed)]
        op = self._new_op(writer, "a_write", self._schedule(everyone, deliver, late))
        self.trace.events[-1].data["label"] = str(label)
        for b in blocks:
            if b.index in op.schedule:
                self._post(op, _Msg(op.op_id, writer, b.index, "rw_write", block=b))
        self.settle()
        return label

    def a_read(
        self,
        reader: str,
        targets: Iterable[int] | None = None,
        deliver: Iterable[int] | None = None,
        late: Mapping[int, int] | None = None,
        request: Label | None = None,
    ) -> str:
        if self.cfg.read_mode == "fast":
            if request is not None:
                raise ValueError("fast reads do not request a label")
            return self.a_read_fast(reader, targets, deliver, late)
        return self.a_read_nonfast(reader, targets, deliver, late, request)

    def _check_targets(self, reader: str, targets: Iterable[int] | None) -> list[int]:
        everyone = [o.index for o in self.objects]
        targets = everyone if targets is None else sorted(set(targets))
        if self.readers.get(reader, True) and targets != everyone:
            raise ValueError(f"correct reader {reader} must address all {self.cfg.n} objects")
        if reader not in self.readers:
            self.readers[reader] = True
            self.trace.meta["readers"][reader] = True
        return targets

    def a_read_fast(
        self,
        reader: str,
        targets: Iterable[int] | None = None,
        deliver: Iterable[int] | None = None,
        late: Mapping[int, int] | None = None,
    ) -> str:
        targets = self._check_targets(reader, targets)
        op = self._new_op(reader, "a_read", self._schedule(targets, deliver, late))
        token = self.tokens.mint(reader) if self.tokens is not None else None
        for k in targets:
            self._post(op, _Msg(op.op_id, reader, k, "rw_read", token=token))
        self.settle()
        return op.op_id

    def a_read_nonfast(
        self,
        reader: str,
        targets: Iterable[int] | None = None,
        deliver: Iterable[int] | None = None,
        late: Mapping[int, int] | None = None,
        request: Label | None = None,
    ) -> str:
        """Two-round read: learn the newest label held by n - f objects, then fetch it.

        A faulty reader may skip the first round by naming ``request`` directly.
        If no label reaches n - f holders the read never enters round two.
        """
        targets = self._check_targets(reader, targets)
        if request is not None and self.readers.get(reader, True):
            raise ValueError("correct readers learn the label in round one")
        op = self._new_op(reader, "a_read", self._schedule(targets, deliver, late))
        if request is not None:
            self._start_round_two(op, request)
        else:
            for k in targets:
                self._post(op, _Msg(op.op_id, reader, k, "rw_read_label"))
        self.settle()
        return op.op_id

    def _start_round_two(self, op: _Op, label: Label) -> None:
        op.selected = label
        token = None
        if self.tokens is not None:
            scope = label if self.cfg.signing == "specific" else None
            token = self.tokens.mint(op.client, scope)
        for k in sorted(op.schedule):
            self._post(op, _Msg(op.op_id, op.client, k, "rw_read", requested=label, token=token))

    def a_audit(
        self,
        auditor: str = "a1",
        quorum: Iterable[int] | None = None,
        t: int | None = None,
    ) -> audit_mod.AuditReport:
        """Gather logs from all n objects and build evidences from the first n - f."""
        cfg = self.cfg
        if quorum is None:
            live = [o.index for o in self.objects if not o.crashed]
            live.sort(key=lambda k: self.sched.priority.get(k, k))
            quorum = live[: cfg.quorum_size]
        quorum = sorted(set(quorum))
        if len(quorum) != cfg.quorum_size:
            raise ValueError(f"auditing quorum must have n - f = {cfg.quorum_size} objects")
        sched = {k: ((self.clock, False) if k in quorum else (NEVER, False)) for k in range(1, cfg.n + 1)}
        op = self._new_op(auditor, "a_audit", sched)
        invoked_at = self.trace.next_ordinal - 1
        for k in range(1, cfg.n + 1):
            self._post(op, _Msg(op.op_id, auditor, k, "rw_get_log"))
        self.settle()
        if len(op.logs) < cfg.quorum_size:
            missing = sorted(set(quorum) - set(op.logs))
            raise AuditBlocked(f"audit {op.op_id} heard from {len(op.logs)} objects; silent: {missing}")
        report = audit_mod.build_report(
            op.logs,
            t if t is not None else cfg.t,
            signing=cfg.signing,
            registry=self.tokens,
            invoked_at=invoked_at,
        )
        op.done = True
        self.trace.record(
            "respond",
            auditor,
            "a_audit",
            op_id=op.op_id,
            evidences=[e.line() for e in sorted(report.evidences, key=audit_mod.evidence_key)],
        )
        return report

    def crash(self, process: str) -> None:
        self.crashed.add(process)
        self.trace.record("crash", process, "crash")
        self.sched.drop(lambda m: m.sender == process)

    def sequence(self, requests: Iterable[Mapping]) -> list:
        """Run high-level operations one at a time, each fully delivered.

        Stands in for total-order broadcast: every write reaches all live
        objects before the next operation starts.
        """
        if not self.cfg.total_order:
            raise ConfigError("sequence() needs total_order=True")
        results = []
        for req in requests:
            self.clock += 1
            req = dict(req)
            kind = req.pop("op")
            if kind == "write":
                results.append(self.a_write(req["writer"], req["value"]))
            elif kind == "read":
                results.append(self.a_read(req["reader"], req.get("targets")))
            elif kind == "audit":
                results.append(self.a_audit(req.get("auditor", "a1"), req.get("quorum"), req.get("t")))
            else:
                raise ValueError(f"unknown op {kind!r}")
        return results

    # delivery

    def _deliver(self, msg: _Msg) -> None:
        obj = self.objects[msg.obj - 1]
        crash_at = obj.fault.crash_after_event
        if crash_at is not None and not obj.crashed and self.trace.next_ordinal > crash_at:
            obj.crashed = True
            self.trace.record("crash", f"o{obj.index}", "crash", obj=obj.index)
        if obj.crashed:
            return
        op = self._ops[msg.op_id]
        data = {"op_id": msg.op_id}
        if msg.block is not None:
            data["label"] = str(msg.block.label)
        if msg.requested is not None:
            data["requested"] = str(msg.requested)
        if msg.token is not None:
            data["token"] = msg.token.to_json()
        self.trace.record("deliver", msg.sender, msg.kind, obj=msg.obj, **data)
        try:
            if msg.kind == "rw_write":
                rw_write(obj, msg.block)
                self.trace.record("respond", msg.sender, "rw_write", obj=msg.obj, op_id=msg.op_id, ack=True)
                self._on_ack(op)
            elif msg.kind == "rw_read":
                block = rw_read(obj, msg.sender, msg.requested, msg.token, self.tokens)
                self.trace.record(
                    "respond",
                    msg.sender,
                    "rw_read",
                    obj=msg.obj,
                    op_id=msg.op_id,
                    label=None if block is None else str(block.label),
                )
                self._on_block(op, block)
            elif msg.kind == "rw_read_label":
                label = rw_read_label(obj)
                self.trace.record(
                    "respond",
                    msg.sender,
                    "rw_read_label",
                    obj=msg.obj,
                    op_id=msg.op_id,
                    label=None if label is None else str(label),
                )
                self._on_label(op, msg.obj, label)
            elif msg.kind == "rw_get_log":
                log = rw_get_log(obj)
                op.logs[msg.obj] = log
                self.trace.record(
                    "respond",
                    msg.sender,
                    "rw_get_log",
                    obj=msg.obj,
                    op_id=msg.op_id,
                    records=sorted(f"{r.reader}|{r.label}" for r in log),
                    fabricated=sorted(f"{r.reader}|{r.label}" for r in log if r.fabricated),
                )
            else:
                raise ValueError(f"unknown message kind {msg.kind}")
        except NoResponse:
            pass

    def _on_ack(self, op: _Op) -> None:
        op.responses += 1
        if not op.done and op.responses >= self.cfg.quorum_size:
            op.done = True
            self.trace.record("respond", op.client, "a_write", op_id=op.op_id)

    def _on_block(self, op: _Op, block: Block | None) -> None:
        reader = op.client
        if block is not None:
            held = self._blocks.setdefault(reader, {}).setdefault(block.label, {})
            held[block.index] = block
            if len(held) == self.cfg.tau:
                value = self.codec.combine(held.values(), self.cfg.params)
                self._values.setdefault(reader, {})[block.label] = value
        op.responses += 1
        if not op.done and op.responses >= self.cfg.quorum_size:
            op.done = True
            recovered = self.outcome(reader).recovered
            self.trace.record(
                "respond", reader, "a_read", op_id=op.op_id, recovered=None if recovered is None else recovered.hex()
            )

    def _on_label(self, op: _Op, obj: int, label: Label | None) -> None:
        op.labels[obj] = label
        if op.selected is not None:
            return
        counts: dict[Label, int] = {}
        for held in op.labels.values():
            if held is not None:
                counts[held] = counts.get(held, 0) + 1
        qualifying = [lab for lab, c in counts.items() if c >= self.cfg.quorum_size]
        if qualifying:
            self._start_round_two(op, max(qualifying))

    # inspection

    def outcome(self, reader: str) -> ReadOutcome:
        held = self._blocks.get(reader, {})
        values = dict(self._values.get(reader, {}))
        blocks = frozenset(b for per_label in held.values() for b in per_label.values())
        recovered = values[max(values)] if values else None
        return ReadOutcome(reader, blocks, recovered, values)

    def selected_label(self, op_id: str) -> Label | None:
        return self._ops[op_id].selected

    def collect_logs(self) -> dict[int, frozenset]:
        """Logs every live object would hand an auditor right now (no events recorded)."""
        out = {}
        for obj in self.objects:
            try:
                out[obj.index] = rw_get_log(obj)
            except NoResponse:
                continue
        return out
