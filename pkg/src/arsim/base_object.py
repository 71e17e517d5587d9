"""Loggable R/W registers: the n base objects, correct or scripted-faulty."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .dispersal import Block, Label
from .tokens import SignedToken, TokenRegistry

WILDCARD = None  # label slot in omit_block_to meaning "any label"


class NoResponse(Exception):
    """The object does not answer this request (crash, omission, bad signature)."""


@dataclass(frozen=True)
class ReadRecord:
    reader: str
    label: Label
    # Neither field takes part in equality: logs are sets of (reader, label).
    token: SignedToken | None = field(default=None, compare=False)
    fabricated: bool = field(default=False, compare=False, repr=False)

    def __str__(self) -> str:
        return f"<{self.reader}, {self.label}>"


@dataclass(frozen=True)
class FaultScript:
    is_faulty: bool = False
    omit_block_to: frozenset[tuple[str, Label | None]] = frozenset()
    omit_records_to_audit: bool = False
    fabricate: frozenset[ReadRecord] = frozenset()
    crash_after_event: int | None = None

    def __post_init__(self) -> None:
        deviates = (
            self.omit_block_to
            or self.omit_records_to_audit
            or self.fabricate
            or self.crash_after_event is not None
        )
        if deviates and not self.is_faulty:
            raise ValueError("a deviating fault script must be marked faulty")

    def omits_block(self, reader: str, label: Label | None) -> bool:
        return (reader, WILDCARD) in self.omit_block_to or (
            label is not None and (reader, label) in self.omit_block_to
        )


CORRECT = FaultScript()


@dataclass
class ObjectState:
    index: int
    fault: FaultScript = CORRECT
    stored: Block | None = None
    log: set[ReadRecord] = field(default_factory=set)
    received_tokens: set[SignedToken] = field(default_factory=set)
    crashed: bool = False

    @property
    def faulty(self) -> bool:
        return self.fault.is_faulty


def rw_write(obj: ObjectState, block: Block) -> str:
    if block.index != obj.index:
        raise ValueError(f"block {block.index} sent to object {obj.index}")
    if obj.crashed:
        raise NoResponse(obj.index)
    obj.stored = block
    return "ack"


def _signature_ok(
    reader: str,
    token: SignedToken | None,
    requested_label: Label | None,
    registry: TokenRegistry,
) -> bool:
    if token is None or token.reader != reader or not registry.is_minted(token):
        return False
    return token.generic or token.label == requested_label


def rw_read(
    obj: ObjectState,
    reader: str,
    requested_label: Label | None = None,
    token: SignedToken | None = None,
    registry: TokenRegistry | None = None,
) -> Block | None:
    """Serve a read; returns the stored block or None for the empty register.

    With ``requested_label`` (second round of a non-fast read) the object only
    serves and logs when it holds exactly that label.  With a ``registry`` the
    request must carry a valid token, checked by correct objects.
    """
    if obj.crashed:
        raise NoResponse(obj.index)
    if token is not None:
        obj.received_tokens.add(token)
        if registry is not None:
            registry.note_received(obj.index, token)
    stored = obj.stored
    if obj.faulty:
        if obj.fault.omits_block(reader, stored.label if stored else None):
            raise NoResponse(obj.index)
    elif registry is not None and not _signature_ok(reader, token, requested_label, registry):
        raise NoResponse(obj.index)
    if stored is None:
        return None
    if requested_label is not None and stored.label != requested_label:
        return None
    obj.log.add(ReadRecord(reader, stored.label, token))
    return stored


def rw_read_label(obj: ObjectState) -> Label | None:
    """Metadata query used by the first round of non-fast reads; never logged."""
    if obj.crashed:
        raise NoResponse(obj.index)
    return obj.stored.label if obj.stored is not None else None


def _replay_token(obj: ObjectState, record: ReadRecord) -> SignedToken | None:
    mine = sorted(
        (tok for tok in obj.received_tokens if tok.reader == record.reader),
        key=lambda tok: (tok.label != record.label, not tok.generic, tok.nonce),
    )
    return mine[0] if mine else None


def rw_get_log(obj: ObjectState) -> frozenset[ReadRecord]:
    if obj.crashed:
        raise NoResponse(obj.index)
    if not obj.faulty:
        return frozenset(obj.log)
    kept: set[ReadRecord] = set() if obj.fault.omit_records_to_audit else set(obj.log)
    for rec in obj.fault.fabricate:
        if rec in kept:
            continue
        kept.add(ReadRecord(rec.reader, rec.label, _replay_token(obj, rec), fabricated=True))
    return frozenset(kept)


def make_objects(n: int, scripts: Iterable[FaultScript] | None = None) -> list[ObjectState]:
    scripts = list(scripts) if scripts is not None else [CORRECT] * n
    if len(scripts) != n:
        raise ValueError(f"{len(scripts)} fault scripts for {n} objects")
    return [ObjectState(k, script) for k, script in enumerate(scripts, start=1)]
