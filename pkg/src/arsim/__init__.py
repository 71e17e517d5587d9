"""Deterministic simulator for auditable register emulations over loggable objects."""
from .audit import AuditBlocked, AuditReport, Evidence, a_audit, build_report, verify_record
from .base_object import FaultScript, ObjectState, ReadRecord, rw_get_log, rw_read, rw_write
from .dispersal import Block, CodecParams, Label, ShamirCodec, combine, split
from .emulation import MODELS, AuditableRegister, ModelConfig, ReadOutcome
from .oracle import (
    COMPLETENESS,
    PROPERTIES,
    STRONG_ACCURACY,
    WEAK_ACCURACY,
    WEAK_ACCURACY_PER_VALUE,
    PropertyVerdict,
    check,
    effective_reads,
    providing_sets,
)
from .tokens import SignedToken, TokenRegistry
from .trace import Event, ExecutionTrace

__version__ = "0.1.0"
