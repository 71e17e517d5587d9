"""Threshold information dispersal: Shamir sharing per payload byte over GF(257).

Each byte of a value is the constant term of a random polynomial of degree
tau - 1; object k receives the evaluation at x = k.  Any tau blocks of one
label reconstruct the value, fewer reveal nothing about it.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

PRIME = 257
MAX_PAYLOAD = 64


class DispersalError(ValueError):
    pass


class InvalidParams(DispersalError):
    pass


class InsufficientBlocks(DispersalError):
    pass


class MixedLabels(DispersalError):
    pass


class DuplicateIndex(DispersalError):
    pass


@dataclass(frozen=True, order=False)
class Label:
    """Identifies one a-write invocation.  Ordered by (seq, writer)."""

    writer: str
    seq: int

    def key(self) -> tuple[int, str]:
        return (self.seq, self.writer)

    def __lt__(self, other: "Label") -> bool:
        return self.key() < other.key()

    def __le__(self, other: "Label") -> bool:
        return self.key() <= other.key()

    def __gt__(self, other: "Label") -> bool:
        return self.key() > other.key()

    def __ge__(self, other: "Label") -> bool:
        return self.key() >= other.key()

    def __str__(self) -> str:
        return f"{self.writer}:{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        writer, _, seq = text.rpartition(":")
        if not writer:
            raise ValueError(f"malformed label {text!r}")
        return cls(writer, int(seq))


@dataclass(frozen=True)
class CodecParams:
    n: int
    tau: int

    def __post_init__(self) -> None:
        if self.n < 1 or not 1 <= self.tau <= self.n:
            raise InvalidParams(f"need 1 <= tau <= n, got n={self.n} tau={self.tau}")


@dataclass(frozen=True)
class Block:
    label: Label
    index: int
    share: tuple[int, ...]


class Codec(Protocol):
    def split(self, value: bytes, label: Label, params: CodecParams) -> list[Block]: ...

    def combine(self, blocks: Iterable[Block], params: CodecParams) -> bytes: ...


def _coefficient_stream(label: Label, params: CodecParams, count: int) -> list[int]:
    # Keyed counter-mode stream; rejection sampling keeps coefficients uniform mod PRIME.
    key = f"{label}|{params.n}|{params.tau}".encode()
    out: list[int] = []
    counter = 0
    while len(out) < count:
        digest = hashlib.blake2b(key + counter.to_bytes(8, "big"), digest_size=64).digest()
        for i in range(0, len(digest), 2):
            word = int.from_bytes(digest[i:i + 2], "big")
            if word < 65535 - (65535 % PRIME):
                out.append(word % PRIME)
                if len(out) == count:
                    break
        counter += 1
    return out


def _eval(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % PRIME
    return acc


def lagrange_at_zero(points: Sequence[tuple[int, int]]) -> int:
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i != j:
                num = num * (-xj) % PRIME
                den = den * (xi - xj) % PRIME
        total = (total + yi * num * pow(den, PRIME - 2, PRIME)) % PRIME
    return total


class ShamirCodec:
    """Shamir-style dispersal over GF(257) with evaluation points x = index."""

    def split(self, value: bytes, label: Label, params: CodecParams) -> list[Block]:
        if not value:
            raise DispersalError("value must be non-empty")
        if len(value) > MAX_PAYLOAD:
            raise DispersalError(f"value longer than {MAX_PAYLOAD} bytes")
        degree = params.tau - 1
        stream = _coefficient_stream(label, params, degree * len(value))
        polys = [
            [byte] + stream[i * degree:(i + 1) * degree]
            for i, byte in enumerate(value)
        ]
        return [
            Block(label, k, tuple(_eval(p, k) for p in polys))
            for k in range(1, params.n + 1)
        ]

    def combine(self, blocks: Iterable[Block], params: CodecParams) -> bytes:
        blocks = list(blocks)
        if len({b.label for b in blocks}) > 1:
            raise MixedLabels("blocks carry different labels")
        indices = [b.index for b in blocks]
        if len(set(indices)) != len(indices):
            raise DuplicateIndex("two blocks share an index")
        if len(blocks) < params.tau:
            raise InsufficientBlocks(f"{len(blocks)} blocks, need {params.tau}")
        chosen = sorted(blocks, key=lambda b: b.index)[: params.tau]
        width = len(chosen[0].share)
        out = []
        for pos in range(width):
            byte = lagrange_at_zero([(b.index, b.share[pos]) for b in chosen])
            if byte > 255:
                raise DispersalError("blocks are inconsistent")
            out.append(byte)
        return bytes(out)


DEFAULT_CODEC = ShamirCodec()


def split(value: bytes, label: Label, params: CodecParams) -> list[Block]:
    return DEFAULT_CODEC.split(value, label, params)


def combine(blocks: Iterable[Block], params: CodecParams) -> bytes:
    return DEFAULT_CODEC.combine(blocks, params)
