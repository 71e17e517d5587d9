"""Unforgeable read-request tokens standing in for reader signatures."""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field

from .dispersal import Label


@dataclass(frozen=True)
class SignedToken:
    reader: str
    label: Label | None  # None: generic scope, valid for any value
    nonce: int

    @property
    def generic(self) -> bool:
        return self.label is None

    def to_json(self) -> dict:
        return {
            "reader": self.reader,
            "label": None if self.label is None else str(self.label),
            "nonce": self.nonce,
        }


@dataclass
class TokenRegistry:
    """The trusted environment: mints tokens and observes who received them.

    Only the registry creates tokens, so a faulty object can at most replay a
    token it was handed; the verifier checks both facts.
    """

    seed: int = 0
    minted: set[SignedToken] = field(default_factory=set)
    received: dict[int, set[SignedToken]] = field(default_factory=lambda: defaultdict(set))

    def __post_init__(self) -> None:
        self._rng = random.Random(self.seed)

    def mint(self, reader: str, label: Label | None = None) -> SignedToken:
        token = SignedToken(reader, label, self._rng.getrandbits(48))
        while token in self.minted:
            token = SignedToken(reader, label, self._rng.getrandbits(48))
        self.minted.add(token)
        return token

    def note_received(self, obj: int, token: SignedToken) -> None:
        self.received[obj].add(token)

    def is_minted(self, token: SignedToken) -> bool:
        return token in self.minted
