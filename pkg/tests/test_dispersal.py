import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arsim.dispersal import (
    MAX_PAYLOAD,
    PRIME,
    Block,
    CodecParams,
    DispersalError,
    DuplicateIndex,
    InsufficientBlocks,
    InvalidParams,
    Label,
    MixedLabels,
    combine,
    split,
)

L = Label("w1", 1)


def solve_constant_term(points):
    """Independent decoder: Gaussian elimination on the Vandermonde system mod PRIME."""
    k = len(points)
    rows = [[pow(x, j, PRIME) for j in range(k)] + [y] for x, y in points]
    for col in range(k):
        pivot = next(r for r in range(col, k) if rows[r][col] % PRIME)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        inv = pow(rows[col][col], PRIME - 2, PRIME)
        rows[col] = [v * inv % PRIME for v in rows[col]]
        for r in range(k):
            if r != col and rows[r][col]:
                factor = rows[r][col]
                rows[r] = [(a - factor * b) % PRIME for a, b in zip(rows[r], rows[col])]
    return rows[0][k]


def test_round_trip_small():
    blocks = split(b"hello", L, CodecParams(5, 3))
    assert [b.index for b in blocks] == [1, 2, 3, 4, 5]
    assert combine(blocks[1:4], CodecParams(5, 3)) == b"hello"


def test_split_is_deterministic_per_label():
    p = CodecParams(4, 2)
    assert split(b"abc", L, p) == split(b"abc", L, p)
    assert split(b"abc", L, p) != split(b"abc", Label("w1", 2), p)


@pytest.mark.parametrize("n", range(1, 8))
def test_every_tau_subset_decodes_and_matches_gauss(n):
    value = bytes([0, 7, 255, 128])
    for tau in range(1, n + 1):
        params = CodecParams(n, tau)
        blocks = split(value, L, params)
        for subset in itertools.combinations(blocks, tau):
            assert combine(subset, params) == value
            for pos in range(len(value)):
                assert solve_constant_term([(b.index, b.share[pos]) for b in subset]) == value[pos]
        if tau > 1:
            for subset in itertools.combinations(blocks, tau - 1):
                with pytest.raises(InsufficientBlocks):
                    combine(subset, params)


def candidate_secrets(shares, tau):
    """Brute force: secrets s for which some polynomial of degree tau-1 matches the shares.

    Enumerates s and all free coefficients but the top one, which the first
    share then pins down; the remaining shares must agree.
    """
    (x0, y0), rest = shares[0], shares[1:]
    found = set()
    for s in range(256):
        for middle in itertools.product(range(PRIME), repeat=tau - 2):
            partial = [s, *middle]
            acc = sum(c * pow(x0, j, PRIME) for j, c in enumerate(partial)) % PRIME
            top = (y0 - acc) * pow(pow(x0, tau - 1, PRIME), PRIME - 2, PRIME) % PRIME
            coeffs = partial + [top]
            if all(sum(c * pow(x, j, PRIME) for j, c in enumerate(coeffs)) % PRIME == y for x, y in rest):
                found.add(s)
                break
    return found


@pytest.mark.parametrize("n,tau", [(3, 2), (4, 2), (4, 3), (5, 3)])
def test_fewer_than_tau_blocks_fit_many_secrets(n, tau):
    params = CodecParams(n, tau)
    blocks = split(b"\x2a", L, params)
    for subset in itertools.combinations(blocks, tau - 1):
        found = candidate_secrets([(b.index, b.share[0]) for b in subset], tau)
        assert 0x2A in found
        assert len(found) >= 2


def test_errors():
    p = CodecParams(4, 2)
    blocks = split(b"ab", L, p)
    other = split(b"ab", Label("w2", 2), p)
    with pytest.raises(MixedLabels):
        combine([blocks[0], other[1]], p)
    with pytest.raises(DuplicateIndex):
        combine([blocks[0], blocks[0]], p)
    with pytest.raises(InvalidParams):
        CodecParams(3, 4)
    with pytest.raises(InvalidParams):
        CodecParams(3, 0)
    with pytest.raises(DispersalError):
        split(b"", L, p)
    with pytest.raises(DispersalError):
        split(b"x" * (MAX_PAYLOAD + 1), L, p)


def test_inconsistent_blocks_are_detected_or_decode_differently():
    p = CodecParams(3, 2)
    a, b, _ = split(b"\x00", L, p)
    tampered = Block(L, b.index, ((b.share[0] + 1) % PRIME,))
    try:
        assert combine([a, tampered], p) != b"\x00"
    except DispersalError:
        pass


def test_label_order_and_text():
    assert Label("w2", 1) < Label("w1", 2)
    assert Label("a", 3) < Label("b", 3)
    assert Label.parse(str(Label("w:1", 4))) == Label("w:1", 4)
    with pytest.raises(ValueError):
        Label.parse("noseq")


@settings(max_examples=60, deadline=None)
@given(
    value=st.binary(min_size=1, max_size=16),
    n=st.integers(1, 7),
    data=st.data(),
)
def test_round_trip_property(value, n, data):
    tau = data.draw(st.integers(1, n))
    params = CodecParams(n, tau)
    blocks = split(value, L, params)
    chosen = data.draw(st.permutations(blocks)).copy()[:tau]
    assert combine(chosen, params) == value
