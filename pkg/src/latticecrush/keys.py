"""Combinatorial 8-digit design keys for thin-walled lattice cross-sections.

Each digit selects one geometric option of the unit cell: vertex treatment,
vertex sub-option, horizontal/vertical edge segment counts, horizontal/
vertical edge styles, interior support, and the interior circle sub-option.
Keys are serialized as 8-character ASCII digit strings everywhere (CSV
columns, CLI arguments, file names).
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

KEY_LENGTH = 8

# Design-space size the key system is nominally quoted to contain.  The
# geometric deduplication in enumerate_keys() reports its achieved count
# alongside this figure instead of forcing agreement.
NOMINAL_UNIQUE_DESIGNS = 660

SEGMENT_CHOICES = (2, 3, 4)

THICKNESS_RANGE_MM = (0.25, 0.75)
LOG10_RATE_RANGE = (2.0, 5.0)


class VertexStyle(IntEnum):
    """Corner treatment of the unit-cell bounding box."""

    AS_IS = 0
    STRAIGHT_EDGE = 1  # corner chamfered; sub-option picks the chamfer style
    ARC = 2  # corner replaced by a quarter circle; sub-option picks in/out


class EdgeStyle(IntEnum):
    STRAIGHT = 0
    TWO_ARCS = 1


class InteriorStyle(IntEnum):
    NONE = 0
    PLUS = 1
    CROSS = 2


class KeyFormatError(ValueError):
    """Key string is not exactly 8 ASCII digits."""


class KeyDomainError(ValueError):
    """A digit lies outside its allowed range."""

    def __init__(self, digit_index: int, value: int, allowed: tuple[int, ...]) -> None:
        self.digit_index = digit_index
        self.value = value
        self.allowed = tuple(allowed)
        choices = ",".join(str(a) for a in self.allowed)
        super().__init__(f"digit {digit_index} is {value}, allowed values are {{{choices}}}")


_DIGIT_RANGES: tuple[tuple[int, tuple[int, ...]], ...] = (
    (1, (0, 1, 2)),
    (2, (0, 1)),
    (3, SEGMENT_CHOICES),
    (4, SEGMENT_CHOICES),
    (5, (0, 1)),
    (6, (0, 1)),
    (7, (0, 1, 2)),
    (8, (0, 1)),
)


@dataclass(frozen=True, order=True)
class DesignKey:
    """Validated descriptor of one lattice cross-section design.

    Fields follow the digit order, so dataclass ordering coincides with
    lexicographic ordering of the formatted key strings.
    """

    vertex_style: VertexStyle = VertexStyle.AS_IS
    vertex_sub: int = 0
    h_segments: int = 2
    v_segments: int = 2
    h_edge_style: EdgeStyle = EdgeStyle.STRAIGHT
    v_edge_style: EdgeStyle = EdgeStyle.STRAIGHT
    interior: InteriorStyle = InteriorStyle.NONE
    interior_sub: int = 0

    def __post_init__(self) -> None:
        for (index, allowed), value in zip(_DIGIT_RANGES, self.digits()):
            if value not in allowed:
                raise KeyDomainError(index, value, allowed)

    def digits(self) -> tuple[int, ...]:
        return (
            int(self.vertex_style),
            self.vertex_sub,
            self.h_segments,
            self.v_segments,
            int(self.h_edge_style),
            int(self.v_edge_style),
            int(self.interior),
            self.interior_sub,
        )

    @property
    def is_canonical(self) -> bool:
        if self.vertex_style is VertexStyle.AS_IS and self.vertex_sub != 0:
            return False
        if self.interior is InteriorStyle.NONE and self.interior_sub != 0:
            return False
        return True

    def __str__(self) -> str:
        return format_key(self)


def parse_key(text: str) -> DesignKey:
    """Parse an 8-digit key string into a canonicalized DesignKey.

    Raises KeyFormatError for anything that is not 8 ASCII digits and
    KeyDomainError (naming the offending digit) for out-of-range values.
    """
    if not isinstance(text, str) or len(text) != KEY_LENGTH or not text.isascii() or not text.isdigit():
        raise KeyFormatError(f"key must be exactly {KEY_LENGTH} ASCII digits, got {text!r}")
    values = [int(ch) for ch in text]
    for (index, allowed), value in zip(_DIGIT_RANGES, values):
        if value not in allowed:
            raise KeyDomainError(index, value, allowed)
    key = DesignKey(
        vertex_style=VertexStyle(values[0]),
        vertex_sub=values[1],
        h_segments=values[2],
        v_segments=values[3],
        h_edge_style=EdgeStyle(values[4]),
        v_edge_style=EdgeStyle(values[5]),
        interior=InteriorStyle(values[6]),
        interior_sub=values[7],
    )
    return canonicalize(key)


def format_key(key: DesignKey) -> str:
    return "".join(str(d) for d in key.digits())


def canonicalize(key: DesignKey) -> DesignKey:
    """Force don't-care sub-option digits to 0.  Idempotent."""
    vsub = 0 if key.vertex_style is VertexStyle.AS_IS else key.vertex_sub
    isub = 0 if key.interior is InteriorStyle.NONE else key.interior_sub
    if vsub == key.vertex_sub and isub == key.interior_sub:
        return key
    return replace(key, vertex_sub=vsub, interior_sub=isub)


@functools.lru_cache(maxsize=1)
def enumerate_canonical() -> tuple[DesignKey, ...]:
    """All canonical keys in lexicographic digit order (no geometry pass)."""
    keys = []
    ranges = [allowed for _, allowed in _DIGIT_RANGES]
    for digits in itertools.product(*ranges):
        key = DesignKey(
            vertex_style=VertexStyle(digits[0]),
            vertex_sub=digits[1],
            h_segments=digits[2],
            v_segments=digits[3],
            h_edge_style=EdgeStyle(digits[4]),
            v_edge_style=EdgeStyle(digits[5]),
            interior=InteriorStyle(digits[6]),
            interior_sub=digits[7],
        )
        if key.is_canonical:
            keys.append(key)
    return tuple(keys)


@dataclass(frozen=True)
class KeyEnumeration:
    """Canonical enumeration plus its geometric deduplication."""

    canonical: tuple[DesignKey, ...]
    deduplicated: tuple[DesignKey, ...]

    @property
    def raw_count(self) -> int:
        return len(self.canonical)

    @property
    def dedup_count(self) -> int:
        return len(self.deduplicated)


@functools.lru_cache(maxsize=1)
def enumerate_keys() -> KeyEnumeration:
    """Enumerate canonical keys and remove geometric duplicates.

    Two keys are duplicates when their rasterized 2x2 tessellations are
    bit-identical; the lexicographically smallest key of each equivalence
    class is kept.  The raw canonical count and the deduplicated count are
    both exposed so any gap to NOMINAL_UNIQUE_DESIGNS stays visible.
    """
    from .geometry import build_unit_cell, scale_to_box, tessellate
    from .raster import rasterize

    canonical = enumerate_canonical()
    kept: list[DesignKey] = []
    seen: set[bytes] = set()
    for key in canonical:
        cell = build_unit_cell(key, 10.0)
        image = rasterize(scale_to_box(tessellate(cell, 2, 2), 20.0))
        signature = image.bits.tobytes()
        if signature not in seen:
            seen.add(signature)
            kept.append(key)
    return KeyEnumeration(canonical=canonical, deduplicated=tuple(kept))


def sample_design(
    rng: np.random.Generator, enumeration: KeyEnumeration | None = None
) -> tuple[DesignKey, float, float]:
    """Draw one (key, wall thickness mm, strain rate 1/s) crush input.

    Keys are uniform over the deduplicated enumeration, thickness uniform
    on [0.25, 0.75] mm, and the strain rate log-uniform on [1e2, 1e5] 1/s.
    Deterministic for a given generator state.
    """
    if enumeration is None:
        enumeration = enumerate_keys()
    keys = enumeration.deduplicated
    key = keys[int(rng.integers(len(keys)))]
    thickness = float(rng.uniform(*THICKNESS_RANGE_MM))
    rate = float(10.0 ** rng.uniform(*LOG10_RATE_RANGE))
    return key, thickness, rate
