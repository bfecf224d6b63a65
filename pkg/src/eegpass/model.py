"""Domain types: signal samples, quantized levels, pels and templates.

A *pel* (password element) is a maximal span of password characters that
share one required (attention, relaxation) pattern.  Requirements use five
quantized levels plus a wildcard that accepts any level.  This module owns
the level scale, the sticky quantizer, the canonical pel byte encoding and
the bracket notation used to write templates down.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .errors import InputError, TemplateSyntaxError

MAX_PELS = 6
MAX_PEL_CHARS = 64
MAX_PASSWORD_CHARS = 256

# Characters that would collide with the template notation's delimiters.
_FORBIDDEN_IN_CHARS = set(",]\t\n\r")

WILDCARD_SYMBOL = "0"


class StateLevel(IntEnum):
    """Quantized signal band, ordered S < L < N < R < H."""

    S = 0  # low
    L = 1  # reduced
    N = 2  # normal
    R = 3  # increased
    H = 4  # high

    @property
    def symbol(self) -> str:
        return self.name

    @classmethod
    def from_symbol(cls, symbol: str) -> "StateLevel":
        try:
            return cls[symbol]
        except KeyError:
            raise InputError(f"unknown level symbol {symbol!r}") from None


#: A requirement is either a concrete level or the wildcard (None),
#: written ``0`` in template notation.
RequiredLevel = Optional[StateLevel]
WILDCARD: RequiredLevel = None

LEVELS = tuple(StateLevel)


def matches(required: RequiredLevel, observed: StateLevel) -> bool:
    """Wildcard accepts every level; a concrete requirement only itself."""
    return required is None or required == observed


def required_from_symbol(symbol: str) -> RequiredLevel:
    if symbol == WILDCARD_SYMBOL:
        return WILDCARD
    return StateLevel.from_symbol(symbol)


def required_symbol(required: RequiredLevel) -> str:
    return WILDCARD_SYMBOL if required is None else required.symbol


@dataclass(frozen=True)
class QuantizerConfig:
    """Band edges and the sticky margin used near them.

    Bands are [0,e1), [e1,e2), [e2,e3), [e3,e4), [e4,100].  The margin must
    be smaller than the narrowest gap between edges so the sticky zones of
    neighbouring edges cannot overlap a whole band.
    """

    band_edges: tuple[int, int, int, int] = (20, 40, 60, 80)
    hysteresis_margin: int = 5

    def __post_init__(self) -> None:
        edges = self.band_edges
        if len(edges) != 4 or any(not 0 < e < 100 for e in edges):
            raise InputError(f"band edges must be four integers in (0,100): {edges!r}")
        if any(a >= b for a, b in zip(edges, edges[1:])):
            raise InputError(f"band edges must be strictly ascending: {edges!r}")
        if self.hysteresis_margin < 0:
            raise InputError("hysteresis margin must be >= 0")
        min_gap = min(b - a for a, b in zip(edges, edges[1:]))
        if self.hysteresis_margin >= min_gap:
            raise InputError(
                f"hysteresis margin {self.hysteresis_margin} must be smaller "
                f"than the minimum edge gap {min_gap}"
            )


DEFAULT_QUANTIZER = QuantizerConfig()


def quantize(
    value: int,
    prev: StateLevel | None = None,
    cfg: QuantizerConfig = DEFAULT_QUANTIZER,
) -> StateLevel:
    """Map a 0-100 signal value to its band, sticky near edges.

    When ``prev`` is given and ``value`` falls in a band adjacent to
    ``prev``'s within ``hysteresis_margin`` of the edge separating the two,
    the previous level is kept.  Threading the returned level back in as
    ``prev`` for the next sample suppresses flicker while a value wobbles
    around one edge.
    """
    if not isinstance(value, int) or isinstance(value, bool):
        raise InputError(f"signal value must be an integer, got {value!r}")
    if not 0 <= value <= 100:
        raise InputError(f"signal value out of range 0-100: {value}")
    idx = bisect_right(cfg.band_edges, value)
    if prev is not None and abs(int(prev) - idx) == 1:
        edge = cfg.band_edges[min(int(prev), idx)]
        if abs(value - edge) <= cfg.hysteresis_margin:
            return prev
    return LEVELS[idx]


def band_center(level: StateLevel, cfg: QuantizerConfig = DEFAULT_QUANTIZER) -> int:
    """Midpoint of a band; a safe target value for holding that level."""
    bounds = (0, *cfg.band_edges, 100)
    return (bounds[int(level)] + bounds[int(level) + 1]) // 2


@dataclass(frozen=True)
class SignalSample:
    """One reading from the headset: two 0-100 scalars at a session time."""

    t_ms: int
    attention: int
    meditation: int

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise InputError(f"sample time must be non-negative: {self.t_ms}")
        for name in ("attention", "meditation"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 100:
                raise InputError(f"{name} out of range 0-100: {v!r}")


def _check_chars(chars: str) -> None:
    if not chars:
        raise InputError("pel chars must be non-empty")
    if len(chars) > MAX_PEL_CHARS:
        raise InputError(f"pel chars longer than {MAX_PEL_CHARS} code points")
    bad = _FORBIDDEN_IN_CHARS.intersection(chars)
    if bad:
        raise InputError(f"pel chars may not contain {sorted(bad)!r}")
    if chars != chars.strip(" "):
        raise InputError("pel chars may not start or end with a space")


@dataclass(frozen=True)
class Pel:
    """A password segment plus its required attention/relaxation levels.

    Both requirements may be wildcards; such a pel is legal but adds no
    state entropy (the analysis module flags it).
    """

    chars: str
    att: RequiredLevel
    rel: RequiredLevel

    def __post_init__(self) -> None:
        _check_chars(self.chars)

    @property
    def pattern(self) -> tuple[RequiredLevel, RequiredLevel]:
        return (self.att, self.rel)

    @property
    def wildcards(self) -> int:
        return (self.att is None) + (self.rel is None)


@dataclass(frozen=True)
class ObservedPel:
    """Authentication-time counterpart of a pel: levels always concrete."""

    chars: str
    att: StateLevel
    rel: StateLevel

    def __post_init__(self) -> None:
        _check_chars(self.chars)
        if not isinstance(self.att, StateLevel) or not isinstance(self.rel, StateLevel):
            raise InputError("observed levels must be concrete")

    @property
    def pattern(self) -> tuple[StateLevel, StateLevel]:
        return (self.att, self.rel)


@dataclass(frozen=True)
class PelTemplate:
    """Ordered pels whose chars concatenate to the full password.

    Adjacent pels must differ in their (att, rel) requirement pair,
    otherwise they would have been one span.
    """

    pels: tuple[Pel, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pels", tuple(self.pels))
        n = len(self.pels)
        if not 1 <= n <= MAX_PELS:
            raise InputError(f"template must have 1-{MAX_PELS} pels, got {n}")
        for a, b in zip(self.pels, self.pels[1:]):
            if a.pattern == b.pattern:
                raise InputError(
                    f"adjacent pels {a.chars!r} and {b.chars!r} share the same "
                    "requirement pattern and should have been merged"
                )
        if len(self.password) > MAX_PASSWORD_CHARS:
            raise InputError(f"password longer than {MAX_PASSWORD_CHARS} code points")

    @property
    def n(self) -> int:
        return len(self.pels)

    @property
    def password(self) -> str:
        return "".join(p.chars for p in self.pels)


PEL_ENCODING_VERSION = 0x01


def encode_pel(pel: ObservedPel) -> bytes:
    """Canonical byte form hashed by the MAC layer.

    Layout: version 0x01, 2-byte big-endian length of the UTF-8 chars, the
    UTF-8 chars, then one ASCII byte each for the attention and relaxation
    level.  The length prefix makes the encoding injective: no two distinct
    pels, and no two distinct pel sequences, concatenate to the same bytes.
    """
    data = pel.chars.encode("utf-8")
    return (
        bytes([PEL_ENCODING_VERSION])
        + struct.pack(">H", len(data))
        + data
        + pel.att.symbol.encode("ascii")
        + pel.rel.symbol.encode("ascii")
    )


_LEVEL_SYMBOLS = frozenset("SLNRH" + WILDCARD_SYMBOL)


class _Scanner:
    """Cursor over template notation; skips whitespace between tokens."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise TemplateSyntaxError(
                f"expected {ch!r} at position {self.pos}, found {found!r}"
            )
        self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def until(self, stops: str) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in stops:
            self.pos += 1
        if self.pos >= len(self.text):
            raise TemplateSyntaxError(f"unterminated field starting at {start}")
        return self.text[start : self.pos].strip()

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def parse_template(text: str) -> PelTemplate:
    """Parse ``[[chars,lvl,lvl],...]`` notation into a template.

    Levels are S/L/N/R/H or 0 for the wildcard.  Whitespace around
    delimiters is ignored; chars may not contain ``,`` or ``]``.  The input
    must already satisfy the span rule (adjacent pels differing in
    pattern); nothing is merged here.
    """
    sc = _Scanner(text)
    sc.expect("[")
    pels = []
    while True:
        sc.expect("[")
        chars = sc.until(",")
        sc.expect(",")
        att = sc.until(",")
        sc.expect(",")
        rel = sc.until("],")
        sc.expect("]")
        for sym in (att, rel):
            if sym not in _LEVEL_SYMBOLS:
                raise TemplateSyntaxError(f"unknown level symbol {sym!r}")
        try:
            pels.append(
                Pel(chars, required_from_symbol(att), required_from_symbol(rel))
            )
        except InputError as exc:
            raise TemplateSyntaxError(str(exc)) from None
        if sc.peek() == ",":
            sc.expect(",")
            continue
        break
    sc.expect("]")
    if not sc.at_end():
        raise TemplateSyntaxError(f"trailing input at position {sc.pos}")
    return PelTemplate(tuple(pels))


def format_template(template: PelTemplate) -> str:
    """Inverse of parse_template; emits no whitespace."""
    parts = (
        f"[{p.chars},{required_symbol(p.att)},{required_symbol(p.rel)}]"
        for p in template.pels
    )
    return "[" + ",".join(parts) + "]"
