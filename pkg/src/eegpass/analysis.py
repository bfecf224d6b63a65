"""Security arithmetic: keyspace growth, pool combinatorics, guessing odds.

Binding states to characters multiplies the per-character alphabet by 25
(5 attention x 5 relaxation levels); accepting any pel order hands back
log2(n!) bits.  ``guess_success`` estimates an attacker's chance under an
explicit knowledge model, exactly where the accept set is enumerable and
by seeded Monte Carlo otherwise.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InputError
from .model import (
    LEVELS,
    ObservedPel,
    PelTemplate,
    StateLevel,
    matches,
)
from .segmentation import AnnotatedChar, segment

STATES_PER_CHAR = len(LEVELS) ** 2  # 25
DEFAULT_ALPHABET = 94  # printable ASCII sans space

ENUM_CAP = 1_000_000
POOL_ENUM_CAP = 10_000
EXACT_GUESSES_CAP = 1_000_000


@dataclass(frozen=True)
class KeyspaceResult:
    count: int
    bits: float


def keyspace(alphabet_size: int, length: int, with_states: bool) -> KeyspaceResult:
    """Search space of a length-``length`` password, optionally state-bound.

    Without states: alphabet_size**length.  With states every character
    carries one of 25 level pairs, multiplying the alphabet by 25.
    Arbitrary precision; ``bits`` is log2 of the count.
    """
    if alphabet_size < 1 or length < 1:
        raise InputError("alphabet_size and length must be >= 1")
    base = alphabet_size * STATES_PER_CHAR if with_states else alphabet_size
    count = base**length
    return KeyspaceResult(count, math.log2(count))


@dataclass(frozen=True)
class CandidateSurface:
    """Effect of a client submitting k hash candidates per attempt."""

    pool_size: int
    acceptance_events: int


@dataclass(frozen=True)
class PoolStats:
    """Combinatorics of one template's acceptable-value pool."""

    orders: int
    expansions: int
    pool_size: int
    closed_form: int
    exact: bool
    entropy_loss_bits: float
    fully_wildcard_pels: int

    def candidate_surface(self, candidates: int) -> CandidateSurface:
        """k candidates leave the pool fixed but test membership k times."""
        if candidates < 1:
            raise InputError("candidates must be >= 1")
        return CandidateSurface(self.pool_size, candidates)


def expanded_pel_choices(template: PelTemplate) -> list[list[tuple[str, StateLevel, StateLevel]]]:
    """Per pel, every concrete (chars, att, rel) its requirements allow."""
    choices = []
    for pel in template.pels:
        atts = list(LEVELS) if pel.att is None else [pel.att]
        rels = list(LEVELS) if pel.rel is None else [pel.rel]
        choices.append([(pel.chars, a, r) for a in atts for r in rels])
    return choices


def _distinct_sequence_count(template: PelTemplate) -> int:
    """Distinct (permutation x expansion) pel sequences, key-independent.

    Equals orders x expansions unless the template repeats a pel; MAC
    collisions aside, this is exactly the pool's size.
    """
    seen = set()
    for combo in itertools.product(*expanded_pel_choices(template)):
        for perm in itertools.permutations(combo):
            seen.add(perm)
    return len(seen)


def pool_stats(template: PelTemplate) -> PoolStats:
    """Closed-form pool accounting, enumeration-checked when small."""
    orders = math.factorial(template.n)
    expansions = 1
    for pel in template.pels:
        expansions *= len(LEVELS) ** pel.wildcards
    closed = orders * expansions
    if closed <= POOL_ENUM_CAP:
        size = _distinct_sequence_count(template)
        exact = True
    else:
        size = closed
        exact = False
    return PoolStats(
        orders=orders,
        expansions=expansions,
        pool_size=size,
        closed_form=closed,
        exact=exact,
        entropy_loss_bits=math.log2(orders),
        fully_wildcard_pels=sum(1 for p in template.pels if p.wildcards == 2),
    )


def matches_template(template: PelTemplate, submitted: Sequence[ObservedPel]) -> bool:
    """Direct statement of the acceptance rule, no hashing involved.

    Accepted when the submitted pels are some permutation of the template's
    pels, character-exact, with every concrete requirement met and
    wildcards free.  Serves as an independent oracle and drives the attack
    simulation.
    """
    if len(submitted) != template.n:
        return False
    for perm in itertools.permutations(template.pels):
        ok = all(
            t.chars == s.chars and matches(t.att, s.att) and matches(t.rel, s.rel)
            for t, s in zip(perm, submitted)
        )
        if ok:
            return True
    return False


@dataclass(frozen=True)
class AttackerModel:
    """What the attacker already knows, and how many tries they get.

    ``knows_states`` presumes the segmentation is visible too (state
    requirements are attached to pels), so it implies
    ``knows_segmentation``.  Without ``knows_chars`` the characters come
    from an ``alphabet_size`` alphabet assumed to cover the password; the
    password's length is taken as known either way.
    """

    knows_chars: bool = False
    knows_segmentation: bool = False
    knows_states: bool = False
    guesses: int = 1
    alphabet_size: int = DEFAULT_ALPHABET

    def __post_init__(self) -> None:
        if self.guesses < 1:
            raise InputError("guesses must be >= 1")
        if self.alphabet_size < 1:
            raise InputError("alphabet_size must be >= 1")
        if self.knows_states and not self.knows_segmentation:
            object.__setattr__(self, "knows_segmentation", True)


@dataclass(frozen=True)
class GuessEstimate:
    probability: float
    exact: Fraction | None
    method: str  # "exact", "approximate" or "monte-carlo"
    space: int
    accepted: int | None


def _char_level_accept_set(
    template: PelTemplate,
) -> set[tuple[str, tuple[tuple[StateLevel, StateLevel], ...]]]:
    """All (string, per-char states) pairs the span rule maps into the pool.

    Enumerates permutations x concrete state assignments; renderings where
    two adjacent pels carry one pattern are dropped, because typing them
    produces a single merged span and hence a different pel sequence.
    """
    accept = set()
    choices = {
        pel: [
            (a, r)
            for a in (list(LEVELS) if pel.att is None else [pel.att])
            for r in (list(LEVELS) if pel.rel is None else [pel.rel])
        ]
        for pel in template.pels
    }
    for perm in itertools.permutations(template.pels):
        text = "".join(p.chars for p in perm)
        for assignment in itertools.product(*(choices[p] for p in perm)):
            if any(a == b for a, b in zip(assignment, assignment[1:])):
                continue
            states = tuple(
                pattern
                for pel, pattern in zip(perm, assignment)
                for _ in pel.chars
            )
            accept.add((text, states))
    return accept


def _char_level_enum_labels(template: PelTemplate) -> int:
    expansions = 1
    for pel in template.pels:
        expansions *= len(LEVELS) ** pel.wildcards
    return math.factorial(template.n) * expansions


def _seg_level_counts(
    template: PelTemplate, attacker: AttackerModel
) -> tuple[int, int]:
    """(space, accepted) in closed form for segmentation-aware attackers.

    Counts are over labelled draws (order x per-pel chars x per-pel states,
    the state factor dropping out when the attacker knows the states); a
    template that repeats one pel verbatim counts each repetition
    separately, a measure-zero simplification.
    """
    length = len(template.password)
    orders = math.factorial(template.n)
    expansions = 1
    for pel in template.pels:
        expansions *= len(LEVELS) ** pel.wildcards

    space = orders
    accepted = orders
    if not attacker.knows_chars:
        space *= attacker.alphabet_size**length
    if not attacker.knows_states:
        space *= STATES_PER_CHAR**template.n
        accepted *= expansions
    return space, accepted


def _random_string(rng: random.Random, alphabet_size: int, length: int) -> str:
    # Alphabet identity is irrelevant to the odds; code points from 33 up.
    return "".join(chr(33 + rng.randrange(alphabet_size)) for _ in range(length))


def _draw_seg_level(
    template: PelTemplate, attacker: AttackerModel, rng: random.Random
) -> tuple:
    order = list(range(template.n))
    rng.shuffle(order)
    parts = []
    for idx in order:
        pel = template.pels[idx]
        chars = (
            pel.chars
            if attacker.knows_chars
            else _random_string(rng, attacker.alphabet_size, len(pel.chars))
        )
        if attacker.knows_states:
            att = pel.att if pel.att is not None else rng.choice(LEVELS)
            rel = pel.rel if pel.rel is not None else rng.choice(LEVELS)
        else:
            att = rng.choice(LEVELS)
            rel = rng.choice(LEVELS)
        parts.append((chars, att, rel))
    return tuple(parts)


def _draw_char_level(
    template: PelTemplate, attacker: AttackerModel, rng: random.Random
) -> tuple:
    length = len(template.password)
    text = (
        template.password
        if attacker.knows_chars
        else _random_string(rng, attacker.alphabet_size, length)
    )
    states = tuple((rng.choice(LEVELS), rng.choice(LEVELS)) for _ in range(length))
    return (text, states)


def _accepts_seg_level(template: PelTemplate, draw: tuple) -> bool:
    try:
        pels = [ObservedPel(chars, att, rel) for chars, att, rel in draw]
    except InputError:
        return False
    return matches_template(template, pels)


def _accepts_char_level(template: PelTemplate, draw: tuple) -> bool:
    text, states = draw
    chars = [AnnotatedChar(ch, att, rel) for ch, (att, rel) in zip(text, states)]
    return matches_template(template, segment(chars))


def guess_success(
    template: PelTemplate,
    attacker: AttackerModel,
    seed: int = 0,
    runs: int = 10_000,
    method: str = "auto",
) -> GuessEstimate:
    """Chance that ``guesses`` distinct uniform draws contain an accepted one.

    Where the accept set is enumerable the result is the exact
    hypergeometric ratio (a Fraction); otherwise a seeded Monte Carlo
    estimate over ``runs`` trials.  ``method`` can force ``"monte-carlo"``
    to cross-check the exact path.
    """
    if runs < 1:
        raise InputError("runs must be >= 1")
    if method not in ("auto", "exact", "monte-carlo"):
        raise InputError(f"unknown method {method!r}")

    if attacker.knows_segmentation:
        space, accepted = _seg_level_counts(template, attacker)
    else:
        length = len(template.password)
        base = STATES_PER_CHAR * (
            1 if attacker.knows_chars else attacker.alphabet_size
        )
        space = base**length
        if _char_level_enum_labels(template) <= ENUM_CAP:
            accept_set = _char_level_accept_set(template)
            if attacker.knows_chars:
                accepted = sum(
                    1 for text, _ in accept_set if text == template.password
                )
            else:
                accepted = len(accept_set)
        else:
            accepted = None

    if method != "monte-carlo" and accepted is not None:
        return _exact_estimate(space, accepted, attacker.guesses)
    if method == "exact":
        raise InputError("accept set too large for an exact answer")
    return _monte_carlo(template, attacker, seed, runs, space)


def _exact_estimate(space: int, accepted: int, guesses: int) -> GuessEstimate:
    guesses = min(guesses, space)
    if accepted >= space:
        return GuessEstimate(1.0, Fraction(1), "exact", space, accepted)
    if guesses > space - accepted:
        # Too many distinct misses do not exist; a hit is forced.
        return GuessEstimate(1.0, Fraction(1), "exact", space, accepted)
    if guesses > EXACT_GUESSES_CAP:
        p = -math.expm1(guesses * math.log1p(-accepted / space))
        return GuessEstimate(p, None, "approximate", space, accepted)
    miss = Fraction(math.comb(space - accepted, guesses), math.comb(space, guesses))
    exact = 1 - miss
    return GuessEstimate(float(exact), exact, "exact", space, accepted)


def _monte_carlo(
    template: PelTemplate,
    attacker: AttackerModel,
    seed: int,
    runs: int,
    space: int,
) -> GuessEstimate:
    rng = random.Random(seed)
    if attacker.knows_segmentation:
        draw, accepts = _draw_seg_level, _accepts_seg_level
    else:
        draw, accepts = _draw_char_level, _accepts_char_level
    guesses = min(attacker.guesses, space)
    successes = 0
    for _ in range(runs):
        seen: set = set()
        hit = False
        while len(seen) < guesses:
            d = draw(template, attacker, rng)
            if d in seen:
                continue
            seen.add(d)
            if accepts(template, d):
                hit = True
                break
        successes += hit
    return GuessEstimate(successes / runs, None, "monte-carlo", space, None)


def render_report(
    template: PelTemplate,
    attacker: AttackerModel | None = None,
    seed: int = 0,
    fmt: str = "text",
    alphabet_size: int = DEFAULT_ALPHABET,
) -> str:
    """Security report for one template, as an aligned table or JSON records."""
    stats = pool_stats(template)
    length = len(template.password)
    plain = keyspace(alphabet_size, length, with_states=False)
    bound = keyspace(alphabet_size, length, with_states=True)
    rows: list[tuple[str, object]] = [
        ("password_length", length),
        ("pels", template.n),
        ("keyspace_plain", plain.count),
        ("keyspace_plain_bits", round(plain.bits, 3)),
        ("keyspace_with_states", bound.count),
        ("keyspace_with_states_bits", round(bound.bits, 3)),
        ("keyspace_ratio", bound.count // plain.count),
        ("pool_orders", stats.orders),
        ("pool_expansions", stats.expansions),
        ("pool_size", stats.pool_size),
        ("pool_size_exact", stats.exact),
        ("order_entropy_loss_bits", round(stats.entropy_loss_bits, 6)),
        ("fully_wildcard_pels", stats.fully_wildcard_pels),
    ]
    if attacker is not None:
        est = guess_success(template, attacker, seed=seed)
        rows += [
            ("attacker_knows_chars", attacker.knows_chars),
            ("attacker_knows_segmentation", attacker.knows_segmentation),
            ("attacker_knows_states", attacker.knows_states),
            ("attacker_guesses", attacker.guesses),
            ("attack_space", est.space),
            ("attack_success", est.probability),
            ("attack_success_exact", str(est.exact) if est.exact is not None else "-"),
            ("attack_method", est.method),
        ]
    if fmt == "records":
        return "\n".join(
            json.dumps({"field": k, "value": _json_value(v)}) for k, v in rows
        )
    if fmt != "text":
        raise InputError(f"unknown report format {fmt!r}")
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def _json_value(v: object) -> object:
    if isinstance(v, bool) or isinstance(v, float) or isinstance(v, str):
        return v
    if isinstance(v, int):
        # Counts can exceed what JSON consumers reliably parse; stringify.
        return v if abs(v) < 2**53 else str(v)
    return str(v)
