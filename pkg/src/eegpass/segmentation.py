"""Turn (keystroke, signal) streams into observed pels.

At login time each keystroke is annotated with the quantized levels of the
most recent sample, and maximal runs of one pattern become pels.  Near a
band edge the quantizer can still flip mid-span and split a pel spuriously;
``candidate_segmentations`` produces a small set of alternative readings by
re-merging suspicious boundaries, so the client can submit more than one
hash candidate.  At enrolment time ``infer_template`` recovers the intended
template from repeated trials.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass

from .errors import (
    EnrolmentMismatchError,
    InputError,
    SignalGapError,
    TemplateTooFragmentedError,
)
from .model import (
    DEFAULT_QUANTIZER,
    MAX_PELS,
    WILDCARD,
    ObservedPel,
    Pel,
    PelTemplate,
    QuantizerConfig,
    RequiredLevel,
    SignalSample,
    StateLevel,
    quantize,
)

MAX_CANDIDATES = 16
MIN_ENROLMENT_TRIALS = 3
DEFAULT_MIN_AGREEMENT = 0.8


@dataclass(frozen=True)
class KeyEvent:
    ch: str
    t_ms: int

    def __post_init__(self) -> None:
        if len(self.ch) != 1:
            raise InputError(f"key event must carry one code point, got {self.ch!r}")
        if self.t_ms < 0:
            raise InputError("key time must be non-negative")


@dataclass(frozen=True)
class AnnotatedChar:
    """A typed character with the levels (and raw values) in force at its time.

    Raw values are kept so later stages can tell whether a level flip
    happened close to a band edge; they are absent for synthetic chars.
    """

    ch: str
    att: StateLevel
    rel: StateLevel
    raw_att: int | None = None
    raw_rel: int | None = None

    @property
    def pattern(self) -> tuple[StateLevel, StateLevel]:
        return (self.att, self.rel)


def _check_strictly_increasing(times: list[int], what: str) -> None:
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise InputError(f"{what} timestamps must be strictly increasing")


def annotate(
    keys: list[KeyEvent],
    samples: list[SignalSample],
    cfg: QuantizerConfig = DEFAULT_QUANTIZER,
) -> list[AnnotatedChar]:
    """Attach quantized levels to each keystroke.

    A key takes the levels of the most recent sample at or before it, with
    hysteresis threaded through the samples in time order.  A key with no
    preceding sample is a signal gap.
    """
    if not keys:
        raise InputError("no keystrokes to annotate")
    _check_strictly_increasing([k.t_ms for k in keys], "key")
    _check_strictly_increasing([s.t_ms for s in samples], "sample")

    att_levels: list[StateLevel] = []
    rel_levels: list[StateLevel] = []
    prev_att: StateLevel | None = None
    prev_rel: StateLevel | None = None
    for s in samples:
        prev_att = quantize(s.attention, prev_att, cfg)
        prev_rel = quantize(s.meditation, prev_rel, cfg)
        att_levels.append(prev_att)
        rel_levels.append(prev_rel)

    sample_times = [s.t_ms for s in samples]
    out = []
    for key in keys:
        i = bisect_right(sample_times, key.t_ms) - 1
        if i < 0:
            raise SignalGapError(
                f"no signal sample at or before keystroke at t={key.t_ms}ms"
            )
        out.append(
            AnnotatedChar(
                key.ch,
                att_levels[i],
                rel_levels[i],
                raw_att=samples[i].attention,
                raw_rel=samples[i].meditation,
            )
        )
    return out


def segment(chars: list[AnnotatedChar]) -> list[ObservedPel]:
    """Collapse maximal same-pattern runs into observed pels."""
    if not chars:
        raise InputError("nothing to segment")
    pels = []
    start = 0
    for i in range(1, len(chars) + 1):
        if i == len(chars) or chars[i].pattern != chars[start].pattern:
            run = chars[start:i]
            pels.append(
                ObservedPel(
                    "".join(c.ch for c in run), run[0].att, run[0].rel
                )
            )
            start = i
    return pels


def _runs(chars: list[AnnotatedChar]) -> list[tuple[int, int]]:
    """(start, end) index pairs of maximal same-pattern runs."""
    bounds = []
    start = 0
    for i in range(1, len(chars) + 1):
        if i == len(chars) or chars[i].pattern != chars[start].pattern:
            bounds.append((start, i))
            start = i
    return bounds


def _majority_pattern(
    chars: list[AnnotatedChar], start: int, end: int
) -> tuple[StateLevel, StateLevel]:
    counts = Counter(c.pattern for c in chars[start:end])
    best = counts.most_common()
    top = best[0][1]
    # Ties go to the pattern appearing earliest in the span.
    for c in chars[start:end]:
        if counts[c.pattern] == top:
            return c.pattern
    return best[0][0]


@dataclass(frozen=True)
class _Run:
    start: int
    end: int
    att: StateLevel
    rel: StateLevel


def _mergeable(
    chars: list[AnnotatedChar], a: _Run, b: _Run, cfg: QuantizerConfig
) -> bool:
    """True when the boundary between two runs looks like edge flicker.

    Requires the patterns to differ in exactly one signal by exactly one
    level, and the raw value of that signal on either side of the boundary
    to sit within the hysteresis margin of the edge separating the levels.
    """
    att_diff = a.att != b.att
    rel_diff = a.rel != b.rel
    if att_diff == rel_diff:
        return False
    if att_diff:
        la, lb = a.att, b.att
        raws = (chars[a.end - 1].raw_att, chars[b.start].raw_att)
    else:
        la, lb = a.rel, b.rel
        raws = (chars[a.end - 1].raw_rel, chars[b.start].raw_rel)
    if abs(int(la) - int(lb)) != 1:
        return False
    edge = cfg.band_edges[min(int(la), int(lb))]
    return any(
        raw is not None and abs(raw - edge) <= cfg.hysteresis_margin for raw in raws
    )


def candidate_segmentations(
    chars: list[AnnotatedChar],
    max_candidates: int = MAX_CANDIDATES,
    cfg: QuantizerConfig = DEFAULT_QUANTIZER,
) -> list[list[ObservedPel]]:
    """The plain segmentation plus bounded re-merges of flicker boundaries.

    Candidates are ordered fewest-merges-first, then leftmost-merge-first,
    deduplicated, and capped at ``max_candidates``.  A merged pel takes the
    majority pattern of its span.
    """
    if max_candidates < 1:
        raise InputError("max_candidates must be >= 1")
    base = tuple(
        _Run(s, e, chars[s].att, chars[s].rel) for s, e in _runs(chars)
    )

    def render(runs: tuple[_Run, ...]) -> tuple[ObservedPel, ...]:
        return tuple(
            ObservedPel("".join(c.ch for c in chars[r.start : r.end]), r.att, r.rel)
            for r in runs
        )

    candidates: list[list[ObservedPel]] = []
    seen: set[tuple[ObservedPel, ...]] = set()
    queue: list[tuple[_Run, ...]] = [base]
    visited: set[tuple[_Run, ...]] = {base}
    while queue and len(candidates) < max_candidates:
        state = queue.pop(0)
        rendered = render(state)
        if rendered not in seen:
            seen.add(rendered)
            candidates.append(list(rendered))
            if len(candidates) >= max_candidates:
                break
        for i in range(len(state) - 1):
            if not _mergeable(chars, state[i], state[i + 1], cfg):
                continue
            att, rel = _majority_pattern(chars, state[i].start, state[i + 1].end)
            merged = _Run(state[i].start, state[i + 1].end, att, rel)
            nxt = state[:i] + (merged,) + state[i + 2 :]
            if nxt not in visited:
                visited.add(nxt)
                queue.append(nxt)
    return candidates


def infer_template(
    trials: list[list[AnnotatedChar]],
    min_agreement: float = DEFAULT_MIN_AGREEMENT,
) -> PelTemplate:
    """Recover the pel template from repeated enrolment trials.

    Per character position and per signal independently, a level becomes
    the requirement when it occurs in at least ``min_agreement`` of the
    trials; otherwise that slot is a wildcard.  Positions then merge into
    maximal same-pattern spans.
    """
    if len(trials) < MIN_ENROLMENT_TRIALS:
        raise InputError(
            f"need at least {MIN_ENROLMENT_TRIALS} enrolment trials, got {len(trials)}"
        )
    if not 0 < min_agreement <= 1:
        raise InputError("min_agreement must be in (0, 1]")
    strings = {"".join(c.ch for c in t) for t in trials}
    if len(strings) != 1:
        raise EnrolmentMismatchError(
            f"trials spell {len(strings)} different strings"
        )
    text = strings.pop()
    if not text:
        raise InputError("trials are empty")

    needed = min_agreement * len(trials)

    def slot_requirement(levels: list[StateLevel]) -> RequiredLevel:
        sym, count = Counter(levels).most_common(1)[0]
        return sym if count >= needed else WILDCARD

    requirements: list[tuple[RequiredLevel, RequiredLevel]] = []
    for pos in range(len(text)):
        att = slot_requirement([t[pos].att for t in trials])
        rel = slot_requirement([t[pos].rel for t in trials])
        requirements.append((att, rel))

    pels = []
    start = 0
    for i in range(1, len(text) + 1):
        if i == len(text) or requirements[i] != requirements[start]:
            att, rel = requirements[start]
            pels.append(Pel(text[start:i], att, rel))
            start = i
    if len(pels) > MAX_PELS:
        raise TemplateTooFragmentedError(
            f"inference produced {len(pels)} pels; the cap is {MAX_PELS}"
        )
    return PelTemplate(tuple(pels))
