import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegpass.errors import InputError, TemplateSyntaxError
from eegpass.model import (
    DEFAULT_QUANTIZER,
    MAX_PELS,
    ObservedPel,
    Pel,
    PelTemplate,
    QuantizerConfig,
    SignalSample,
    StateLevel,
    WILDCARD,
    band_center,
    encode_pel,
    format_template,
    matches,
    parse_template,
    quantize,
)

S, L, N, R, H = StateLevel


# -- quantizer ---------------------------------------------------------------


def test_quantize_band_examples():
    assert quantize(85) == H
    assert quantize(0) == S
    assert quantize(19) == S
    assert quantize(20) == L
    assert quantize(40) == N
    assert quantize(60) == R
    assert quantize(80) == H
    assert quantize(100) == H


def test_quantize_hysteresis_example():
    # 78 sits in the R band but within margin 5 of the 80 edge.
    assert quantize(78) == R
    assert quantize(78, prev=H) == H
    assert quantize(74, prev=H) == R  # beyond the margin, flips


def test_quantize_hysteresis_only_for_adjacent_bands():
    assert quantize(42, prev=H) == N
    assert quantize(21, prev=R) == L


def test_quantize_range_errors():
    with pytest.raises(InputError):
        quantize(-1)
    with pytest.raises(InputError):
        quantize(101)
    with pytest.raises(InputError):
        quantize(50.0)  # type: ignore[arg-type]


@given(st.integers(0, 100), st.integers(0, 100), st.sampled_from(list(StateLevel)))
def test_quantize_monotone(a, b, prev):
    lo, hi = sorted((a, b))
    assert quantize(lo, prev) <= quantize(hi, prev)


@given(
    st.sampled_from(DEFAULT_QUANTIZER.band_edges),
    st.lists(st.integers(-5, 5), min_size=1, max_size=30),
)
def test_quantize_no_flicker_around_one_edge(edge, deltas):
    values = [edge + d for d in deltas]
    prev = quantize(values[0])
    seen = {prev}
    for v in values[1:]:
        prev = quantize(v, prev)
        seen.add(prev)
    assert len(seen) == 1


def test_quantizer_config_validation():
    with pytest.raises(InputError):
        QuantizerConfig(band_edges=(20, 40, 60, 0))
    with pytest.raises(InputError):
        QuantizerConfig(band_edges=(20, 40, 40, 80))
    with pytest.raises(InputError):
        QuantizerConfig(hysteresis_margin=20)
    with pytest.raises(InputError):
        QuantizerConfig(hysteresis_margin=-1)


def test_band_center_defaults():
    assert [band_center(lvl) for lvl in StateLevel] == [10, 30, 50, 70, 90]


# -- types ---------------------------------------------------------------


def test_signal_sample_validation():
    SignalSample(0, 0, 100)
    with pytest.raises(InputError):
        SignalSample(-1, 50, 50)
    with pytest.raises(InputError):
        SignalSample(0, 101, 50)
    with pytest.raises(InputError):
        SignalSample(0, 50, -2)


def test_pel_validation():
    Pel("a", WILDCARD, WILDCARD)  # fully wildcarded is legal
    with pytest.raises(InputError):
        Pel("", H, H)
    with pytest.raises(InputError):
        Pel("a" * 65, H, H)
    with pytest.raises(InputError):
        Pel("a,b", H, H)
    with pytest.raises(InputError):
        Pel("a]b", H, H)


def test_template_validation():
    with pytest.raises(InputError):
        PelTemplate((Pel("ab", H, WILDCARD), Pel("cd", H, WILDCARD)))
    with pytest.raises(InputError):
        PelTemplate(tuple(Pel(c, lvl, WILDCARD) for c, lvl in
                          zip("abcdefg", [S, L, N, R, H, S, L])))
    with pytest.raises(InputError):
        PelTemplate(())


def test_matches_wildcard():
    assert matches(WILDCARD, S) and matches(WILDCARD, H)
    assert matches(H, H) and not matches(H, R)


# -- pel encoding ------------------------------------------------------------


def test_encode_pel_layout():
    assert encode_pel(ObservedPel("qwe", H, N)) == b"\x01\x00\x03qweHN"
    assert encode_pel(ObservedPel("a", S, S)) == b"\x01\x00\x01aSS"


def test_encode_pel_utf8_length_prefix_counts_bytes():
    enc = encode_pel(ObservedPel("é", H, H))  # 2 UTF-8 bytes
    assert enc[1:3] == b"\x00\x02"


def test_encode_pel_no_concatenation_collisions():
    # Exhaustive over every way of splitting short strings into two pels.
    alphabet = "ab"
    singles = {}
    for text in [a + b for a in alphabet for b in alphabet]:
        whole = encode_pel(ObservedPel(text, H, H))
        for cut in range(1, len(text)):
            left = encode_pel(ObservedPel(text[:cut], H, H))
            right = encode_pel(ObservedPel(text[cut:], H, H))
            assert left + right != whole
        singles[text] = whole
    assert len(set(singles.values())) == len(singles)


def test_encode_pel_injective_random():
    rng = random.Random(1234)
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!@#"
    seen_pels = set()
    encodings = set()
    while len(seen_pels) < 10_000:
        pel = ObservedPel(
            "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8))),
            rng.choice(list(StateLevel)),
            rng.choice(list(StateLevel)),
        )
        if pel in seen_pels:
            continue
        seen_pels.add(pel)
        encodings.add(encode_pel(pel))
    assert len(encodings) == 10_000


def test_encode_pel_never_a_proper_prefix():
    pels = [
        ObservedPel(c * k, a, r)
        for c in "xy"
        for k in (1, 2, 3)
        for a in (S, H)
        for r in (S, H)
    ]
    encs = [encode_pel(p) for p in pels]
    for i, e1 in enumerate(encs):
        for j, e2 in enumerate(encs):
            if i != j:
                assert not e2.startswith(e1) or e1 == e2


# -- template notation ---------------------------------------------------------


def test_parse_paper_template():
    t = parse_template("[[qwe,H,0],[rty,0,H],[123,H,0]]")
    assert t.n == 3
    assert t.password == "qwerty123"
    assert t.pels[0] == Pel("qwe", H, WILDCARD)
    assert t.pels[1] == Pel("rty", WILDCARD, H)
    assert t.pels[2] == Pel("123", H, WILDCARD)


def test_parse_single_pel():
    assert parse_template("[[a,N,N]]").pels == (Pel("a", N, N),)


def test_parse_whitespace_ignored():
    t = parse_template(" [ [qwe, H, 0] , [rty, 0, H] ] ")
    assert t.password == "qwerty"


def test_parse_adjacent_identical_rejected():
    with pytest.raises(InputError):
        parse_template("[[ab,H,0],[cd,H,0]]")


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "[]",
        "[[a,H]]",
        "[[a,H,0]",
        "[[a,X,0]]",
        "[[a,H,0]]extra",
        "[[,H,0]]",
        "[a,H,0]",
    ],
)
def test_parse_malformed(bad):
    with pytest.raises(InputError):
        parse_template(bad)


def test_parse_too_many_pels():
    pels = ",".join(f"[p{i},{'H' if i % 2 else 'S'},0]" for i in range(MAX_PELS + 1))
    with pytest.raises(InputError):
        parse_template(f"[{pels}]")


_levels = st.sampled_from([*StateLevel, None])
_chars = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789_.", min_size=1, max_size=4
)


@st.composite
def templates(draw):
    n = draw(st.integers(1, MAX_PELS))
    pels = []
    prev = None
    for _ in range(n):
        pattern = draw(st.tuples(_levels, _levels).filter(lambda p: p != prev))
        prev = pattern
        pels.append(Pel(draw(_chars), *pattern))
    return PelTemplate(tuple(pels))


@given(templates())
@settings(max_examples=200)
def test_template_round_trip(template):
    assert parse_template(format_template(template)) == template
