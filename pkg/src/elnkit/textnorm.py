"""Persian text normalization for references and N-best hypotheses.

Every transcript entering the toolkit passes through ``normalize`` before
scoring or embedding. The pipeline applies, in order:

  (i)   small-number-to-word conversion (integers below a limit become
        Persian words; larger numerals are kept),
  (ii)  Unicode canonicalization plus Arabic-to-Persian letter unification
        (e.g. ي -> ی, ك -> ک),
  (iii) spacing / half-spacing repair driven by a shipped affix rule table
        (ZWNJ runs collapsed, stray ZWNJ dropped, known affixes joined),
  (iv)  ASCII digits mapped to Persian digits,
  (v)   punctuation removal,
  (vi)  whitespace collapsed to single spaces, ends trimmed.

Removing punctuation can expose new affix boundaries and orphan combining
marks, so the pass is reapplied until the text stops changing; the result
is a true fixed point (``normalize(normalize(x)) == normalize(x)``).
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources

from .errors import DataError

ZWNJ = "‌"

# Arabic-script codepoints folded into their Persian equivalents, plus
# eastern Arabic-Indic digits folded into Persian digits. Tatweel is dropped.
UNIFICATION_TABLE: dict[int, str | None] = {
    ord("ي"): "ی",  # ARABIC LETTER YEH -> FARSI YEH
    ord("ى"): "ی",  # ALEF MAKSURA -> FARSI YEH
    ord("ك"): "ک",  # ARABIC KAF -> KEHEH
    ord("ة"): "ه",  # TEH MARBUTA -> HEH
    ord("ـ"): None,      # TATWEEL removed
}
for _i in range(10):
    UNIFICATION_TABLE[0x0660 + _i] = chr(0x06F0 + _i)  # ٠..٩ -> ۰..۹

DEFAULT_DIGIT_MAP: dict[str, str] = {chr(ord("0") + i): chr(0x06F0 + i) for i in range(10)}

# Digit characters recognized as numerals by step (i): ASCII, Persian,
# eastern Arabic-Indic.
_DIGIT_VALUES: dict[str, int] = {}
for _i in range(10):
    _DIGIT_VALUES[chr(ord("0") + _i)] = _i
    _DIGIT_VALUES[chr(0x06F0 + _i)] = _i
    _DIGIT_VALUES[chr(0x0660 + _i)] = _i
_DIGIT_RUN_RE = re.compile("[" + "".join(map(re.escape, _DIGIT_VALUES)) + "]+")

_ONES = ["صفر", "یک", "دو", "سه", "چهار", "پنج", "شش", "هفت", "هشت", "نه"]
_TEENS = ["ده", "یازده", "دوازده", "سیزده", "چهارده", "پانزده", "شانزده", "هفده", "هجده", "نوزده"]
_TENS = ["", "", "بیست", "سی", "چهل", "پنجاه", "شصت", "هفتاد", "هشتاد", "نود"]
_HUNDREDS = ["", "صد", "دویست", "سیصد", "چهارصد", "پانصد", "ششصد", "هفتصد", "هشتصد", "نهصد"]
_SCALES = ["", "هزار", "میلیون", "میلیارد"]
_JOINER = " و "


def number_to_persian_words(value: int) -> str:
    """Spell a non-negative integer in Persian words (supported up to 10^12 - 1)."""
    if value < 0:
        raise DataError(f"cannot spell negative number {value}")
    if value >= 10**12:
        raise DataError(f"number {value} too large to spell")
    if value == 0:
        return _ONES[0]

    def three_digits(n: int) -> str:
        parts = []
        if n >= 100:
            parts.append(_HUNDREDS[n // 100])
            n %= 100
        if n >= 20:
            parts.append(_TENS[n // 10])
            n %= 10
        if 10 <= n <= 19:
            parts.append(_TEENS[n - 10])
            n = 0
        if n > 0:
            parts.append(_ONES[n])
        return _JOINER.join(parts)

    groups = []
    scale = 0
    while value > 0:
        value, chunk = divmod(value, 1000)
        if chunk:
            words = three_digits(chunk)
            if scale:
                # "هزار" alone for 1000, not "یک هزار"
                if chunk == 1 and scale == 1:
                    words = _SCALES[scale]
                else:
                    words = f"{words} {_SCALES[scale]}"
            groups.append(words)
        scale += 1
    return _JOINER.join(reversed(groups))


@dataclass(frozen=True)
class AffixRules:
    """Half-spacing rules loaded from a versioned plain-text table."""

    version: int
    prefixes: tuple[str, ...]
    suffixes: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "AffixRules":
        version = None
        prefixes: list[str] = []
        suffixes: list[str] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "version" and len(parts) == 2:
                version = int(parts[1])
                if version != 1:
                    raise DataError(f"unsupported affix rule table version {version}")
            elif parts[0] == "prefix" and len(parts) == 2:
                prefixes.append(parts[1])
            elif parts[0] == "suffix" and len(parts) == 2:
                suffixes.append(parts[1])
            else:
                raise DataError(f"bad affix rule at line {lineno}: {raw!r}")
        if version is None:
            raise DataError("affix rule table missing version line")
        return cls(version=version, prefixes=tuple(prefixes), suffixes=tuple(suffixes))

    @classmethod
    def shipped(cls) -> "AffixRules":
        text = resources.files("elnkit").joinpath("data/affix_rules.txt").read_text("utf-8")
        return cls.parse(text)


def _is_punctuation(ch: str, extra: frozenset[str] | None) -> bool:
    if extra is not None:
        return ch in extra
    return unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class NormalizationConfig:
    """Knobs for the normalization pipeline.

    ``small_number_limit``: numerals strictly below this become Persian words.
    ``punctuation_set``: explicit characters to strip; ``None`` means every
    character in Unicode general categories P* (which already include the
    Arabic punctuation ``، ؛ ؟ « »``).
    ``digit_map``: ASCII digit -> Persian digit, must be a bijection on 0..9.
    ``unicode_form``: canonical form for step (ii), composed by default.
    """

    small_number_limit: int = 100
    punctuation_set: frozenset[str] | None = None
    digit_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_DIGIT_MAP))
    unicode_form: str = "NFC"
    affix_rules: AffixRules = field(default_factory=AffixRules.shipped)

    def __post_init__(self) -> None:
        if not 1 <= self.small_number_limit <= 10**12:
            raise DataError("small_number_limit must be in [1, 10^12]")
        if self.unicode_form not in ("NFC", "NFD", "NFKC", "NFKD"):
            raise DataError(f"unknown unicode form {self.unicode_form!r}")
        ascii_digits = {chr(ord("0") + i) for i in range(10)}
        if set(self.digit_map) != ascii_digits or len(set(self.digit_map.values())) != 10:
            raise DataError("digit_map must be a bijection over the ASCII digits 0..9")
        if self.punctuation_set is not None and ZWNJ in self.punctuation_set:
            raise DataError("punctuation_set must not contain the zero-width non-joiner")


DEFAULT_CONFIG = NormalizationConfig()

_MAX_PASSES = 32


def _convert_small_numbers(text: str, cfg: NormalizationConfig) -> str:
    def repl(m: re.Match[str]) -> str:
        value = 0
        for ch in m.group(0):
            value = value * 10 + _DIGIT_VALUES[ch]
        if value < cfg.small_number_limit:
            return number_to_persian_words(value)
        return m.group(0)

    return _DIGIT_RUN_RE.sub(repl, text)


def _unify(text: str, cfg: NormalizationConfig) -> str:
    return unicodedata.normalize(cfg.unicode_form, text).translate(UNIFICATION_TABLE)


def _repair_spacing(text: str, cfg: NormalizationConfig) -> str:
    # Collapse ZWNJ runs, drop ZWNJ that touches whitespace or the ends.
    text = re.sub(f"{ZWNJ}+", ZWNJ, text)
    text = re.sub(rf"{ZWNJ}+(?=\s)|(?<=\s){ZWNJ}+", "", text)
    text = text.strip(ZWNJ)
    # Join known affixes across spaces; loop because joins can chain
    # ("می می رود" joins twice). Space count strictly decreases, so this
    # terminates.
    while True:
        before = text
        for prefix in cfg.affix_rules.prefixes:
            text = re.sub(rf"(?<![\S]){re.escape(prefix)}\s+(?=\S)", prefix + ZWNJ, text)
        for suffix in cfg.affix_rules.suffixes:
            text = re.sub(rf"(?<=\S)\s+{re.escape(suffix)}(?=\s|$)", ZWNJ + suffix, text)
        if text == before:
            return text


def _map_digits(text: str, cfg: NormalizationConfig) -> str:
    return text.translate({ord(k): v for k, v in cfg.digit_map.items()})


def _strip_punctuation(text: str, cfg: NormalizationConfig) -> str:
    return "".join(ch for ch in text if not _is_punctuation(ch, cfg.punctuation_set))


def _collapse_whitespace(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _single_pass(text: str, cfg: NormalizationConfig) -> str:
    text = _convert_small_numbers(text, cfg)
    text = _unify(text, cfg)
    text = _repair_spacing(text, cfg)
    text = _map_digits(text, cfg)
    text = _strip_punctuation(text, cfg)
    return _collapse_whitespace(text)


def normalize(text: str, cfg: NormalizationConfig = DEFAULT_CONFIG) -> str:
    """Normalize ``text``; the result is a fixed point of this function."""
    for _ in range(_MAX_PASSES):
        out = _single_pass(text, cfg)
        if out == text:
            return out
        text = out
    raise AssertionError("normalization did not converge")  # pragma: no cover


def tokenize(text: str) -> list[str]:
    """Split a normalized string into word tokens.

    Tokens are separated by single spaces; ZWNJ-joined compounds stay one
    token. Joining the tokens with single spaces reproduces the input.
    """
    if not text:
        return []
    return text.split(" ")
