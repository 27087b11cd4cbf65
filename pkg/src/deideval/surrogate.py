"""Surrogate-PII corpus construction.

Replaces bracketed placeholders like [[NAME]] or [[PROVIDER-PHONE#2]] with
realistic seeded fake values, emits gold spans over the inserted text, and
optionally injects OCR-style noise (one character transposition or digit
swap) into a fraction of the surrogates. Identical input and seed always
produce identical output.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import InputError
from .textcore import PiiCategory, PiiSpan

__all__ = [
    "SurrogateConfig",
    "Replacement",
    "ReplacementMap",
    "PLACEHOLDER_RE",
    "replace_placeholders",
    "inject_noise",
    "build_surrogate_text",
    "derive_seed",
]

# [[TAG]], [[PROVIDER-TAG]], optional #n discriminator: [[NAME#2]]
PLACEHOLDER_RE = re.compile(r"\[\[(?P<tag>[A-Z-]+)(?:#(?P<ordinal>\d+))?\]\]")

_TAG_TO_CATEGORY = {
    "NAME": PiiCategory.NAME,
    "DATE": PiiCategory.DATE,
    "AGE": PiiCategory.AGE,
    "ADDRESS": PiiCategory.ADDRESS,
    "POSTAL-CODE": PiiCategory.POSTAL_CODE,
    "PHONE": PiiCategory.PHONE,
    "HEALTH-NUMBER": PiiCategory.HEALTH_NUMBER,
    "ID": PiiCategory.ID,
    "LOCATION": PiiCategory.LOCATION,
    "HOSPITAL": PiiCategory.HOSPITAL,
    "OTHER": PiiCategory.OTHER,
}


@dataclass(frozen=True)
class SurrogateConfig:
    seed: int = 0
    noise_rate: float = 0.0
    options: dict = field(default_factory=dict)  # generator style hints

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise InputError(f"noise_rate must lie in [0, 1], got {self.noise_rate}")


@dataclass(frozen=True)
class Replacement:
    placeholder_start: int  # offsets in the input text
    placeholder_end: int
    placeholder: str  # the full placeholder token (identity for reuse)
    category: PiiCategory
    is_provider: bool
    surrogate: str  # pre-noise draw
    noised: bool = False
    final_text: str = ""  # what the output document actually contains

    def to_json(self) -> dict:
        return {
            "placeholder_start": self.placeholder_start,
            "placeholder_end": self.placeholder_end,
            "placeholder": self.placeholder,
            "category": self.category.value,
            "is_provider": self.is_provider,
            "surrogate": self.surrogate,
            "noised": self.noised,
            "final_text": self.final_text,
        }


ReplacementMap = list  # list[Replacement]


def derive_seed(corpus_seed: int, doc_id: str) -> int:
    """Stable per-document seed so parallel processing order cannot matter."""
    digest = hashlib.sha256(f"{corpus_seed}\x1f{doc_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class _Sampler:
    """Seeded fake-value generator, one draw stream per document."""

    _FIRST = (
        "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael",
        "Linda", "David", "Elizabeth", "William", "Barbara", "Richard", "Susan",
        "Joseph", "Jessica", "Thomas", "Sarah", "Carlos", "Amina", "Wei",
        "Fatima", "Raj", "Ingrid", "Olu", "Mei", "Hassan", "Anya",
    )
    _LAST = (
        "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
        "Davis", "Martinez", "Wilson", "Anderson", "Taylor", "Thomas", "Moore",
        "Chen", "Singh", "Kowalski", "Nguyen", "Okafor", "Larsen", "Haddad",
        "Ivanov", "Tanaka", "Dubois",
    )
    _STREET = (
        "Maple Street", "Oak Avenue", "Pine Road", "Cedar Lane", "Elm Drive",
        "Birch Court", "River Road", "Hill Street", "Lake Avenue", "Park Lane",
        "Spruce Crescent", "Aspen Way",
    )
    _CITY = (
        "Springfield", "Riverton", "Lakeside", "Fairview", "Greenwood",
        "Brookfield", "Hillcrest", "Mapleton", "Clearwater", "Westbrook",
    )
    _DATE_FORMATS = ("{y:04d}-{m:02d}-{d:02d}", "{d:02d}/{m:02d}/{y:04d}", "{mon} {d}, {y}")
    _MONTHS = (
        "January", "February", "March", "April", "May", "June", "July",
        "August", "September", "October", "November", "December",
    )

    def __init__(self, seed: int, options: Optional[dict] = None):
        self.rng = random.Random(seed)
        self.options = options or {}

    def draw(self, category: PiiCategory) -> str:
        return getattr(self, "_" + category.name.lower())()

    def _digits(self, n: int) -> str:
        return "".join(str(self.rng.randrange(10)) for _ in range(n))

    def _name(self) -> str:
        return f"{self.rng.choice(self._FIRST)} {self.rng.choice(self._LAST)}"

    def _date(self) -> str:
        y = self.rng.randrange(1940, 2024)
        m = self.rng.randrange(1, 13)
        d = self.rng.randrange(1, 29)
        fmt = self.rng.choice(self._DATE_FORMATS)
        return fmt.format(y=y, m=m, d=d, mon=self._MONTHS[m - 1])

    def _age(self) -> str:
        return str(self.rng.randrange(18, 96))

    def _address(self) -> str:
        return f"{self.rng.randrange(1, 9999)} {self.rng.choice(self._STREET)}"

    def _postal_code(self) -> str:
        if self.options.get("postal_style") == "us":
            return self._digits(5)
        letters = "ABCEGHJKLMNPRSTVXY"
        pick = self.rng.choice
        return (
            f"{pick(letters)}{self.rng.randrange(10)}{pick(letters)} "
            f"{self.rng.randrange(10)}{pick(letters)}{self.rng.randrange(10)}"
        )

    def _phone(self) -> str:
        return f"({self._digits(3)}) {self._digits(3)}-{self._digits(4)}"

    def _health_number(self) -> str:
        return self._digits(9)

    def _id(self) -> str:
        alphabet = "ABCDEFGHJKMNPQRSTUVWXYZ23456789"
        return "".join(self.rng.choice(alphabet) for _ in range(8))

    def _location(self) -> str:
        return self.rng.choice(self._CITY)

    def _hospital(self) -> str:
        kind = self.rng.choice(("General Hospital", "Medical Centre", "Community Clinic"))
        return f"{self.rng.choice(self._CITY)} {kind}"

    def _other(self) -> str:
        consonants = "bcdfghklmnprstvz"
        vowels = "aeiou"
        word = "".join(
            self.rng.choice(consonants) + self.rng.choice(vowels) for _ in range(3)
        )
        return word.capitalize()


def _parse_tag(tag: str, offset: int) -> tuple[PiiCategory, bool]:
    is_provider = tag.startswith("PROVIDER-")
    base = tag[len("PROVIDER-"):] if is_provider else tag
    category = _TAG_TO_CATEGORY.get(base)
    if category is None:
        raise InputError(f"unknown placeholder tag {tag!r} at offset {offset}")
    return category, is_provider


def replace_placeholders(
    text: str,
    cfg: SurrogateConfig,
    pattern: re.Pattern = PLACEHOLDER_RE,
) -> tuple[str, ReplacementMap, list[PiiSpan]]:
    """Swap every placeholder for a surrogate of its tag's kind.

    The same placeholder token within a document always maps to the same
    surrogate (a recurring patient name stays one name). Non-placeholder
    bytes are copied through untouched and the returned gold spans cover
    exactly the inserted surrogates in the new text.
    """
    sampler = _Sampler(cfg.seed, cfg.options)
    by_identity: dict[str, str] = {}
    pieces: list[str] = []
    replacements: ReplacementMap = []
    spans: list[PiiSpan] = []
    cursor = 0
    out_len = 0
    for m in pattern.finditer(text):
        category, is_provider = _parse_tag(m.group("tag"), m.start())
        pieces.append(text[cursor : m.start()])
        out_len += m.start() - cursor
        identity = m.group(0)
        if identity not in by_identity:
            by_identity[identity] = sampler.draw(category)
        surrogate = by_identity[identity]
        pieces.append(surrogate)
        replacements.append(
            Replacement(
                placeholder_start=m.start(),
                placeholder_end=m.end(),
                placeholder=identity,
                category=category,
                is_provider=is_provider,
                surrogate=surrogate,
                final_text=surrogate,
            )
        )
        spans.append(
            PiiSpan(out_len, out_len + len(surrogate), category, is_provider=is_provider)
        )
        out_len += len(surrogate)
        cursor = m.end()
    pieces.append(text[cursor:])
    return "".join(pieces), replacements, spans


def _transpose(rng: random.Random, s: str) -> str:
    # Prefer a position whose swap actually changes the string.
    changing = [i for i in range(len(s) - 1) if s[i] != s[i + 1]]
    positions = changing or list(range(len(s) - 1))
    i = rng.choice(positions)
    return s[:i] + s[i + 1] + s[i] + s[i + 2 :]


def _substitute_digit(rng: random.Random, s: str) -> str:
    digit_positions = [i for i, ch in enumerate(s) if ch.isdigit()]
    i = rng.choice(digit_positions)
    alternatives = [d for d in "0123456789" if d != s[i]]
    return s[:i] + rng.choice(alternatives) + s[i + 1 :]


def _substitute_letter(rng: random.Random, s: str) -> str:
    i = rng.randrange(len(s))
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    replacement = rng.choice([c for c in alphabet if c != s[i].lower()])
    return s[:i] + replacement + s[i + 1 :]


def _one_edit(rng: random.Random, s: str) -> str:
    if any(ch.isdigit() for ch in s):
        return _substitute_digit(rng, s)
    if len(s) >= 2:
        return _transpose(rng, s)
    return _substitute_letter(rng, s)


def inject_noise(replacements: ReplacementMap, cfg: SurrogateConfig) -> ReplacementMap:
    """Apply exactly one edit to floor(noise_rate * len(map)) surrogates.

    Digit-bearing surrogates get one digit substitution; purely alphabetic
    ones get one adjacent transposition. Selection and edit positions come
    from the config seed, so reruns are identical.
    """
    n_noised = int(cfg.noise_rate * len(replacements))
    if n_noised == 0:
        return list(replacements)
    rng = random.Random(derive_seed(cfg.seed, "noise"))
    chosen = set(rng.sample(range(len(replacements)), n_noised))
    out: ReplacementMap = []
    for i, rep in enumerate(replacements):
        if i in chosen:
            out.append(replace(rep, noised=True, final_text=_one_edit(rng, rep.surrogate)))
        else:
            out.append(rep)
    return out


def build_surrogate_text(text: str, cfg: SurrogateConfig, pattern: re.Pattern = PLACEHOLDER_RE):
    """Full pipeline: replace placeholders, inject noise, re-render text.

    Noise edits are length-preserving, so the gold spans computed at
    replacement time stay valid afterwards.
    """
    new_text, replacements, spans = replace_placeholders(text, cfg, pattern)
    replacements = inject_noise(replacements, cfg)
    chars = list(new_text)
    for rep, span in zip(replacements, spans):
        if rep.noised:
            chars[span.start : span.end] = rep.final_text
    return "".join(chars), replacements, spans


def map_to_json(replacements: ReplacementMap) -> str:
    return json.dumps([r.to_json() for r in replacements], indent=2) + "\n"
