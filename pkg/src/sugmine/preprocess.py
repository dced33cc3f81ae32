"""
Five-stage text normalization followed by whitespace tokenization.

Stages always run in this order (any subset may be disabled):

    clean            drop Cyrillic, Greek, CJK and kana characters
    normalize        unify apostrophes, quotes, dashes, ellipses; date/time placeholders
    expand_phrase    I'll -> I will, you're -> you are, ...
    expand_negation  aren't -> are not, won't -> will not, ...
    escape_punct     put spaces around every ASCII punctuation character

Tokens are lowercased after the pipeline.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import ConfigError, ParseError

STAGES = ("clean", "normalize", "expand_phrase", "expand_negation", "escape_punct")

REMOVED_BLOCKS = (
    (0x0370, 0x03FF),  # Greek and Coptic
    (0x0400, 0x04FF),  # Cyrillic
    (0x3040, 0x30FF),  # Hiragana, Katakana
    (0x4E00, 0x9FFF),  # CJK Unified Ideographs
)

PLACEHOLDERS = ("<date>", "<time>")

_REMOVE_RE = re.compile(
    "[" + "".join(f"\\u{lo:04x}-\\u{hi:04x}" for lo, hi in REMOVED_BLOCKS) + "]"
)
_CHAR_MAP = str.maketrans({
    "‘": "'", "’": "'", "‚": "'", "‛": "'",
    "“": '"', "”": '"', "„": '"', "‟": '"',
    "–": "-", "—": "-",
    "…": "...",
})
_DATE_RE = re.compile(r"(?<!\d)\d{2}/\d{2}/\d{4}(?!\d)")
_TIME_RE = re.compile(r"(?<!\d)\d{1,2}:\d{2}(?!\d)")
_PUNCT_RE = re.compile("([" + re.escape(string.punctuation) + "])")
_PLACEHOLDER_RE = re.compile("(" + "|".join(re.escape(p) for p in PLACEHOLDERS) + ")")


@dataclass(frozen=True)
class PipelineConfig:
    enabled_stages: tuple = STAGES

    def __post_init__(self):
        unknown = [s for s in self.enabled_stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown preprocessing stage(s): {', '.join(unknown)}")
        # order is fixed regardless of how the subset was listed
        object.__setattr__(
            self, "enabled_stages", tuple(s for s in STAGES if s in self.enabled_stages)
        )


@dataclass
class TokenizedText:
    raw: str
    normalized: str
    tokens: list = field(default_factory=list)


def _squeeze(s: str) -> str:
    return " ".join(s.split())


def clean_text(s: str) -> str:
    return _squeeze(_REMOVE_RE.sub(" ", s))


def normalize_chars(s: str) -> str:
    s = s.translate(_CHAR_MAP)
    s = _DATE_RE.sub("<date>", s)
    return _TIME_RE.sub("<time>", s)


class ExpansionTable:
    """Whole-word and suffix replacement rules loaded from a TSV file."""

    def __init__(self, words: dict, suffixes: dict):
        self.words = dict(words)
        self.suffixes = dict(suffixes)
        self._word_re = self._suffix_re = None
        if self.words:
            alts = "|".join(re.escape(w) for w in sorted(self.words, key=lambda w: (-len(w), w)))
            self._word_re = re.compile(rf"(?<![\w'])({alts})(?![\w'])", re.IGNORECASE)
        if self.suffixes:
            alts = "|".join(re.escape(w) for w in sorted(self.suffixes, key=lambda w: (-len(w), w)))
            self._suffix_re = re.compile(rf"(?<![\w'])([A-Za-z]+?)({alts})(?![\w'])", re.IGNORECASE)

    @classmethod
    def from_lines(cls, lines, source="<table>") -> "ExpansionTable":
        words, suffixes = {}, {}
        for lineno, line in enumerate(lines, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"{source}: expected 'short<TAB>long'", line=lineno)
            short, long = parts[0].lower(), parts[1]
            if short.startswith("-"):
                suffixes[short[1:]] = long
            else:
                words[short] = long
        return cls(words, suffixes)

    @classmethod
    def from_file(cls, path) -> "ExpansionTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh, source=str(path))

    def apply(self, s: str) -> str:
        if self._word_re is not None:
            s = self._word_re.sub(self._replace_word, s)
        if self._suffix_re is not None:
            s = self._suffix_re.sub(self._replace_suffix, s)
        return s

    def _replace_word(self, m):
        found = m.group(1)
        repl = self.words[found.lower()]
        if found[0].isupper():
            return repl[0].upper() + repl[1:]
        return repl[0].lower() + repl[1:]

    def _replace_suffix(self, m):
        return f"{m.group(1)} {self.suffixes[m.group(2).lower()]}"


@lru_cache(maxsize=None)
def _bundled_table(name: str) -> ExpansionTable:
    text = resources.files("sugmine.resources").joinpath(name).read_text(encoding="utf-8")
    return ExpansionTable.from_lines(text.splitlines(), source=name)


def contraction_table() -> ExpansionTable:
    return _bundled_table("contractions.tsv")


def negation_table() -> ExpansionTable:
    return _bundled_table("negations.tsv")


def expand_phrases(s: str, table: ExpansionTable | None = None) -> str:
    return (table or contraction_table()).apply(s)


def expand_negations(s: str, table: ExpansionTable | None = None) -> str:
    return (table or negation_table()).apply(s)


def escape_punct(s: str) -> str:
    pieces = []
    for i, piece in enumerate(_PLACEHOLDER_RE.split(s)):
        # odd indices are the captured placeholders
        pieces.append(piece if i % 2 else _PUNCT_RE.sub(r" \1 ", piece))
    return _squeeze(" ".join(pieces))


_STAGE_FUNCS = {
    "clean": clean_text,
    "normalize": normalize_chars,
    "expand_phrase": expand_phrases,
    "expand_negation": expand_negations,
    "escape_punct": escape_punct,
}


def run_stages(s: str, cfg: PipelineConfig | None = None):
    """Yield (stage, output) after every enabled stage."""
    cfg = cfg or PipelineConfig()
    for stage in cfg.enabled_stages:
        s = _STAGE_FUNCS[stage](s)
        yield stage, s


def preprocess(s: str, cfg: PipelineConfig | None = None) -> TokenizedText:
    out = s
    for _, out in run_stages(s, cfg):
        pass
    tokens = [t.lower() for t in out.split()]
    return TokenizedText(raw=s, normalized=out, tokens=tokens)


def tokenize(s: str, cfg: PipelineConfig | None = None) -> list:
    return preprocess(s, cfg).tokens


def load_golden(path) -> list:
    """Read ``raw<TAB>expected`` pairs; '#' lines and blank lines are skipped."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line == "" or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}: expected 'raw<TAB>expected'", line=lineno)
        pairs.append((parts[0], parts[1]))
    return pairs
