"""Parsing of free-form model replies into option letters.

The cascade: a lone character is taken as the chosen letter; otherwise
the reply is searched for the option texts themselves (last occurrence
wins); otherwise single characters in parentheses are tried, again last
match wins.  Anything else is a ParseFailure value, never an exception.
"""
from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class ParseFailure:
    reason: str

    def __bool__(self) -> bool:
        return False


def _normalize_options(options) -> list[tuple[str, str]]:
    if isinstance(options, dict):
        return sorted(options.items())
    return [(str(l), str(t)) for l, t in options]


def _keyword_pattern(text: str) -> re.Pattern:
    # Word-ish boundaries guard short options ("No" must not match "Nothing"),
    # but only where the option itself starts/ends with a word character,
    # so label options like "<2>" still match literally.
    pattern = re.escape(text)
    if text and text[0].isalnum():
        pattern = r"(?<![A-Za-z0-9])" + pattern
    if text and text[-1].isalnum():
        pattern = pattern + r"(?![A-Za-z0-9])"
    return re.compile(pattern, re.IGNORECASE)


def parse_response(text: str, options) -> str | ParseFailure:
    """Map a raw reply to an option letter or a ParseFailure value."""
    opts = _normalize_options(options)
    legal = {l.upper() for l, _ in opts}

    trimmed = text.strip()
    if len(trimmed) == 1:
        letter = trimmed.upper()
        if letter in legal:
            return letter
        return ParseFailure(f"single character {trimmed!r} is not a legal option letter")

    best: tuple[int, int] | None = None
    best_letter = None
    for letter, opt_text in opts:
        if not opt_text:
            continue
        for m in _keyword_pattern(opt_text).finditer(text):
            key = (m.start(), len(opt_text))
            if best is None or key > best:
                best = key
                best_letter = letter.upper()
    if best_letter is not None:
        return best_letter

    paren_hits = [
        m.group(1).upper()
        for m in re.finditer(r"\(([A-Za-z])\)", text)
        if m.group(1).upper() in legal
    ]
    if paren_hits:
        return paren_hits[-1]

    return ParseFailure("no option letter or keyword found")
