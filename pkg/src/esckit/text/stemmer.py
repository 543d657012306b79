"""English Snowball (Porter2) stemmer.

A direct port of the ``english.sbl`` algorithm. Input is expected to be a
single lowercase word; the caller is responsible for tokenization.
"""

from __future__ import annotations

from functools import lru_cache

_VOWELS = frozenset("aeiouy")
_VOWELS_WXY = _VOWELS | frozenset("wxY")
_VALID_LI = frozenset("cdeghkmnrt")
_DOUBLES = ("bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt")

_EXCEPTION1 = {
    "skis": "ski",
    "skies": "sky",
    "dying": "die",
    "lying": "lie",
    "tying": "tie",
    "idly": "idl",
    "gently": "gentl",
    "ugly": "ugli",
    "early": "earli",
    "only": "onli",
    "singly": "singl",
    "sky": "sky",
    "news": "news",
    "howe": "howe",
    "atlas": "atlas",
    "cosmos": "cosmos",
    "bias": "bias",
    "andes": "andes",
}

_EXCEPTION2 = frozenset(
    ["inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed"]
)

_REGION_PREFIXES = ("gener", "commun", "arsen")

# (suffix, replacement); a replacement of None marks a conditional rule
_STEP2 = (
    ("ization", "ize"),
    ("ational", "ate"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("tional", "tion"),
    ("biliti", "ble"),
    ("lessli", "less"),
    ("entli", "ent"),
    ("ation", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("ousli", "ous"),
    ("iviti", "ive"),
    ("fulli", "ful"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("abli", "able"),
    ("izer", "ize"),
    ("ator", "ate"),
    ("alli", "al"),
    ("bli", "ble"),
    ("ogi", None),
    ("li", None),
)

_STEP3 = (
    ("ational", "ate"),
    ("tional", "tion"),
    ("alize", "al"),
    ("icate", "ic"),
    ("iciti", "ic"),
    ("ative", None),
    ("ical", "ic"),
    ("ness", ""),
    ("ful", ""),
)

_STEP4 = (
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
    "ate", "iti", "ous", "ive", "ize", "ion", "al", "er", "ic",
)


def _is_vowel(ch: str) -> bool:
    return ch in _VOWELS


def _longest_suffix(word: str, suffixes):
    for entry in suffixes:
        suffix = entry[0] if isinstance(entry, tuple) else entry
        if word.endswith(suffix):
            return entry
    return None


def _mark_regions(word: str) -> tuple[int, int]:
    n = len(word)
    p1 = n
    for prefix in _REGION_PREFIXES:
        if word.startswith(prefix):
            p1 = len(prefix)
            break
    else:
        p1 = _region_after(word, 0)
    p2 = _region_after(word, p1)
    return p1, p2


def _region_after(word: str, start: int) -> int:
    """Position after the first non-vowel that follows a vowel, from ``start``."""
    n = len(word)
    i = start
    while i < n and not _is_vowel(word[i]):
        i += 1
    while i < n and _is_vowel(word[i]):
        i += 1
    if i >= n:
        return n
    return i + 1


def _shortv_len2(word: str) -> bool:
    # (non-v v atlimit) read backwards: last is non-vowel, first is vowel
    return len(word) == 2 and _is_vowel(word[0]) and not _is_vowel(word[1])


def _shortv(word: str) -> bool:
    n = len(word)
    if n >= 3 and (
        word[-1] not in _VOWELS_WXY and _is_vowel(word[-2]) and not _is_vowel(word[-3])
    ):
        return True
    return _shortv_len2(word)


def _has_vowel(s: str) -> bool:
    return any(_is_vowel(c) for c in s)


def _prelude(word: str) -> tuple[str, bool]:
    if word.startswith("'"):
        word = word[1:]
    chars = list(word)
    found = False
    if chars and chars[0] == "y":
        chars[0] = "Y"
        found = True
    for i in range(1, len(chars)):
        if chars[i] == "y" and _is_vowel(chars[i - 1]):
            chars[i] = "Y"
            found = True
    return "".join(chars), found


def _step_1a(word: str) -> str:
    for suffix in ("'s'", "'s", "'"):
        if word.endswith(suffix):
            word = word[: -len(suffix)]
            break
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ied") or word.endswith("ies"):
        stem = word[:-3]
        return stem + ("i" if len(stem) >= 2 else "ie")
    if word.endswith("us") or word.endswith("ss"):
        return word
    if word.endswith("s"):
        # skip the letter before the "s", then look for a vowel further back
        if len(word) >= 2 and _has_vowel(word[:-2]):
            return word[:-1]
    return word


def _step_1b(word: str, p1: int) -> str:
    match = _longest_suffix(word, ("eedly", "ingly", "edly", "eed", "ing", "ed"))
    if match is None:
        return word
    stem = word[: -len(match)]
    if match in ("eed", "eedly"):
        if len(stem) >= p1:
            return stem + "ee"
        return word
    if not _has_vowel(stem):
        return word
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if stem.endswith(_DOUBLES):
        return stem[:-1]
    if len(stem) == p1 and _shortv(stem):
        return stem + "e"
    return stem


def _step_1c(word: str) -> str:
    if len(word) >= 3 and word[-1] in "yY" and not _is_vowel(word[-2]):
        return word[:-1] + "i"
    return word


def _step_2(word: str, p1: int) -> str:
    match = _longest_suffix(word, _STEP2)
    if match is None:
        return word
    suffix, repl = match
    start = len(word) - len(suffix)
    if start < p1:
        return word
    if suffix == "ogi":
        if start >= 1 and word[start - 1] == "l":
            return word[:start] + "og"
        return word
    if suffix == "li":
        if start >= 1 and word[start - 1] in _VALID_LI:
            return word[:start]
        return word
    return word[:start] + repl


def _step_3(word: str, p1: int, p2: int) -> str:
    match = _longest_suffix(word, _STEP3)
    if match is None:
        return word
    suffix, repl = match
    start = len(word) - len(suffix)
    if start < p1:
        return word
    if suffix == "ative":
        return word[:start] if start >= p2 else word
    return word[:start] + repl


def _step_4(word: str, p2: int) -> str:
    suffix = _longest_suffix(word, _STEP4)
    if suffix is None:
        return word
    start = len(word) - len(suffix)
    if start < p2:
        return word
    if suffix == "ion":
        if start >= 1 and word[start - 1] in "st":
            return word[:start]
        return word
    return word[:start]


def _step_5(word: str, p1: int, p2: int) -> str:
    if word.endswith("e"):
        start = len(word) - 1
        if start >= p2 or (start >= p1 and not _shortv(word[:start])):
            return word[:start]
        return word
    if word.endswith("l"):
        start = len(word) - 1
        if start >= p2 and start >= 1 and word[start - 1] == "l":
            return word[:start]
    return word


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    """Return the Porter2 stem of a lowercase ``word``."""
    if word in _EXCEPTION1:
        return _EXCEPTION1[word]
    if len(word) < 3:
        return word

    word, y_found = _prelude(word)
    p1, p2 = _mark_regions(word)

    word = _step_1a(word)
    if word not in _EXCEPTION2:
        word = _step_1b(word, p1)
        word = _step_1c(word)
        word = _step_2(word, p1)
        word = _step_3(word, p1, p2)
        word = _step_4(word, p2)
        word = _step_5(word, p1, p2)

    if y_found:
        word = word.replace("Y", "y")
    return word
