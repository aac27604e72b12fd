import pytest

from scenebench.qa.parsing import ParseFailure, parse_response


YESNO = [("A", "Yes"), ("B", "No")]
FOUR = [("A", "red"), ("B", "blue"), ("C", "green"), ("D", "white")]
LABELS = [("A", "<0>"), ("B", "<1>"), ("C", "<2>"), ("D", "<3>")]


def ok(text, options, expected):
    got = parse_response(text, options)
    assert got == expected, f"{text!r} -> {got!r}, wanted {expected!r}"


def fail(text, options):
    got = parse_response(text, options)
    assert isinstance(got, ParseFailure), f"{text!r} -> {got!r}, wanted ParseFailure"


# Fixture table: (reply text, options, expected letter or None for failure).
CASES = [
    # lone characters
    ("A", YESNO, "A"),
    ("b", YESNO, "B"),
    (" C ", FOUR, "C"),
    ("\nD\n", FOUR, "D"),
    ("E", FOUR, None),
    ("x", YESNO, None),
    ("7", FOUR, None),
    ("?", YESNO, None),
    # option-text matches
    ("I think the answer is Yes.", YESNO, "A"),
    ("no", YESNO, "B"),
    ("The car is blue.", FOUR, "B"),
    ("Probably green, not red. Final answer: green.", FOUR, "C"),
    # last occurrence wins
    ("Yes... wait, actually No.", YESNO, "B"),
    ("red red blue", FOUR, "B"),
    # word boundaries protect short options
    ("Nothing matches here.", YESNO, None),
    ("I cannot tell.", YESNO, None),
    ("Yesterday it rained.", YESNO, None),
    # boundary guard only applies to word characters
    ("the nearest is <2> in the image", LABELS, "C"),
    ("<0> then <3>", LABELS, "D"),
    # case-insensitive keyword match
    ("YES", YESNO, "A"),
    ("BLUE!", FOUR, "B"),
    # parenthesized letters as a fallback
    ("The answer is (B).", YESNO, "B"),
    ("(A) at first, but on reflection (D).", FOUR, "D"),
    ("(E) is my pick", FOUR, None),
    ("(q)", YESNO, None),
    # option text beats parenthesized letter
    ("(A) ... I mean No", YESNO, "B"),
    # refusals and junk
    ("I cannot provide a definitive answer to this question.", FOUR, None),
    ("", YESNO, None),
    ("   \n\t  ", FOUR, None),
    ("The scene shows several vehicles near an intersection.", FOUR, None),
    ("42", FOUR, None),
    ("maybe?", YESNO, None),
]


def test_fixture_has_at_least_30_cases():
    assert len(CASES) >= 30


@pytest.mark.parametrize("text,options,expected", CASES)
def test_parse_cases(text, options, expected):
    if expected is None:
        fail(text, options)
    else:
        ok(text, options, expected)


def test_dict_options_accepted():
    ok("blue", {"A": "red", "B": "blue"}, "B")
    ok("B", {"A": "red", "B": "blue"}, "B")


def test_parse_failure_is_falsy_and_never_equals_a_letter():
    got = parse_response("gibberish", YESNO)
    assert isinstance(got, ParseFailure)
    assert not got
    assert got != "A" and got != "B"
    assert got.reason


def test_longer_match_at_same_start_wins():
    options = [("A", "car"), ("B", "car wash")]
    ok("I saw the car wash", options, "B")


def test_lone_letter_beats_embedded_keywords():
    # a single-character reply is final even when option text also appears
    ok("A", [("A", "Yes"), ("B", "A")], "A")
