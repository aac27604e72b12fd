"""Distractor construction for multiple-choice options.

Distractor pools maximize plausibility: type and color distractors prefer
values actually present in the scene, heading distractors must disagree
with the truth by at least 90 degrees, ordering distractors are
non-identity permutations, and set questions perturb the true set by one
element.
"""
from __future__ import annotations

import itertools
import random

from ..scenario import COLORS, KINDS
from .answers import FrameContext, label_ref, order_text, pretty_kind, set_text
from .types import BINARY_TYPES, InsufficientCandidates

MAX_DISTRACTORS = 3


def _take(rng: random.Random, pools: list[list[str]], truth: str, k: int) -> list[str]:
    """Draw up to k distinct values, exhausting earlier pools first."""
    out: list[str] = []
    seen = {truth}
    for pool in pools:
        pool = [p for p in pool if p not in seen]
        picked = rng.sample(pool, min(k - len(out), len(pool)))
        out.extend(picked)
        seen.update(picked)
        if len(out) >= k:
            break
    return out


def gen_distractors(
    qtype: str,
    params: dict,
    truth: str,
    aux: dict,
    ctx: FrameContext,
    rng: random.Random,
) -> list[str]:
    """Produce 1..MAX_DISTRACTORS distinct wrong options for a question."""
    g = ctx.graph
    v = g.vocab

    if qtype in BINARY_TYPES:
        return ["No" if truth == "Yes" else "Yes"]

    if qtype in ("identify_distance", "relative_distance", "embodied_distance"):
        out = _take(rng, [list(v.distance_words)], truth, MAX_DISTRACTORS)

    elif qtype == "identify_position":
        out = _take(rng, [list(v.sector_words)], truth, MAX_DISTRACTORS)

    elif qtype == "identify_heading":
        truth_idx = v.sector_words.index(truth)
        fair = [
            w
            for i, w in enumerate(v.sector_words)
            if min(abs(i - truth_idx), 8 - abs(i - truth_idx)) >= 2
        ]
        out = _take(rng, [fair], truth, MAX_DISTRACTORS)

    elif qtype == "identify_color":
        present = sorted({n.color for n in g.nodes.values() if n.color is not None})
        out = _take(rng, [present, list(COLORS)], truth, MAX_DISTRACTORS)

    elif qtype == "identify_type":
        present = sorted({pretty_kind(n.kind) for n in g.nodes.values()})
        everything = [pretty_kind(k) for k in KINDS]
        out = _take(rng, [present, everything], truth, MAX_DISTRACTORS)

    elif qtype in (
        "identify_leftmost",
        "identify_rightmost",
        "identify_closest",
        "identify_frontmost",
        "identify_backmost",
        "grounding",
    ):
        out = _take(rng, [[label_ref(l) for l in g.labels()]], truth, MAX_DISTRACTORS)

    elif qtype == "pick_closer":
        out = [label_ref(l) for l in params["ids"] if label_ref(l) != truth][:1]

    elif qtype == "relative_position":
        from ..scenegraph import EDGE_PHRASES

        out = _take(rng, [sorted(EDGE_PHRASES.values())], truth, MAX_DISTRACTORS)

    elif qtype == "embodied_sideness":
        out = ["right" if truth == "left" else "left"]

    elif qtype.startswith("order_"):
        ids = list(params["ids"])
        perms = [order_text(list(p)) for p in itertools.permutations(ids)]
        out = _take(rng, [perms], truth, MAX_DISTRACTORS)

    elif qtype in ("describe_sector", "describe_distance"):
        labels = g.labels()
        members = set(aux.get("members", ()))
        grown = [set_text(sorted(members | {l})) for l in labels if l not in members]
        shrunk = [set_text(sorted(members - {l})) for l in sorted(members)]
        out = _take(rng, [sorted(grown + shrunk)], truth, MAX_DISTRACTORS)

    elif qtype == "describe_scenario":
        from .answers import describe_node

        candidates = []
        for swap_label in g.labels():
            node = g.node(swap_label)
            for alt in KINDS:
                if alt == node.kind:
                    continue
                parts = []
                for l in g.labels():
                    n = g.node(l)
                    if l == swap_label:
                        phrase = f"{n.color} {pretty_kind(alt)}" if n.color else pretty_kind(alt)
                        an = "an" if (alt == "SUV" or phrase[:1].lower() in "aeiou") else "a"
                        parts.append(f"{label_ref(l)} is {an} {phrase}")
                    else:
                        parts.append(describe_node(n))
                candidates.append("; ".join(parts))
        out = _take(rng, [sorted(set(candidates))], truth, MAX_DISTRACTORS)

    else:
        raise InsufficientCandidates(f"no distractor rule for {qtype}")

    if not out:
        raise InsufficientCandidates(f"{qtype}: no distractors available")
    return out
