#!/usr/bin/env python3
"""Generate the small NLI-style rationale and NLE corpora used by tests.

The sentences are template-built, not real e-SNLI data. Output is a pure
function of --seed.
"""

import argparse
import json
import random
from pathlib import Path

SUBJECTS = ["A man", "A woman", "A teenager", "An old man", "A young girl", "A dog", "A group of people",
            "A boy", "The chef", "A musician", "A nurse", "A cyclist"]
PLACES = ["in the park", "on the beach", "at the market", "in a kitchen", "on a busy street", "near the river",
          "inside a museum", "at the station"]
ACTIONS = [
    # (premise verb phrase, entailed, contradicted, neutral)
    ("is playing a guitar", "is making music", "is sleeping", "is performing for money"),
    ("is running fast", "is moving", "is sitting still", "is training for a marathon"),
    ("is eating an apple", "is eating fruit", "is fasting", "is very hungry"),
    ("is reading a book", "is reading", "is swimming", "is studying for an exam"),
    ("is riding a bicycle", "is on a bike", "is driving a truck", "is late for work"),
    ("is painting a wall", "is holding a brush", "is taking a nap", "is repainting their house"),
    ("is throwing a ball", "is playing", "is lying in bed", "is playing with a friend"),
    ("is cooking dinner", "is preparing food", "is out shopping", "is cooking for a party"),
]
LABELS = ["contradiction", "entailment", "neutral"]
NLE_TEMPLATES = {
    "entailment": ["{S} {a}, so {s} {h}.", "If {s} {a}, then {s} {h}.", "{s} {h} because {s} {a}."],
    "contradiction": ["{s} cannot be {a2} and {h2} at the same time.", "One cannot be {h2} while {s} {a}.",
                      "Either {s} {a} or {s} {h}, not both."],
    "neutral": ["Not everyone who {a} {h}.", "{s} {a}, but that does not mean {s} {h}.",
                "There is no indication that {s} {h}."],
}


def bare(vp):
    return vp.removeprefix("is ").removeprefix("are ")


def rationale(premise, hypothesis, label, rng):
    tokens = (premise + " " + hypothesis).split()
    keep_rate = {"entailment": 0.45, "contradiction": 0.35, "neutral": 0.25}[label]
    n_premise = len(premise.split())
    keep = [rng.random() < keep_rate or (i >= n_premise and rng.random() < 0.3) for i in range(len(tokens))]
    if not any(keep):
        keep[rng.randrange(len(tokens))] = True
    return " ".join(t if k else " " * len(t) for t, k in zip(tokens, keep))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    rationale_rows, nle_rows = [], []
    for i in range(args.count):
        subject = rng.choice(SUBJECTS)
        place = rng.choice(PLACES)
        act, ent, con, neu = rng.choice(ACTIONS)
        label = LABELS[i % 3]
        hyp_vp = {"entailment": ent, "contradiction": con, "neutral": neu}[label]
        premise = f"{subject} {act} {place}."
        hypothesis = f"{subject.replace('A ', 'The ', 1)} {hyp_vp}."
        base = {"id": f"fx{i:04d}", "premise": premise, "hypothesis": hypothesis, "label": label}
        rationale_rows.append({**base, "explanan": rationale(premise, hypothesis, label, rng), "kind": "rationale"})
        s = subject.lower()
        text = rng.choice(NLE_TEMPLATES[label]).format(s=s, S=subject, a=act, h=hyp_vp, a2=bare(act), h2=bare(hyp_vp))
        nle_rows.append({**base, "explanan": text[0].upper() + text[1:], "kind": "nle"})

    for name, rows in (("fixture_rationale.jsonl", rationale_rows), ("fixture_nle.jsonl", nle_rows)):
        with open(args.out / name, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
