"""Regenerate the synthetic corpora shipped in src/sugmine/resources/.

separable_*   balanced; suggestion cues never occur in non-suggestions
imbalanced_*  9:1 negatives to positives; the only cue ("maybe") is shared
              by both classes, so the decision flips with the class weights

Run from the repository root:  python tools/make_synthetic.py
"""

import random
from pathlib import Path

from sugmine.data import Dataset, Sample, write_dataset

OUT = Path(__file__).resolve().parents[1] / "src" / "sugmine" / "resources"

FEATURES = [
    "dark mode", "tabs", "offline sync", "export to pdf", "a search bar",
    "keyboard shortcuts", "cloud backup", "custom themes", "a widget",
    "voice input", "folders", "batch delete",
]
SUGGEST = [
    "You should add {f}.", "Please add {f}!", "It'd be great to have {f}.",
    "I suggest adding {f}.", "Please consider {f}.", "Why not support {f}?",
    "I'd recommend adding {f}.", "Could you please include {f}?",
]
REPORT = [
    "The update broke {f}.", "I've been using {f} daily.", "{F} works fine on my laptop.",
    "Yesterday {f} crashed twice.", "My brother uses {f} at 10:30 every day.",
    "The store page lists {f}.", "{F} was removed on 12/05/2019.", "I don't use {f} much.",
]

NOUNS = ["app", "sync", "menu", "screen", "update", "window", "icon", "store", "font", "login"]
VERBS = ["was", "looks", "feels", "seems", "got", "became"]
ADJS = ["slow", "fast", "odd", "fine", "new", "small", "large", "bright", "quiet", "old"]


def _fill(template, rng):
    f = rng.choice(FEATURES)
    return template.format(f=f, F=f[0].upper() + f[1:])


def separable(n_pos, n_neg, rng, prefix):
    rows = [(1, _fill(rng.choice(SUGGEST), rng)) for _ in range(n_pos)]
    rows += [(0, _fill(rng.choice(REPORT), rng)) for _ in range(n_neg)]
    rng.shuffle(rows)
    return Dataset(Sample(f"{prefix}{i:03d}", text, label) for i, (label, text) in enumerate(rows))


def _plain(rng, cue):
    words = ["the", rng.choice(NOUNS), rng.choice(VERBS), rng.choice(ADJS)]
    if cue:
        words.insert(rng.randrange(len(words) + 1), "maybe")
    return " ".join(words) + "."


def imbalanced(n_pos, n_neg, rng, prefix, p_cue_pos=0.8, p_cue_neg=0.15):
    rows = [(1, _plain(rng, rng.random() < p_cue_pos)) for _ in range(n_pos)]
    rows += [(0, _plain(rng, rng.random() < p_cue_neg)) for _ in range(n_neg)]
    rng.shuffle(rows)
    return Dataset(Sample(f"{prefix}{i:03d}", text, label) for i, (label, text) in enumerate(rows))


def main():
    rng = random.Random(20190609)
    write_dataset(OUT / "separable_train.csv", separable(32, 32, rng, "st"))
    write_dataset(OUT / "separable_val.csv", separable(8, 8, rng, "sv"))
    write_dataset(OUT / "imbalanced_train.csv", imbalanced(30, 270, rng, "it"))
    write_dataset(OUT / "imbalanced_val.csv", imbalanced(10, 90, rng, "iv"))
    write_dataset(OUT / "imbalanced_test.csv", imbalanced(20, 180, rng, "ie"))


if __name__ == "__main__":
    main()
