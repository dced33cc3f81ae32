"""Search for three reasonable prediction sets whose mean ensemble beats each member on binary F1.

Members are enumerated in lexicographic order over a small probability grid;
the first triple found (smallest, so the fixture is reproducible) is written
to tests/fixtures/ensemble_mean_wins.json.
"""

import itertools
import json
from pathlib import Path

import numpy as np

from sugmine.metrics import binary_f1, confusion

GOLD = [1, 1, 1, 0, 0]
GRID = (0.2, 0.45, 0.6, 0.9)
MIN_MEMBER_F1 = 0.5
OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "ensemble_mean_wins.json"


def f1(p_pos):
    return binary_f1(confusion((np.asarray(p_pos) > 0.5).astype(int).tolist(), GOLD))


def main():
    candidates = [np.array(c) for c in itertools.product(GRID, repeat=len(GOLD))]
    scores = [f1(c) for c in candidates]
    # only members that are decent on their own
    usable = [n for n, s in enumerate(scores) if s >= MIN_MEMBER_F1]
    for i, j, k in itertools.combinations(usable, 3):
        trio = (candidates[i], candidates[j], candidates[k])
        mean = sum(trio) / 3
        if np.any(np.abs(mean - 0.5) < 1e-6):
            continue
        mean_f1 = f1(mean)
        if mean_f1 > max(scores[i], scores[j], scores[k]):
            fixture = {
                "ids": [f"e{n}" for n in range(len(GOLD))],
                "gold": GOLD,
                "members_p_pos": [t.tolist() for t in trio],
                "member_binary_f1": [scores[i], scores[j], scores[k]],
                "mean_binary_f1": mean_f1,
            }
            OUT.write_text(json.dumps(fixture, indent=2) + "\n")
            print(f"wrote {OUT}: members {fixture['member_binary_f1']} -> mean {mean_f1}")
            return
    raise SystemExit("no such triple on this grid")


if __name__ == "__main__":
    main()
