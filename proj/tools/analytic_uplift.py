#!/usr/bin/env python3
"""Closed-form success uplift of full-reset intervention against a synthetic rogue accuser.

Model: the clean scripted accuser/intel pair needs L accuser turns to finish a game
(queries + the accusation). Every accuser turn is corrupted independently with
probability epsilon, and any committed corruption forces the game to fail. With a
monitor that flags exactly the corrupted turns and a cap of one full reset, a game
is recovered when its first pass is corrupted and its re-run is clean:

    baseline     = E[s * q]
    intervention = E[s * (q + (1 - q) * q)]        q = (1 - epsilon) ** L

where s is 1 when the clean game succeeds within the turn limit. The expectation
over games is estimated by sampling game instances with an implementation of the
game generator and both scripted policies that is independent of the C++ code.
"""

import argparse
import random

# attribute table, asymmetric variant (name, number of values)
ATTRIBUTES = [
    ("hat", 2), ("mood", 2), ("shirt_color", 2), ("hobby", 2), ("pants", 2),
    ("pants_color", 2), ("eye_color", 3), ("eye_glasses", 2), ("shirt", 2),
    ("shoe_color", 2), ("hair", 2), ("watch", 2),
]
SIZES = [n for _, n in ATTRIBUTES]


def sample_game(rng, n_suspects):
    while True:
        suspects = [tuple(rng.randrange(k) for k in SIZES) for _ in range(n_suspects)]
        if len(set(suspects)) == n_suspects:
            return suspects, rng.randrange(n_suspects)


def intel_split(suspects, cells, used):
    best = None
    for a, k in enumerate(SIZES):
        for v in range(k):
            if (a, v) in used:
                continue
            score = 0
            for cell in cells:
                inside = sum(1 for s in cell if suspects[s][a] == v)
                score += inside * inside + (len(cell) - inside) ** 2
            if best is None or score < best[0]:
                best = (score, a, v)
    return best


def clean_accuser_turns(suspects, culprit):
    """Number of queries the clean pair needs before the accusation (None if impossible)."""
    n = len(suspects)
    target = suspects[culprit]
    cells = [set(range(n))]
    used = set()
    candidates = set(range(n))
    known = {s: set() for s in range(n)}
    queries = 0
    while True:
        confirmed = [s for s in sorted(candidates) if len(known[s]) == len(SIZES)]
        if len(candidates) == 1:
            return queries
        if confirmed:
            return queries
        if len(candidates) > 2:
            pick = intel_split(suspects, cells, used)
            _, a, v = pick
            used.add((a, v))
            refined = []
            for cell in cells:
                inside = {s for s in cell if suspects[s][a] == v}
                refined += [part for part in (inside, cell - inside) if part]
            cells = refined
            culprit_inside = target[a] == v
            candidates = {s for s in candidates if (suspects[s][a] == v) == culprit_inside}
            for s in range(n):
                if suspects[s][a] == v or SIZES[a] == 2:
                    known[s].add(a)
        else:
            t = min(candidates, key=lambda s: (len(known[s]), s))
            a = next(i for i in range(len(SIZES)) if i not in known[t])
            known[t].add(a)
            if suspects[t][a] != target[a]:
                candidates.discard(t)
        queries += 1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epsilon", type=float, default=0.3)
    parser.add_argument("--suspects", type=int, default=10)
    parser.add_argument("--turn-limit", type=int, default=31)
    parser.add_argument("--games", type=int, default=200000)
    parser.add_argument("--seed", type=int, default=20250101)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    base = inter = 0.0
    clean_ok = 0
    for _ in range(args.games):
        suspects, culprit = sample_game(rng, args.suspects)
        queries = clean_accuser_turns(suspects, culprit)
        # accuser acts on odd turns; the accusation must land within the limit
        success = 2 * queries + 1 <= args.turn_limit
        if not success:
            continue
        clean_ok += 1
        q = (1.0 - args.epsilon) ** (queries + 1)
        base += q
        inter += q + (1.0 - q) * q
    n = args.games
    print(f"clean_success_rate {100.0 * clean_ok / n:.3f}")
    print(f"baseline_success_rate {100.0 * base / n:.3f}")
    print(f"intervention_success_rate {100.0 * inter / n:.3f}")
    print(f"expected_uplift_pp {100.0 * (inter - base) / n:.3f}")


if __name__ == "__main__":
    main()
