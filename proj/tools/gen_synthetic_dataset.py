#!/usr/bin/env python3
"""Generate the shipped two-class synthetic dataset (data/synthetic_mix.jsonl)."""
import json
import random
import sys

EASY = [
    "What is {a} plus {b}?",
    "Add {a} and {b}.",
    "What do you get when you add {a} to {b}?",
    "Compute the sum of {a} and {b}.",
    "Tom has {a} apples and buys {b} more. How many apples does he have?",
    "What is {a} times {b}?",
    "Subtract {b} from {a}.",
    "A box holds {a} pens and another holds {b}. How many pens in total?",
]

HARD = [
    "Prove that the number of lattice paths from the origin to ({a},{b}) avoiding the diagonal satisfies a "
    "Catalan-type recurrence, then evaluate it modulo 1000.",
    "Determine how many integer solutions the Diophantine system with parameters {a} and {b} admits, "
    "using inclusion-exclusion over residue classes.",
    "Find the probability that a random permutation of {a} elements has exactly {b} fixed points, expressed "
    "via derangement numbers, and give the numerator.",
    "Evaluate the definite integral of a rational trigonometric function with period {a} after a Weierstrass "
    "substitution, reporting the coefficient of pi for parameter {b}.",
    "Count the spanning trees of a wheel graph with {a} spokes using the matrix-tree theorem, then reduce "
    "modulo {b}.",
    "Compute the order of the multiplicative group element {a} modulo the prime {b} by factoring the "
    "totient and checking orders of divisors.",
]


def main(path, seed=7, per_class=60):
    rng = random.Random(seed)
    rows = []
    for i in range(per_class):
        a, b = rng.randint(2, 30), rng.randint(2, 30)
        t = EASY[i % len(EASY)]
        answer = {0: a + b, 1: a + b, 2: a + b, 3: a + b, 4: a + b, 5: a * b, 6: a - b, 7: a + b}[i % len(EASY)]
        rows.append({"id": f"easy-{i:03d}", "query": t.format(a=a, b=b), "answer": str(answer),
                     "domain": "easy", "difficulty": 0.1})
    for i in range(per_class):
        a, b = rng.randint(5, 60), rng.randint(3, 97)
        rows.append({"id": f"hard-{i:03d}", "query": HARD[i % len(HARD)].format(a=a, b=b),
                     "answer": str(rng.randint(1, 9999)), "domain": "hard", "difficulty": 0.9})
    rng.shuffle(rows)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/synthetic_mix.jsonl")
