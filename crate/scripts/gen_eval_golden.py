"""Brute-force coverage of a hand-made polyline over unit_square.csv.

Writes crates/cli/tests/fixtures/{eval_path.csv,eval_golden.json}.
"""
import json
import math
import os

ROOT = os.path.join(os.path.dirname(__file__), "..")
SAMPLES = os.path.join(ROOT, "crates/core/tests/fixtures/unit_square.csv")
OUT = os.path.join(ROOT, "crates/cli/tests/fixtures")
RADIUS = 0.13
PATH = [(0.05, 0.05), (0.95, 0.05), (0.2, 0.8), (0.2, 0.95)]


def seg_dist(p, a, b):
    ab = [b[i] - a[i] for i in range(2)]
    ap = [p[i] - a[i] for i in range(2)]
    den = sum(c * c for c in ab)
    t = 0.0 if den == 0 else max(0.0, min(1.0, sum(ab[i] * ap[i] for i in range(2)) / den))
    q = [a[i] + t * ab[i] for i in range(2)]
    return math.dist(p, q)


def main():
    samples = []
    with open(SAMPLES) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                samples.append(tuple(float(v) for v in line.split(",")))
    covered = [
        min(seg_dist(p, PATH[k], PATH[k + 1]) for k in range(len(PATH) - 1)) <= RADIUS
        for p in samples
    ]
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "eval_path.csv"), "w") as f:
        f.write("x_1,x_2\n")
        for x, y in PATH:
            f.write(f"{x!r},{y!r}\n")
    golden = {
        "radius": RADIUS,
        "covered_fraction": sum(covered) / len(covered),
        "per_sample_covered": covered,
        "path_length": sum(math.dist(PATH[k], PATH[k + 1]) for k in range(len(PATH) - 1)),
    }
    with open(os.path.join(OUT, "eval_golden.json"), "w") as f:
        json.dump(golden, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
