#!/usr/bin/env python3
"""Regenerates the bundled sample fixtures. Output is deterministic."""

import math
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")


def surface(u, v):
    # bumpy body plus a smaller lobe, about 1 m across
    r = 0.42 * (1.0 + 0.12 * math.sin(3 * u) * math.cos(2 * v) + 0.08 * math.cos(5 * v))
    x = r * math.sin(v) * math.cos(u)
    y = r * math.sin(v) * math.sin(u)
    z = 0.8 * r * math.cos(v)
    lobe = math.exp(-((u - 0.6) ** 2 + (v - 0.9) ** 2) / 0.08)
    x += 0.25 * lobe * math.sin(v) * math.cos(u)
    y += 0.25 * lobe * math.sin(v) * math.sin(u)
    z += 0.25 * lobe * math.cos(v)
    return (x, y, z)


def triangles(nu=48, nv=24):
    grid = [[surface(2 * math.pi * i / nu, math.pi * (j + 0.5) / nv) for i in range(nu)] for j in range(nv)]
    tris = []
    for j in range(nv - 1):
        for i in range(nu):
            a, b = grid[j][i], grid[j][(i + 1) % nu]
            c, d = grid[j + 1][i], grid[j + 1][(i + 1) % nu]
            tris += [(a, b, c), (b, d, c)]
    return tris


def area(t):
    a, b, c = t
    u = [b[k] - a[k] for k in range(3)]
    w = [c[k] - a[k] for k in range(3)]
    cr = (u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0])
    return 0.5 * math.sqrt(sum(x * x for x in cr))


def sample_mesh(n, rng):
    tris = triangles()
    weights = [area(t) for t in tris]
    out = []
    for t in rng.choices(tris, weights=weights, k=n):
        r1, r2 = rng.random(), rng.random()
        s = math.sqrt(r1)
        a, b, c = t
        out.append(tuple((1 - s) * a[k] + s * (1 - r2) * b[k] + s * r2 * c[k] for k in range(3)))
    return out


def write_obj(path, pts, title):
    with open(path, "w") as f:
        f.write(f"# {title}\n")
        for p in pts:
            f.write("v {:.6f} {:.6f} {:.6f}\n".format(*p))


def disk(rng, center, radius, n):
    pts = []
    while len(pts) < n:
        x, y = rng.uniform(-1, 1), rng.uniform(-1, 1)
        if x * x + y * y <= 1:
            pts.append((center[0] + radius * x, center[1] + radius * y))
    return pts


def main():
    rng = random.Random(20240611)
    os.makedirs(ROOT, exist_ok=True)
    write_obj(os.path.join(ROOT, "desk_surface.obj"), sample_mesh(500, rng), "500 points sampled from a bumpy closed surface")

    pts = disk(rng, (0.5, 0.5), 0.5, 60) + disk(rng, (10.5, 0.5), 0.5, 60)
    with open(os.path.join(ROOT, "two_clusters.csv"), "w") as f:
        f.write("# x,y\n")
        for p in pts:
            f.write("{:.6f},{:.6f}\n".format(*p))

    pts = disk(rng, (0.5, 0.5), 0.5, 120)
    with open(os.path.join(ROOT, "one_cluster.csv"), "w") as f:
        f.write("# x,y\n")
        for p in pts:
            f.write("{:.6f},{:.6f}\n".format(*p))

    with open(os.path.join(ROOT, "unit_square.csv"), "w") as f:
        f.write("# x,y\n")
        for i in range(10):
            for j in range(10):
                f.write("{:.6f},{:.6f}\n".format((i + 0.5) / 10, (j + 0.5) / 10))


if __name__ == "__main__":
    main()
