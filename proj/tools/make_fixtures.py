#!/usr/bin/env python3
"""Regenerates the point-cloud fixtures under tests/data.

bunny_3k.xyz: 3000 area-weighted surface samples of the Stanford bunny mesh
(npm package "bunny", public domain), scaled by 3 so the mean point spacing
(~0.4) is well above sigma = 0.1.

sphere_2k.xyz: 2000 points of a Fibonacci lattice on a sphere of radius 5.

Usage: make_fixtures.py path/to/bunny/index.js [outdir]
"""
import json
import re
import sys
from pathlib import Path

import numpy as np

SEED = 20240611
BUNNY_POINTS = 3000
BUNNY_SCALE = 3.0


def load_bunny(index_js):
    text = Path(index_js).read_text()
    fields = dict(re.findall(r"exports\.(\w+)=(\[.*?\]\])", text, re.S))
    return np.array(json.loads(fields["positions"])), np.array(json.loads(fields["cells"]))


def sample_mesh(verts, faces, n, rng):
    tri = verts[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    idx = rng.choice(len(faces), n, p=area / area.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    t = tri[idx]
    return (1 - r1)[:, None] * t[:, 0] + (r1 * (1 - r2))[:, None] * t[:, 1] + (r1 * r2)[:, None] * t[:, 2]


def fibonacci_sphere(n, radius):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    phi = np.pi * (3 - np.sqrt(5)) * i
    return radius * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def write_xyz(path, pts, comment):
    with open(path, "w") as f:
        f.write(f"# {comment}\n")
        for p in pts:
            f.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    out = Path(sys.argv[2] if len(sys.argv) > 2 else Path(__file__).resolve().parent.parent / "tests" / "data")
    out.mkdir(parents=True, exist_ok=True)
    verts, faces = load_bunny(sys.argv[1])
    rng = np.random.default_rng(SEED)
    bunny = sample_mesh(verts, faces, BUNNY_POINTS, rng) * BUNNY_SCALE
    write_xyz(out / "bunny_3k.xyz", bunny,
              f"Stanford bunny (public domain), {BUNNY_POINTS} area-weighted samples, scale {BUNNY_SCALE}")
    write_xyz(out / "sphere_2k.xyz", fibonacci_sphere(2000, 5.0), "Fibonacci sphere, 2000 points, radius 5")


if __name__ == "__main__":
    main()
