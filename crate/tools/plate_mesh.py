#!/usr/bin/env python3
"""Meshes for the plate-with-hole octant and its enlarged reference domain.

The octant is {0 <= x <= y <= Y, x^2 + y^2 >= R^2}: the hole arc radiates
(physical 1), the edge y = Y absorbs (2), the cuts x = 0 (3) and x = y (4)
are symmetry walls. The reference runs the same lattice up to y = H, so the
truncated mesh is an exact subset of it.

    python3 tools/plate_mesh.py --out crates/core/tests/fixtures
"""

import argparse
import math
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

EXCITATION, ABSORBING, WALL_X0, WALL_DIAG, SURFACE = 1, 2, 3, 4, 10


def points(R, Y, H, h):
    dy = 0.02 / round(0.02 / (h * math.sqrt(3) / 2))
    assert abs(Y / dy - round(Y / dy)) < 1e-9 and abs(H / dy - round(H / dy)) < 1e-9
    pts = []
    n_arc = math.ceil(R * math.pi / 4 / (0.7 * h))
    d = R / math.sqrt(2)
    pts.append((d, d))
    for k in range(1, n_arc):
        a = math.pi / 4 + (math.pi / 4) * k / n_arc
        pts.append((R * math.cos(a), R * math.sin(a)))
    pts.append((0.0, R))
    for j in range(1, round(H / dy) + 1):
        y = round(j * dy, 15) if j != round(Y / dy) else Y
        if j == round(H / dy):
            y = H
        if y > R:
            pts.append((0.0, y))
        if y * math.sqrt(2) > R:
            pts.append((y, y))
        off = 0.5 * h * (j % 2)
        x = off
        while x < y:
            near_wall = x < 0.4 * h or (y - x) / math.sqrt(2) < 0.4 * h
            near_hole = math.hypot(x, y) < R + 0.5 * h
            if not near_wall and not near_hole:
                pts.append((x, y))
            x += h
    return np.array(pts)


def cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def triangulate(pts, R):
    tri = Delaunay(pts).simplices
    keep = []
    for t in tri:
        p = pts[t]
        c = p.mean(axis=0)
        signed = cross(p[1] - p[0], p[2] - p[0])
        if math.hypot(*c) < R or abs(signed) < 2e-16:
            continue
        if signed < 0:
            t = t[[0, 2, 1]]
        keep.append(t)
    return np.array(keep)


def boundary(tris, pts, R, top):
    count = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            count.setdefault(tuple(sorted((a, b))), []).append((a, b))
    out = []
    for key, uses in count.items():
        if len(uses) != 1:
            continue
        a, b = uses[0]
        m = 0.5 * (pts[a] + pts[b])
        if abs(pts[a][1] - top) < 1e-12 and abs(pts[b][1] - top) < 1e-12:
            tag = ABSORBING
        elif pts[a][0] == 0.0 and pts[b][0] == 0.0:
            tag = WALL_X0
        elif pts[a][0] == pts[a][1] and pts[b][0] == pts[b][1]:
            tag = WALL_DIAG
        elif abs(math.hypot(*pts[a]) - R) < 1e-15 and abs(math.hypot(*pts[b]) - R) < 1e-15:
            tag = EXCITATION
        else:
            raise SystemExit(f"unclassified boundary edge at {m}")
        out.append((tag, a, b))
    return out


def write_msh(path, pts, tris, facets):
    used = sorted({int(i) for t in tris for i in t})
    ids = {old: new + 1 for new, old in enumerate(used)}
    with open(path, "w", newline="\n") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write("$PhysicalNames\n5\n")
        f.write(f'1 {EXCITATION} "hole"\n1 {ABSORBING} "absorbing"\n')
        f.write(f'1 {WALL_X0} "symmetry_x0"\n1 {WALL_DIAG} "symmetry_diagonal"\n2 {SURFACE} "plate"\n')
        f.write("$EndPhysicalNames\n")
        f.write(f"$Nodes\n{len(used)}\n")
        for old in used:
            x, y = pts[old]
            f.write(f"{ids[old]} {float(x)!r} {float(y)!r} 0\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{len(facets) + len(tris)}\n")
        k = 1
        for tag, a, b in sorted(facets):
            f.write(f"{k} 1 2 {tag} {tag} {ids[a]} {ids[b]}\n")
            k += 1
        for t in tris:
            f.write(f"{k} 2 2 {SURFACE} {SURFACE} {ids[t[0]]} {ids[t[1]]} {ids[t[2]]}\n")
            k += 1
        f.write("$EndElements\n")
    return len(used)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("crates/core/tests/fixtures"))
    ap.add_argument("--side", type=float, default=0.08, help="plate side a")
    ap.add_argument("--radius", type=float, default=0.01)
    ap.add_argument("--reference-top", type=float, default=0.1)
    ap.add_argument("--h", type=float, default=2.55e-4)
    args = ap.parse_args()
    R, Y, H = args.radius, args.side / 2, args.reference_top

    pts = points(R, Y, H, args.h)
    tris = triangulate(pts, R)
    ys = pts[tris][:, :, 1]
    crossing = ((ys < Y - 1e-12).any(axis=1) & (ys > Y + 1e-12).any(axis=1)).sum()
    if crossing:
        raise SystemExit(f"{crossing} triangles cross y = {Y}")
    inner = tris[(ys <= Y + 1e-12).all(axis=1)]

    args.out.mkdir(parents=True, exist_ok=True)
    n = write_msh(args.out / "plate_with_hole.msh", pts, inner, boundary(inner, pts, R, Y))
    n_ref = write_msh(args.out / "plate_with_hole_ref.msh", pts, tris, boundary(tris, pts, R, H))
    print(f"plate: {n} nodes, {len(inner)} triangles; reference: {n_ref} nodes, {len(tris)} triangles")


if __name__ == "__main__":
    main()
