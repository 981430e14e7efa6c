"""Independent brute-force references used by the tests.

Nothing here calls into the closed forms under test: output laws come from
enumerating subsets or ordered draws, divergences from direct sums over
outputs, and smoothed deltas from enumerating every database.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb


def records(counts):
    return [t for t, c in enumerate(counts) for _ in range(c)]


def subset_pmf(counts, T):
    """Sampling without replacement by listing all C(n, T) index subsets."""
    recs = records(counts)
    m = len(counts)
    tally = {}
    for sub in itertools.combinations(range(len(recs)), T):
        h = [0] * m
        for i in sub:
            h[recs[i]] += 1
        h = tuple(h)
        tally[h] = tally.get(h, 0) + 1
    total = comb(len(recs), T)
    return {h: Fraction(c, total) for h, c in tally.items()}


def ordered_draws_pmf(M, n, T):
    """Counting with replacement by listing all n^T ordered draws; records 0..M-1 are marked."""
    tally = {}
    for draw in itertools.product(range(n), repeat=T):
        k = sum(1 for i in draw if i < M)
        tally[k] = tally.get(k, 0) + 1
    return {k: Fraction(c, n**T) for k, c in tally.items()}


def d_direct(p, q, factor):
    keys = set(p) | set(q)
    return sum((max(Fraction(0), p.get(a, 0) - factor * q.get(a, 0)) for a in keys), Fraction(0))


def replacement_neighbors(counts):
    m = len(counts)
    out = []
    for i in range(m):
        if counts[i] == 0:
            continue
        for j in range(m):
            if j != i:
                h = list(counts)
                h[i] -= 1
                h[j] += 1
                out.append(tuple(h))
    return out


def brute_delta(law, counts, factor):
    """Database-wise delta: worst neighbour, both directions."""
    p = law(tuple(counts))
    best = Fraction(0)
    for nb in replacement_neighbors(counts):
        q = law(nb)
        best = max(best, d_direct(p, q, factor), d_direct(q, p, factor))
    return best


def brute_shm_delta(counts, T, factor):
    return brute_delta(lambda h: subset_pmf(h, T), counts, factor)


def brute_smoothed(delta_of, members, n):
    """max over assignments of members to agents of E[delta(x)], by listing all m^n databases."""
    m = len(members[0])
    best = Fraction(0)
    for assign in itertools.product(range(len(members)), repeat=n):
        total = Fraction(0)
        for rec in itertools.product(range(m), repeat=n):
            pr = Fraction(1)
            for agent, t in enumerate(rec):
                pr *= members[assign[agent]][t]
            if pr == 0:
                continue
            h = [0] * m
            for t in rec:
                h[t] += 1
            total += pr * delta_of(tuple(h))
        best = max(best, total)
    return best


def in_triangle(point, tri):
    """Barycentric test for a point of the 2-simplex against three points (exact)."""
    (ax, ay), (bx, by), (cx, cy) = [(Fraction(p[0]), Fraction(p[1])) for p in tri]
    px, py = Fraction(point[0]), Fraction(point[1])
    det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
    if det == 0:
        # degenerate: point must lie on one of the segments
        return any(on_segment(point, tri[i], tri[j]) for i, j in ((0, 1), (1, 2), (0, 2)))
    l1 = ((px - ax) * (cy - ay) - (cx - ax) * (py - ay)) / det
    l2 = ((bx - ax) * (py - ay) - (px - ax) * (by - ay)) / det
    return l1 >= 0 and l2 >= 0 and l1 + l2 <= 1


def on_segment(point, a, b):
    px, py = Fraction(point[0]), Fraction(point[1])
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    if (bx - ax) * (py - ay) != (by - ay) * (px - ax):
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def in_hull_2d(point, pts):
    """Carathéodory: in the hull of planar points iff in some triangle, segment or point of them."""
    pts = [tuple(p) for p in pts]
    if any(tuple(map(Fraction, point)) == tuple(map(Fraction, p)) for p in pts):
        return True
    if any(on_segment(point, a, b) for a, b in itertools.combinations(pts, 2)):
        return True
    return any(in_triangle(point, tri) for tri in itertools.combinations(pts, 3))
