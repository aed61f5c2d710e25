"""Brute-force and closed-form references, independent of the package code."""

import math

import numpy as np
from scipy import integrate, stats


def brute_hausdorff(a, b):
    """O(n m) double loop."""
    def directed(p, q):
        worst = 0.0
        for x in p:
            best = math.inf
            for y in q:
                best = min(best, math.dist(x, y))
            worst = max(worst, best)
        return worst

    return max(directed(a, b), directed(b, a))


def _segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(max(float((p - a) @ ab) / denom, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _ccw(poly):
    """Order the vertices of a convex polygon counter-clockwise."""
    c = poly.mean(axis=0)
    ang = np.arctan2(poly[:, 1] - c[1], poly[:, 0] - c[0])
    return poly[np.argsort(ang)]


def point_polygon_distance(p, poly):
    poly = _ccw(np.asarray(poly, dtype=float))
    edges = list(zip(poly, np.roll(poly, -1, axis=0)))
    inside = all((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0 for a, b in edges)
    if inside:
        return 0.0
    return min(_segment_distance(p, a, b) for a, b in edges)


def exact_convex_hausdorff_2d(p, q):
    """Hausdorff distance of two convex polygons.

    The distance to a convex set is a convex function, so each one-sided
    excess is attained at a vertex.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    hp = max(point_polygon_distance(v, q) for v in p)
    hq = max(point_polygon_distance(v, p) for v in q)
    return max(hp, hq)


def contains_all(hull_ccw, points, tol=1e-9):
    """Every point lies in the CCW convex polygon (half-plane scan)."""
    hull_ccw = np.asarray(hull_ccw)
    for a, b in zip(hull_ccw, np.roll(hull_ccw, -1, axis=0)):
        c = (b[0] - a[0]) * (points[:, 1] - a[1]) - (b[1] - a[1]) * (points[:, 0] - a[0])
        if np.any(c < -tol):
            return False
    return True


def ball_lattice_count(radius, m):
    k = int(radius)
    count = 0
    for p in np.ndindex(*(2 * k + 1,) * m):
        v = np.array(p) - k
        if v @ v <= radius * radius:
            count += 1
    return count


def median_normalized_max(n, sigma=1.0):
    """Exact median of ``sigma * max(n iid N(0,1)) / b(n)``: Phi^n(x) = 1/2."""
    b = math.sqrt(2 * math.log(max(n, 2)))
    return sigma * stats.norm.ppf(0.5 ** (1.0 / n)) / b


def evt_expected_max(n):
    """Extreme-value expansion ``b - (ln ln n + ln 4 pi) / (2 b) + gamma / b``."""
    b = math.sqrt(2 * math.log(n))
    return b - (math.log(math.log(n)) + math.log(4 * math.pi)) / (2 * b) + np.euler_gamma / b


def equicorrelated_z_cdf(z, n, r, sigma=1.0):
    """P(max_k (sqrt(1-r) zeta_k + sqrt(r) eta) * sigma / b(n) <= z) by quadrature."""
    b = math.sqrt(2 * math.log(max(n, 2)))

    def f(y):
        thr = (z * b / sigma - math.sqrt(r) * y) / math.sqrt(1 - r)
        return stats.norm.cdf(thr) ** n * stats.norm.pdf(y)

    return integrate.quad(f, -12, 12, limit=400)[0]


def disk_containment_probability(n, slack):
    """P(all of n iid standard 2D normals lie in the disk of radius (1+slack) b(n))."""
    b = math.sqrt(2 * math.log(n))
    return (1 - math.exp(-((1 + slack) * b) ** 2 / 2)) ** n
