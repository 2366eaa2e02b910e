"""Planar polygon helpers: shoelace area and clipping against convex cells.

Sutherland-Hodgman clipping is exact for any simple subject polygon against
a convex clip region, which covers the only clipping this package needs
(building footprints against hexagon cells).
"""

from __future__ import annotations

import math


def polygon_area(ring) -> float:
    a = 0.0
    for i in range(len(ring)):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % len(ring)]
        a += x0 * y1 - x1 * y0
    return 0.5 * abs(a)


def clip_to_convex(subject, clip) -> list[tuple[float, float]]:
    """Clip a simple polygon to a convex polygon (both vertex rings).

    The clip ring must be convex and counterclockwise. Returns the clipped
    ring, possibly empty.
    """
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        # inside = left of directed clip edge a->b
        ex, ey = bx - ax, by - ay

        def inside(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax) >= 0.0

        def intersect(p, q):
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            t = (ex * (ay - p[1]) - ey * (ax - p[0])) / denom
            return (p[0] + t * dx, p[1] + t * dy)

        clipped = []
        prev = output[-1]
        prev_in = inside(prev)
        for cur in output:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    clipped.append(intersect(prev, cur))
                clipped.append(cur)
            elif prev_in:
                clipped.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
        output = clipped
    return output


def clipped_area(subject, clip) -> float:
    ring = clip_to_convex(subject, clip)
    if len(ring) < 3:
        return 0.0
    return polygon_area(ring)


def bearing(p, q) -> float:
    """Direction of the vector p->q in degrees, counterclockwise from +x."""
    return math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))
