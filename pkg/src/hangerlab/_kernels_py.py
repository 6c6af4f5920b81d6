"""Pure-numpy versions of the geometry kernels."""

import numpy as np


def points_in_polygon(px, py, poly):
    """Crossing-number containment test; returns a uint8 mask."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    poly = np.asarray(poly, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        straddles = (yi > py) != (yj > py)
        if straddles.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = (xj - xi) * (py - yi) / (yj - yi) + xi
            inside ^= straddles & (px < xcross)
        j = i
    return inside.astype(np.uint8)


def points_near_segments(px, py, segs, radius):
    """Mask of points within ``radius`` of any segment ``(x1, y1, x2, y2)``."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    hit = np.zeros(px.shape, dtype=bool)
    r2 = radius * radius
    for x1, y1, x2, y2 in np.asarray(segs, dtype=float):
        dx = x2 - x1
        dy = y2 - y1
        l2 = dx * dx + dy * dy
        if l2 > 0.0:
            t = ((px - x1) * dx + (py - y1) * dy) / l2
        else:
            t = np.zeros_like(px)
        t = np.clip(t, 0.0, 1.0)
        ex = px - (x1 + t * dx)
        ey = py - (y1 + t * dy)
        hit |= ex * ex + ey * ey <= r2
    return hit.astype(np.uint8)
