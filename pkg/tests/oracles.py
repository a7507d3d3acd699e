"""Independent reference implementations used as test oracles.

None of these call into glap's numerical code; they are written from the
geometric constructions directly, favouring clarity over speed.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np
from scipy.optimize import brentq


# --------------------------------------------------------------------------
# Projections


def pannini_geometric(phi, theta, d, vc):
    """Cylinder construction: the sphere point goes radially to the unit
    cylinder at (sin phi, tan theta, cos phi), which is then projected from
    (0, 0, -d) onto the plane z = 1. Vertical compression blends that height
    with the rectilinear one."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cyl = (np.sin(phi), np.tan(theta), np.cos(phi))
    centre = (0.0, 0.0, -d)
    ray = [p - c for p, c in zip(cyl, centre)]
    t = (1.0 + d) / ray[2]
    x = t * ray[0]
    y_cyl = t * ray[1]
    # rectilinear: ray from the sphere centre through the sphere point
    y_rect = np.tan(theta) / np.cos(phi)
    return x, (1.0 - vc) * y_cyl + vc * y_rect


def pannini_inverse_numeric(x, y, d, vc):
    """Solve the forward map by 1-D root finding on phi (x is monotone in
    phi and independent of theta), then invert y, which is linear in tan theta."""
    lim = math.acos(-d) if d < 1 else math.pi
    if vc > 0:
        lim = min(lim, math.pi / 2)
    lim -= 1e-9

    def fx(p):
        return (1 + d) * math.sin(p) / (d + math.cos(p)) - x

    phi = brentq(fx, -lim, lim, xtol=1e-15, rtol=1e-15, maxiter=500)
    s = (1 + d) / (d + math.cos(phi))
    theta = math.atan(y / ((1 - vc) * s + vc / math.cos(phi)))
    return phi, theta


def gpp_geometric(phi, theta, d):
    """Ray from (0, 0, -d) through the sphere point, hitting z = 1."""
    p = np.array([math.cos(theta) * math.sin(phi), math.sin(theta), math.cos(theta) * math.cos(phi)])
    c = np.array([0.0, 0.0, -d])
    r = p - c
    t = (1.0 + d) / r[2]
    return t * r[0], t * r[1]


def pannini_area_scale_analytic(phi, theta, d, vc):
    """|det J| / cos(theta) from hand-derived partial derivatives."""
    cphi, sphi = np.cos(phi), np.sin(phi)
    s = (d + 1) / (d + cphi)
    ds = (d + 1) * sphi / (d + cphi) ** 2
    t = np.tan(theta)
    dx_dphi = s * cphi + sphi * ds
    dy_dtheta = ((1 - vc) * s + vc / cphi) / np.cos(theta) ** 2
    # dx/dtheta = 0, so the determinant is the product of the diagonal
    return np.abs(dx_dphi * dy_dtheta) / np.cos(theta)


# --------------------------------------------------------------------------
# Connected components


def flood_fill_partition(labels: np.ndarray, wrap: bool):
    """Set of frozensets of (row, col) pixels, one per 4-connected same-class region."""
    h, w = labels.shape
    seen = np.zeros_like(labels, dtype=bool)
    parts = set()
    for r0 in range(h):
        for c0 in range(w):
            if labels[r0, c0] == 0 or seen[r0, c0]:
                continue
            cls = labels[r0, c0]
            comp = []
            q = deque([(r0, c0)])
            seen[r0, c0] = True
            while q:
                r, c = q.popleft()
                comp.append((r, c))
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr, cc = r + dr, c + dc
                    if wrap:
                        cc %= w
                    if 0 <= rr < h and 0 <= cc < w and not seen[rr, cc] and labels[rr, cc] == cls:
                        seen[rr, cc] = True
                        q.append((rr, cc))
            parts.add(frozenset(comp))
    return parts


def partition_of(instances: np.ndarray):
    parts = {}
    for (r, c), k in np.ndenumerate(instances):
        if k:
            parts.setdefault(int(k), []).append((r, c))
    return {frozenset(v) for v in parts.values()}


# --------------------------------------------------------------------------
# Pairwise comparisons


def brute_force_triads(adj: np.ndarray) -> int:
    """Count triples (i, j, k) forming a directed 3-cycle."""
    n = adj.shape[0]
    count = 0
    for i, j, k in itertools.combinations(range(n), 3):
        if (adj[i, j] and adj[j, k] and adj[k, i]) or (adj[i, k] and adj[k, j] and adj[j, i]):
            count += 1
    return count


# --------------------------------------------------------------------------
# Mesh energies


def neighbours(n, m, h, w):
    for dn, dm in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        if 0 <= n + dn < h and 0 <= m + dm < w:
            yield n + dn, m + dm


def energies_loop(v, b, f, cw, bounds, relative=True, side=-1):
    """(E_c, E_ld, E_s, E_a) by literal double sums over ordered neighbour pairs."""
    h, w = v.shape[:2]
    e_c = e_ld = e_s = 0.0
    for n in range(h):
        for m in range(w):
            e_c += cw[n, m] * float(np.sum((v[n, m] - f[n, m]) ** 2))
            for nn, mm in neighbours(n, m, h, w):
                dv = v[n, m] - v[nn, mm]
                db = b[n, m] - b[nn, mm]
                e = db / np.linalg.norm(db)
                e_ld += (dv[0] * e[1] - dv[1] * e[0]) ** 2
                ds = dv - db if relative else dv
                e_s += float(ds @ ds)
    left, right, top, bottom = bounds
    e_a = 0.0
    for n in range(h):
        t = v[n, 0, 0] - left
        e_a += t * t / h if side * t > 0 else 0.0
        t = v[n, w - 1, 0] - right
        e_a += t * t / h if side * t < 0 else 0.0
    for m in range(w):
        t = v[0, m, 1] - top
        e_a += t * t / w if side * t > 0 else 0.0
        t = v[h - 1, m, 1] - bottom
        e_a += t * t / w if side * t < 0 else 0.0
    return np.array([e_c, e_ld, e_s, e_a])


# --------------------------------------------------------------------------
# Global parameter search


def render_labels_nearest(eri_labels, width, height, hw, hh, backward):
    """Viewport of an instance map looking at (0, 0), nearest lookup by hand."""
    xs = 2 * hw * ((np.arange(width) + 0.5) / width - 0.5)
    ys = 2 * hh * (0.5 - (np.arange(height) + 0.5) / height)
    x, y = np.meshgrid(xs, ys)
    phi, theta = backward(x, y)
    eh, ew = eri_labels.shape
    col = np.floor((phi / (2 * np.pi) + 0.5) * ew).astype(int) % ew
    row = np.clip(np.floor((0.5 - theta / np.pi) * eh).astype(int), 0, eh - 1)
    return eri_labels[row, col], phi, theta


def arc_points_bending(arc, forward, hw, hh, n=40001):
    t = np.linspace(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6, n)
    phi, theta = arc(t)
    x, y = forward(phi, theta)
    ok = np.isfinite(x) & (np.abs(x) <= hw) & (np.abs(y) <= hh)
    best, start = (0, 0), None
    for i, inside in enumerate(np.append(ok, False)):
        if inside and start is None:
            start = i
        elif not inside and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    x, y = x[best[0] : best[1]], y[best[0] : best[1]]
    if x.size < 2:
        return None
    chord = math.hypot(x[-1] - x[0], y[-1] - y[0])
    if chord < 0.1 * 2 * hw:
        return None
    return float(np.max(np.abs((x[-1] - x[0]) * (y - y[0]) - (y[-1] - y[0]) * (x - x[0]))) / chord**2)


def brute_force_search(instances, width, height, f_h, beta, arcs, d_grid, vc_grid, bending_cache=None):
    """Re-evaluate beta * S + B on every grid point and pick the minimum,
    ties to smaller vc then smaller d."""
    from glap.projections import pannini_backward, pannini_forward, PanniniParams

    ar = width / height
    rows = []
    cache = {} if bending_cache is None else bending_cache
    for d in d_grid:
        for vc in vc_grid:
            p = PanniniParams(d, vc)
            hw = (d + 1) * math.sin(f_h / 2) / (d + math.cos(f_h / 2))
            hh = hw / ar
            lab, phi, theta = render_labels_nearest(instances, width, height, hw, hh, lambda x, y: pannini_backward(x, y, p))
            mask = lab > 0
            if mask.any():
                a = pannini_area_scale_analytic(phi[mask], theta[mask], d, vc)
                a0 = pannini_area_scale_analytic(0.0, 0.0, d, vc)
                raw = float(np.mean(np.abs(np.log(a) - np.log(a0))))
                s = raw / (1 + raw)
            else:
                s = 0.0
            key = (d, vc, width, height, f_h)
            if key not in cache:
                vals = [b for arc in arcs if (b := arc_points_bending(arc, lambda ph, th: pannini_forward(ph, th, p, check=False), hw, hh)) is not None]
                cache[key] = min(1.0, float(np.mean(vals))) if vals else 0.0
            rows.append((beta * s + cache[key], vc, d, s, cache[key]))
    best = sorted(rows)[0]
    return best[2], best[1], rows
