"""Hot inner loops, each with a numba kernel and a pure numpy twin.

The numba path is used when numba imports and ``GLAP_BACKEND`` is not set
to ``numpy``. Both paths must agree; tests run them side by side and
``benchmarks/bench_kernels.py`` times them.
"""
from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA and os.environ.get("GLAP_BACKEND", "numba").lower() != "numpy" else "numpy"


def set_backend(name: str) -> str:
    """Switch kernels at runtime; returns the previous backend name."""
    global BACKEND
    name = name.lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, BACKEND = BACKEND, name
    return prev


def get_backend() -> str:
    return BACKEND


# --------------------------------------------------------------------------
# Raster sampling


def _bilinear_np(img, u, v, wrap):
    h, w, _ = img.shape
    v = np.clip(v, 0.0, h - 1.0)
    y0 = np.minimum(np.floor(v).astype(np.intp), max(h - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    fy = (v - y0)[:, None]
    if wrap:
        u = np.mod(u, w)
        x0 = np.floor(u).astype(np.intp)
        x0 = np.where(x0 >= w, 0, x0)
        fx = (u - x0)[:, None]
        x1 = (x0 + 1) % w
    else:
        u = np.clip(u, 0.0, w - 1.0)
        x0 = np.minimum(np.floor(u).astype(np.intp), max(w - 2, 0))
        x1 = np.minimum(x0 + 1, w - 1)
        fx = (u - x0)[:, None]
    top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
    bot = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
    return (1.0 - fy) * top + fy * bot


def _nearest_np(img, u, v, wrap):
    h, w = img.shape[:2]
    r = np.clip(np.floor(v + 0.5), 0, h - 1).astype(np.intp)
    c = np.floor(u + 0.5)
    c = (np.mod(c, w) if wrap else np.clip(c, 0, w - 1)).astype(np.intp)
    return img[r, c]


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _bilinear_nb(img, u, v, wrap):
        h, w, nc = img.shape
        n = u.shape[0]
        out = np.empty((n, nc))
        for k in range(n):
            vv = min(max(v[k], 0.0), h - 1.0)
            y0 = min(int(np.floor(vv)), max(h - 2, 0))
            y1 = min(y0 + 1, h - 1)
            fy = vv - y0
            if wrap:
                uu = u[k] % w
                x0 = int(np.floor(uu))
                if x0 >= w:
                    x0 = 0
                fx = uu - x0
                x1 = (x0 + 1) % w
            else:
                uu = min(max(u[k], 0.0), w - 1.0)
                x0 = min(int(np.floor(uu)), max(w - 2, 0))
                x1 = min(x0 + 1, w - 1)
                fx = uu - x0
            for ch in range(nc):
                top = (1.0 - fx) * img[y0, x0, ch] + fx * img[y0, x1, ch]
                bot = (1.0 - fx) * img[y1, x0, ch] + fx * img[y1, x1, ch]
                out[k, ch] = (1.0 - fy) * top + fy * bot
        return out


def bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray, wrap: bool = False) -> np.ndarray:
    """Sample ``img`` (H, W, C) at column ``u`` / row ``v`` pixel coordinates.

    Rows clamp to the border. Columns wrap when ``wrap`` else clamp.
    Returns float64 of shape (N, C).
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64).ravel()
    v = np.ascontiguousarray(v, dtype=np.float64).ravel()
    if BACKEND == "numba":
        return _bilinear_nb(img, u, v, bool(wrap))
    return _bilinear_np(img, u, v, bool(wrap))


def nearest_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray, wrap: bool = False) -> np.ndarray:
    # a gather; numpy fancy indexing is already the fast path
    return _nearest_np(img, np.asarray(u, dtype=float).ravel(), np.asarray(v, dtype=float).ravel(), wrap)


# --------------------------------------------------------------------------
# Connected components


def _first_occurrence_relabel(comp: np.ndarray) -> np.ndarray:
    flat = comp.ravel()
    fg = flat > 0
    out = np.zeros(flat.shape, dtype=np.int64)
    if not fg.any():
        return out.reshape(comp.shape)
    ids, first = np.unique(flat[fg], return_index=True)
    order = np.argsort(first, kind="stable")
    lut = np.empty(ids.size, dtype=np.int64)
    lut[order] = np.arange(1, ids.size + 1)
    out[fg] = lut[np.searchsorted(ids, flat[fg])]
    return out.reshape(comp.shape)


def _cca_np(labels, wrap):
    h, w = labels.shape
    comp = np.zeros((h, w), dtype=np.int64)
    four = ndimage.generate_binary_structure(2, 1)
    offset = 0
    for cls in np.unique(labels):
        if cls == 0:
            continue
        lab, n = ndimage.label(labels == cls, structure=four)
        comp[lab > 0] = lab[lab > 0] + offset
        offset += n
    if wrap and w > 1 and offset:
        parent = np.arange(offset + 1)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        left, right = comp[:, 0], comp[:, -1]
        seam = (left > 0) & (labels[:, 0] == labels[:, -1])
        for a, b in zip(left[seam], right[seam]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(offset + 1)])
        comp = roots[comp]
    return _first_occurrence_relabel(comp)


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _find(parent, a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            nxt = parent[a]
            parent[a] = root
            a = nxt
        return root

    @numba.njit(cache=True)
    def _union(parent, a, b):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra < rb:
            parent[rb] = ra
        elif rb < ra:
            parent[ra] = rb

    @numba.njit(cache=True)
    def _cca_nb(labels, wrap):
        h, w = labels.shape
        parent = np.arange(h * w)
        for r in range(h):
            for c in range(w):
                lab = labels[r, c]
                if lab == 0:
                    continue
                k = r * w + c
                if c > 0 and labels[r, c - 1] == lab:
                    _union(parent, k, k - 1)
                if r > 0 and labels[r - 1, c] == lab:
                    _union(parent, k, k - w)
            if wrap and w > 1 and labels[r, 0] != 0 and labels[r, 0] == labels[r, w - 1]:
                _union(parent, r * w, r * w + w - 1)
        # roots are the smallest flat index of each set, so numbering roots in
        # scan order numbers components by first occurrence
        out = np.zeros((h, w), dtype=np.int64)
        ids = np.zeros(h * w, dtype=np.int64)
        nxt = 0
        for r in range(h):
            for c in range(w):
                if labels[r, c] == 0:
                    continue
                root = _find(parent, r * w + c)
                if ids[root] == 0:
                    nxt += 1
                    ids[root] = nxt
                out[r, c] = ids[root]
        return out


def connected_components(labels: np.ndarray, wrap: bool = True) -> np.ndarray:
    """4-connected instance labelling of a class-label raster.

    Pixels of equal nonzero class that touch horizontally or vertically share
    an id; with ``wrap`` the first and last columns are adjacent. Ids are
    1..K in order of first appearance in row-major scan; 0 stays background.
    """
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.ndim != 2:
        raise ValueError("label raster must be 2-D")
    if BACKEND == "numba":
        return _cca_nb(labels, bool(wrap))
    return _cca_np(labels, bool(wrap))


# --------------------------------------------------------------------------
# Mesh energy


def _energy_np(v, b, f, cw, bounds, relative, side):
    gc = 2.0 * cw[..., None] * (v - f)
    e_c = float(np.sum(cw[..., None] * (v - f) ** 2))

    g_ld = np.zeros_like(v)
    g_s = np.zeros_like(v)
    e_ld = 0.0
    e_s = 0.0
    for axis in (0, 1):
        if v.shape[axis] < 2:
            continue
        sl_i = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
        sl_j = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
        dv = v[sl_i] - v[sl_j]
        db = b[sl_i] - b[sl_j]
        e = db / np.linalg.norm(db, axis=-1, keepdims=True)
        # the ordered double sum visits every undirected edge twice
        cross = dv[..., 0] * e[..., 1] - dv[..., 1] * e[..., 0]
        e_ld += 2.0 * float(np.sum(cross**2))
        gi = 4.0 * cross[..., None] * np.stack([e[..., 1], -e[..., 0]], axis=-1)
        g_ld[sl_i] += gi
        g_ld[sl_j] -= gi
        ds = dv - db if relative else dv
        e_s += 2.0 * float(np.sum(ds**2))
        g_s[sl_i] += 4.0 * ds
        g_s[sl_j] -= 4.0 * ds

    hm, wm = v.shape[:2]
    left, right, top, bottom = bounds
    g_a = np.zeros_like(v)
    x_l = v[:, 0, 0] - left
    x_r = v[:, -1, 0] - right
    y_t = v[0, :, 1] - top
    y_b = v[-1, :, 1] - bottom
    # side +1: a border vertex is penalised for moving inwards, -1: outwards
    on_l, on_r, on_t, on_b = side * x_l > 0, side * x_r < 0, side * y_t > 0, side * y_b < 0
    e_a = (
        float(np.sum(np.where(on_l, x_l**2, 0.0))) / hm
        + float(np.sum(np.where(on_r, x_r**2, 0.0))) / hm
        + float(np.sum(np.where(on_t, y_t**2, 0.0))) / wm
        + float(np.sum(np.where(on_b, y_b**2, 0.0))) / wm
    )
    g_a[:, 0, 0] += np.where(on_l, 2.0 * x_l / hm, 0.0)
    g_a[:, -1, 0] += np.where(on_r, 2.0 * x_r / hm, 0.0)
    g_a[0, :, 1] += np.where(on_t, 2.0 * y_t / wm, 0.0)
    g_a[-1, :, 1] += np.where(on_b, 2.0 * y_b / wm, 0.0)
    return np.array([e_c, e_ld, e_s, e_a]), np.stack([gc, g_ld, g_s, g_a])


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _edge_terms(v, b, g, ia, ja, ib, jb, relative, acc):
        dx = v[ia, ja, 0] - v[ib, jb, 0]
        dy = v[ia, ja, 1] - v[ib, jb, 1]
        bx = b[ia, ja, 0] - b[ib, jb, 0]
        by = b[ia, ja, 1] - b[ib, jb, 1]
        nrm = np.sqrt(bx * bx + by * by)
        ex = bx / nrm
        ey = by / nrm
        cross = dx * ey - dy * ex
        acc[1] += 2.0 * cross * cross
        g[1, ia, ja, 0] += 4.0 * cross * ey
        g[1, ia, ja, 1] -= 4.0 * cross * ex
        g[1, ib, jb, 0] -= 4.0 * cross * ey
        g[1, ib, jb, 1] += 4.0 * cross * ex
        if relative:
            dx -= bx
            dy -= by
        acc[2] += 2.0 * (dx * dx + dy * dy)
        g[2, ia, ja, 0] += 4.0 * dx
        g[2, ia, ja, 1] += 4.0 * dy
        g[2, ib, jb, 0] -= 4.0 * dx
        g[2, ib, jb, 1] -= 4.0 * dy

    @numba.njit(cache=True)
    def _energy_nb(v, b, f, cw, bounds, relative, side):
        hm, wm, _ = v.shape
        g = np.zeros((4, hm, wm, 2))
        acc = np.zeros(4)
        for n in range(hm):
            for m in range(wm):
                w_i = cw[n, m]
                if w_i != 0.0:
                    rx = v[n, m, 0] - f[n, m, 0]
                    ry = v[n, m, 1] - f[n, m, 1]
                    acc[0] += w_i * (rx * rx + ry * ry)
                    g[0, n, m, 0] = 2.0 * w_i * rx
                    g[0, n, m, 1] = 2.0 * w_i * ry
                if m + 1 < wm:
                    _edge_terms(v, b, g, n, m, n, m + 1, relative, acc)
                if n + 1 < hm:
                    _edge_terms(v, b, g, n, m, n + 1, m, relative, acc)
        left, right, top, bottom = bounds[0], bounds[1], bounds[2], bounds[3]
        for n in range(hm):
            t = v[n, 0, 0] - left
            if side * t > 0:
                acc[3] += t * t / hm
                g[3, n, 0, 0] += 2.0 * t / hm
            t = v[n, wm - 1, 0] - right
            if side * t < 0:
                acc[3] += t * t / hm
                g[3, n, wm - 1, 0] += 2.0 * t / hm
        for m in range(wm):
            t = v[0, m, 1] - top
            if side * t > 0:
                acc[3] += t * t / wm
                g[3, 0, m, 1] += 2.0 * t / wm
            t = v[hm - 1, m, 1] - bottom
            if side * t < 0:
                acc[3] += t * t / wm
                g[3, hm - 1, m, 1] += 2.0 * t / wm
        return acc, g


def mesh_energy_terms(v, b, f, cw, bounds, relative: bool = False, side: int = 1):
    """Unweighted (E_c, E_ld, E_s, E_a) and their gradients, shape (4, H, W, 2).

    ``cw`` holds the per-vertex conformality weight (correction strength on
    object vertices, 0 elsewhere). ``bounds`` are the (left, right, top,
    bottom) limits of the asymmetric boundary term; ``side`` = +1 penalises
    border vertices inside the bounds, -1 those outside.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    v = np.ascontiguousarray(v, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    cw = np.ascontiguousarray(cw, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    if BACKEND == "numba":
        return _energy_nb(v, b, f, cw, bounds, bool(relative), float(side))
    return _energy_np(v, b, f, cw, bounds, bool(relative), float(side))
