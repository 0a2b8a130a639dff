"""Brute-force reference implementations used only by the tests.

Nothing here calls into the library's numerical code.
"""
from __future__ import annotations

import math
from collections import deque


def flood_fill_components(mask, connectivity):
    """Components as sorted flat-index lists, ordered by first pixel."""
    h, w = len(mask), len(mask[0])
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    seen = [[False] * w for _ in range(h)]
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y][x] or seen[y][x]:
                continue
            seen[y][x] = True
            queue, comp = deque([(y, x)]), []
            while queue:
                cy, cx = queue.popleft()
                comp.append(cy * w + cx)
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny][nx] and not seen[ny][nx]:
                        seen[ny][nx] = True
                        queue.append((ny, nx))
            comps.append(sorted(comp))
    return comps


def exact_mbd(cost, seeds):
    """Minimum barrier distance by exhaustive enumeration of simple 4-connected paths.

    A path may stop at the first seed it meets: any longer path to a seed has a
    prefix ending at that seed with no larger barrier.
    """
    h, w = len(cost), len(cost[0])
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            if seeds[y][x]:
                continue
            best = math.inf
            visited = [[False] * w for _ in range(h)]

            def dfs(cy, cx, hi, lo):
                nonlocal best
                if hi - lo >= best:
                    return
                if seeds[cy][cx]:
                    best = hi - lo
                    return
                visited[cy][cx] = True
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and not visited[ny][nx]:
                        c = cost[ny][nx]
                        dfs(ny, nx, max(hi, c), min(lo, c))
                visited[cy][cx] = False

            dfs(y, x, cost[y][x], cost[y][x])
            out[y][x] = best
    return out


def strip_mbd(values, left_seed=True, right_seed=True):
    """Exact MBD on a 1xN strip seeded at one or both ends, via prefix max/min."""
    n = len(values)
    best = [math.inf] * n
    if left_seed:
        hi = lo = values[0]
        for i in range(n):
            hi, lo = max(hi, values[i]), min(lo, values[i])
            best[i] = min(best[i], hi - lo)
    if right_seed:
        hi = lo = values[-1]
        for i in range(n - 1, -1, -1):
            hi, lo = max(hi, values[i]), min(lo, values[i])
            best[i] = min(best[i], hi - lo)
    return best


def energy(A, W, obj, mot, alpha, lambda_o, lambda_m, variant):
    n = len(W)
    A = list(A)
    if not A:
        return 0.0
    if variant == "max":
        h = sum(max(W[i][j] for i in A) for j in range(n))
    else:
        h = sum(W[i][j] for i in A for j in range(n))
    h -= alpha * len(A)
    u = lambda_o * sum(obj[i] for i in A) + lambda_m * sum(mot[i] for i in A)
    return h + u


def brute_greedy(W, obj, mot, alpha, lambda_o, lambda_m, facility_variant, na_frac, beta):
    """Greedy by full recomputation; returns (ids, gains, stop_reason)."""
    n = len(W)
    limit = math.ceil(na_frac * n - 1e-9)
    A, gains = [], []
    if n == 0:
        return A, gains, "empty"
    while True:
        if len(A) + 1 > limit:
            return A, gains, "size"
        base = energy(A, W, obj, mot, alpha, lambda_o, lambda_m, facility_variant)
        best, best_gain = None, -math.inf
        for a in range(n):
            if a in A:
                continue
            g = energy(A + [a], W, obj, mot, alpha, lambda_o, lambda_m, facility_variant) - base
            if g > best_gain:
                best, best_gain = a, g
        if best_gain <= 0:
            return A, gains, "nonpositive"
        if gains and best_gain < beta * gains[-1]:
            return A, gains, "ratio"
        A.append(best)
        gains.append(best_gain)


def init_weights_loops(frames, gallery):
    """Mean over frames of the max inner product, by explicit loops."""
    w = []
    for vectors in gallery:
        total = 0.0
        for f in frames:
            best = -math.inf
            for g in vectors:
                best = max(best, sum(a * b for a, b in zip(f, g)))
            total += best
        w.append(total / len(frames))
    return w


def bce_direct(R, w, a, b, y, eps):
    """Mean clipped binary cross-entropy by per-pixel loops over numpy arrays."""
    total, n = 0.0, 0
    F, C, H, W_ = R.shape
    for f in range(F):
        for i in range(H):
            for j in range(W_):
                r = sum(w[c] * (a[c] * R[f, c, i, j] + b[c]) for c in range(C))
                p = 1.0 / (1.0 + math.exp(-r))
                p = min(max(p, eps), 1 - eps)
                t = y[f, i, j]
                total += -(t * math.log(p) + (1 - t) * math.log(1 - p))
                n += 1
    return total / n


def random_unit_rows(rng, n, d, nonnegative=False):
    import numpy as np

    x = rng.random((n, d)) if nonnegative else rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_mining_instance(rng, n_max=12, nonnegative=False):
    """Random (W, objectness, motion, config kwargs) covering every stopping rule."""
    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(2, 6))
    F = random_unit_rows(rng, n, d, nonnegative)
    W = F @ F.T
    obj = rng.random(n)
    mot = rng.random(n)
    kwargs = dict(
        alpha=float(rng.choice([0.0, 1.0, rng.uniform(0, 4 * n)])),
        lambda_o=float(rng.uniform(0, 3)),
        lambda_m=float(rng.uniform(0, 3)),
        na_frac=float(rng.choice([1.0, 0.8, rng.uniform(0.2, 1.0)])),
        beta=float(rng.uniform(0.3, 0.95)),
        facility_variant=str(rng.choice(["max", "sum"])),
    )
    return W, obj, mot, kwargs
