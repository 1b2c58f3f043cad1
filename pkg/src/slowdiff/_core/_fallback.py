"""Pure numpy implementations of the compiled kernels (same semantics and RNG layout)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_PI = 6.283185307179586


def _mulhilo(m, x):
    """High and low 64-bit words of ``m * x`` (``m`` scalar, ``x`` array)."""
    ah, al = m >> _S32, m & _LO
    bh, bl = x >> _S32, x & _LO
    t = al * bl
    u = ah * bl + (t >> _S32)
    v = al * bh + (u & _LO)
    hi = ah * bh + (u >> _S32) + (v >> _S32)
    return hi, m * x


def philox4x64(counters, k0, k1):
    """Philox4x64-10 applied row-wise to an (N, 4) uint64 counter array."""
    c = np.array(counters, dtype=np.uint64, copy=True).reshape(-1, 4)
    c0, c1, c2, c3 = c[:, 0], c[:, 1], c[:, 2], c[:, 3]
    k0, k1 = np.uint64(k0), np.uint64(k1)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            h0, l0 = _mulhilo(_M0, c0)
            h1, l1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = h1 ^ c1 ^ k0, l1, h0 ^ c3 ^ k1, l0
    return np.stack([c0, c1, c2, c3], axis=1)


def _unit(x):
    return ((x >> _S11).astype(np.float64) + 0.5) * 1.1102230246251565e-16


def _block(block, paths, stream, k0, k1):
    ctr = np.zeros((paths.shape[0], 4), dtype=np.uint64)
    ctr[:, 0] = block
    ctr[:, 1] = paths
    ctr[:, 2] = stream
    return philox4x64(ctr, k0, k1)


def _normals4(block, paths, k0, k1):
    o = _block(block, paths, 0, k0, k1)
    r0 = np.sqrt(-2.0 * np.log(_unit(o[:, 0])))
    t0 = _TWO_PI * _unit(o[:, 1])
    r1 = np.sqrt(-2.0 * np.log(_unit(o[:, 2])))
    t1 = _TWO_PI * _unit(o[:, 3])
    return np.stack([r0 * np.cos(t0), r0 * np.sin(t0), r1 * np.cos(t1), r1 * np.sin(t1)], axis=1)


def _uniforms4(block, paths, k0, k1):
    return _unit(_block(block, paths, 1, k0, k1))


def normals(paths, n_steps, k0, k1):
    """The Gaussian increments of the given paths, shape (len(paths), n_steps)."""
    paths = np.asarray(paths, dtype=np.uint64)
    blocks = [_normals4(b, paths, k0, k1) for b in range((n_steps + 3) // 4)]
    if not blocks:
        return np.empty((paths.shape[0], 0))
    return np.concatenate(blocks, axis=1)[:, :n_steps]


def _drift(y, omega, a, b):
    g = np.zeros_like(y)
    for w, ah, bh in zip(omega, a, b):
        ph = w * y
        g += w * (bh * np.cos(ph) - ah * np.sin(ph))
    return g


def exit_times(omega, a, b, radii, max_steps, dt, k0, k1, path_start, n_paths, bridge, threads=1):
    """First exit times of ``(-r, r)`` for every radius; see the compiled version."""
    radii = np.asarray(radii, dtype=float)
    max_steps = np.asarray(max_steps, dtype=np.int64)
    nr = radii.shape[0]
    out = np.full((n_paths, nr), np.inf)
    if nr == 0 or n_paths == 0:
        return out
    idx = np.arange(n_paths)
    y = np.zeros(n_paths)
    first = np.zeros(n_paths, dtype=np.int64)
    sq = np.sqrt(dt)
    cap = int(max_steps[-1])
    k = 0
    z = u = None
    while idx.size and k < cap:
        paths = (idx + path_start).astype(np.uint64)
        if k % 4 == 0:
            z = _normals4(k // 4, paths, k0, k1)
            if bridge:
                u = _uniforms4(k // 4, paths, k0, k1)
        yn = y - _drift(y, omega, a, b) * dt + sq * z[:, k % 4]
        t_exit = (k + 1) * dt
        pending = np.ones(idx.size, dtype=bool)
        for j in range(nr):
            r = radii[j]
            live = pending & (first <= j)
            if not live.any():
                continue
            hit = live & (np.abs(yn) >= r)
            if bridge:
                miss = live & ~hit
                with np.errstate(over="ignore"):
                    p = np.exp(-2.0 * (r - y) * (r - yn) / dt) + np.exp(-2.0 * (r + y) * (r + yn) / dt)
                hit |= miss & (u[:, k % 4] < p)
            out[idx[hit], j] = t_exit
            pending &= ~(live & ~hit)
            first = np.where(hit, j + 1, first)
        while True:
            capped = (first < nr) & (k + 1 >= max_steps[np.minimum(first, nr - 1)])
            if not capped.any():
                break
            first = first + capped
        keep = first < nr
        idx, y, first = idx[keep], yn[keep], first[keep]
        z = z[keep]
        if bridge:
            u = u[keep]
        k += 1
    return out


def positions_at(omega, a, b, checkpoints, dt, k0, k1, path_start, n_paths, threads=1):
    """Positions after each checkpoint step count (ascending)."""
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    out = np.empty((n_paths, checkpoints.shape[0]))
    paths = (np.arange(n_paths) + path_start).astype(np.uint64)
    y = np.zeros(n_paths)
    sq = np.sqrt(dt)
    k = 0
    z = None
    for c, stop in enumerate(checkpoints):
        while k < stop:
            if k % 4 == 0:
                z = _normals4(k // 4, paths, k0, k1)
            y = y - _drift(y, omega, a, b) * dt + sq * z[:, k % 4]
            k += 1
        out[:, c] = y
    return out


def tridiag_evolve(el, ed, eu, il, id_, iu, g, steps):
    """Apply ``g <- I^{-1} (E g)`` ``steps`` times; E and I tridiagonal."""
    n = len(g)
    E = sp.diags([el[1:], ed, eu[:-1]], [-1, 0, 1], shape=(n, n), format="csr")
    lu = splu(sp.diags([il[1:], id_, iu[:-1]], [-1, 0, 1], shape=(n, n), format="csc"),
              permc_spec="NATURAL", options={"SymmetricMode": True})
    g = np.asarray(g, dtype=float)
    for _ in range(steps):
        g = lu.solve(E @ g)
    return g
