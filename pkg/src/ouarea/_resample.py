"""Circular block resampling shared by the estimators and the tests."""

import math

import numpy as np

from .errors import InvalidBlock

MIN_BLOCKS = 10
CHUNK_ENTRIES = 4_000_000


def block_starts(n, block_len, n_boot, rng):
    """Random block starts, shape ``(n_boot, ceil(n / block_len))``."""
    n_blocks = -(-n // block_len)
    return rng.integers(0, n, size=(n_boot, n_blocks))


def resample_indices(n, block_len, rng):
    """One circular block bootstrap index vector of length ``n``."""
    starts = block_starts(n, block_len, 1, rng)[0]
    idx = (starts[:, None] + np.arange(block_len)[None, :]).ravel()[:n]
    return idx % n


def check_block(n, block_len):
    block_len = int(block_len)
    if block_len < 1 or block_len > n:
        raise InvalidBlock(f"block length {block_len} outside [1, {n}]")
    return block_len


def resampled_sums(contrib, block_len, n_boot, rng):
    """Circular block bootstrap replicates of ``contrib.sum(axis=0)``.

    ``contrib`` is ``(n,)`` or ``(n, k)``; all columns share the same blocks.
    Uses prefix sums, so each replicate costs one gather per block.  When
    ``block_len`` does not divide ``n`` the last block is truncated so every
    replicate has exactly ``n`` terms.
    """
    contrib = np.asarray(contrib, dtype=float)
    vector = contrib.ndim == 1
    if vector:
        contrib = contrib[:, None]
    n, k = contrib.shape
    block_len = check_block(n, block_len)
    if n_boot == 0:
        return np.empty((0,) if vector else (0, k))
    # doubled prefix sums handle wrap-around blocks
    doubled = np.concatenate([contrib, contrib])
    c = np.concatenate([np.zeros((1, k)), np.cumsum(doubled, axis=0)])
    n_full, tail = divmod(n, block_len)
    n_blocks = n_full + (tail > 0)
    chunk = max(1, CHUNK_ENTRIES // (n_blocks * k))
    out = []
    for done in range(0, n_boot, chunk):
        starts = block_starts(n, block_len, min(chunk, n_boot - done), rng)
        full = starts[:, :n_full]
        sums = (c[full + block_len] - c[full]).sum(axis=1)
        if tail:
            s = starts[:, n_full]
            sums += c[s + tail] - c[s]
        out.append(sums)
    out = np.concatenate(out)
    return out[:, 0] if vector else out


def relaxation_time(states, dt):
    """Slowest relaxation time from a lag-one least-squares fit.

    Falls back to ``inf`` when the fitted transition is not contracting.
    """
    X0 = states[:-1]
    X1 = states[1:]
    C0 = X0.T @ X0
    C1 = X1.T @ X0
    try:
        Phi = np.linalg.solve(C0.T, C1.T).T
    except np.linalg.LinAlgError:
        return math.inf
    lam = np.abs(np.linalg.eigvals(Phi)).max()
    if not np.isfinite(lam) or lam >= 1.0:
        return math.inf
    if lam <= 0.0:
        return dt
    return -dt / math.log(lam)


def default_block_len(states, dt):
    """Block length ``ceil(tau / dt * (T / tau)^(1/3))``, in steps.

    ``tau`` is the fitted slowest relaxation time.  The result is kept in
    ``[ceil(n^(1/3)), n // 10]`` so there are always at least ten blocks.
    Returns ``(block_len, capped)``.
    """
    n = states.shape[0] - 1
    T = n * dt
    lower = math.ceil(n ** (1.0 / 3.0))
    upper = max(1, n // MIN_BLOCKS)
    tau = relaxation_time(states, dt)
    if math.isfinite(tau):
        b = math.ceil(tau / dt * (T / tau) ** (1.0 / 3.0))
    else:
        b = upper + 1
    b = max(b, lower)
    capped = b > upper
    return int(min(b, upper)), capped
