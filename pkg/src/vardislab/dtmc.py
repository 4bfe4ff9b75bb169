"""Discrete-time Markov chain model of update dissemination.

States are subsets of nodes holding the update, encoded as bitmasks over
{0,1}^K with the all-zero state excluded. In each step one node is chosen
uniformly to transmit; if it holds the update, every other node receives
it independently with probability 1 - q[i][j]. Holders never drop the
update, so transitions only ever add nodes.

The expected number of steps until the all-ones state is the absorbing
hitting time of the chain, solved as a sparse linear system over the
states reachable from the start state. Reachable-state enumeration keeps
line-like topologies tiny (a handful of partially lossy links per node);
densely connected loss matrices degenerate towards 2^K states and are
only practical for small K.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import spsolve

from . import rng as rngmod

RESIDUAL_TOL = 1e-8
ROW_SUM_TOL = 1e-12


class Unreachable(Exception):
    """The all-ones state cannot be reached from the start state."""


class NumericalFailure(Exception):
    """The hitting-time system could not be solved to tolerance."""


def _as_mask(state, k: int) -> int:
    if isinstance(state, (int, np.integer)):
        mask = int(state)
    else:
        bits = list(state)
        if len(bits) != k:
            raise ValueError(f"state has {len(bits)} bits, expected {k}")
        mask = 0
        for i, bit in enumerate(bits):
            if bit:
                mask |= 1 << i
    if mask >= (1 << k):
        raise ValueError(f"state {mask:#x} out of range for {k} nodes")
    if mask == 0:
        raise ValueError("the all-zero state is excluded from the chain")
    return mask


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("loss matrix must be square")
    if np.any((q < 0) | (q > 1)):
        raise ValueError("loss probabilities must lie in [0, 1]")
    if np.any(np.diag(q) != 0):
        raise ValueError("q[i][i] must be 0")
    return q


def transition_probability(s, t, q) -> float:
    """Probability of moving from holder set s to holder set t in one step."""
    q = _check_q(q)
    k = q.shape[0]
    s_mask = _as_mask(s, k)
    t_mask = _as_mask(t, k)
    if s_mask & ~t_mask:
        return 0.0  # nodes never drop the update
    holders = [i for i in range(k) if s_mask >> i & 1]
    newly = [j for j in range(k) if t_mask >> j & 1 and not s_mask >> j & 1]
    missing = [j for j in range(k) if not t_mask >> j & 1]
    total = 0.0
    if s_mask == t_mask:
        total += (k - len(holders)) / k
    for i in holders:
        term = 1.0 / k
        for j in newly:
            term *= 1.0 - q[i, j]
        for j in missing:
            term *= q[i, j]
        total += term
    return total


def _require_connected(q: np.ndarray, start_mask: int) -> None:
    k = q.shape[0]
    seen = {i for i in range(k) if start_mask >> i & 1}
    frontier = list(seen)
    while frontier:
        i = frontier.pop()
        for j in range(k):
            if j not in seen and q[i, j] < 1.0:
                seen.add(j)
                frontier.append(j)
    if len(seen) != k:
        missing = sorted(set(range(k)) - seen)
        raise Unreachable(f"nodes {missing} unreachable over links with q < 1")


def _transition_rows(q: np.ndarray, start_mask: int):
    """Enumerate states reachable from start and their outgoing rows."""
    k = q.shape[0]
    full = (1 << k) - 1
    rows: dict[int, dict[int, float]] = {}
    stack = [start_mask]
    while stack:
        s = stack.pop()
        if s in rows or s == full:
            continue
        row: dict[int, float] = {}
        holders = [i for i in range(k) if s >> i & 1]
        row[s] = (k - len(holders)) / k
        for i in holders:
            sure = 0
            partial = []
            partial_q = []
            stay = 1.0 / k
            for j in range(k):
                if s >> j & 1 or j == i:
                    continue
                qij = q[i, j]
                if qij == 0.0:
                    sure |= 1 << j
                elif qij < 1.0:
                    partial.append(1 << j)
                    partial_q.append(qij)
            m = len(partial)
            for subset in range(1 << m):
                prob = stay
                received = sure
                for b in range(m):
                    if subset >> b & 1:
                        prob *= 1.0 - partial_q[b]
                        received |= partial[b]
                    else:
                        prob *= partial_q[b]
                t = s | received
                row[t] = row.get(t, 0.0) + prob
        total = sum(row.values())
        if abs(total - 1.0) > ROW_SUM_TOL * max(1, len(row)):
            raise NumericalFailure(f"row for state {s:b} sums to {total!r}")
        rows[s] = row
        for t in row:
            if t != s and t not in rows and t != full:
                stack.append(t)
    return rows


def expected_hitting_steps(q, start=None) -> float:
    """Expected number of transmissions until every node holds the update.

    `start` is a holder bitvector or bitmask; the default is node 0 alone.
    Raises Unreachable when the q-graph cannot carry the update everywhere
    and NumericalFailure when the linear solve misses its residual bound.
    """
    q = _check_q(q)
    k = q.shape[0]
    start_mask = 1 if start is None else _as_mask(start, k)
    full = (1 << k) - 1
    if start_mask == full:
        return 0.0
    _require_connected(q, start_mask)
    rows = _transition_rows(q, start_mask)
    states = sorted(rows)
    index = {s: n for n, s in enumerate(states)}
    n = len(states)
    data, indices, indptr = [], [], [0]
    for s in states:
        row = rows[s]
        for t, p in sorted(row.items()):
            if t != full:
                indices.append(index[t])
                data.append(p)
        indptr.append(len(data))
    P = csr_matrix((data, indices, indptr), shape=(n, n))
    A = identity(n, format="csr") - P
    b = np.ones(n)
    x = spsolve(A.tocsc(), b)
    residual = np.abs(A @ x - b).max()
    if not np.isfinite(x).all() or residual > RESIDUAL_TOL:
        raise NumericalFailure(f"residual {residual} above {RESIDUAL_TOL}")
    return float(x[index[start_mask]])


def expected_delay_seconds(steps: float, k: int, beta_hz: float) -> float:
    """Convert chain steps to seconds for exponential beaconing.

    The superposition of K independent Poisson beacon processes of rate
    beta is Poisson with rate K*beta, so steps arrive every 1/(K*beta).
    """
    if k < 1 or beta_hz <= 0:
        raise ValueError("need k >= 1 and beta > 0")
    return steps / (k * beta_hz)


def simulate_hitting_steps(q, start=None, walks: int = 10_000,
                           seed: int = 0, max_steps: int = 1_000_000):
    """Monte-Carlo estimate of the hitting time: (mean, standard error).

    Independent oracle for expected_hitting_steps; walks the chain
    directly from its definition without the linear-system machinery.
    """
    q = _check_q(q)
    k = q.shape[0]
    start_mask = 1 if start is None else _as_mask(start, k)
    _require_connected(q, start_mask)
    full = (1 << k) - 1
    gen = rngmod.stream(seed, 0, 0, "walk")
    powers = (1 << np.arange(k)).astype(np.int64)
    states = np.full(walks, start_mask, dtype=np.int64)
    steps = np.zeros(walks, dtype=np.int64)
    for _ in range(max_steps):
        active = states != full
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        tx = gen.integers(0, k, size=idx.size)
        u = gen.random((idx.size, k))
        received = (u >= q[tx]) @ powers.reshape(-1, 1)
        has = (states[idx] >> tx) & 1
        grown = states[idx] | received.ravel()
        states[idx] = np.where(has == 1, grown, states[idx])
        steps[idx] += 1
    else:
        raise NumericalFailure(f"walks not absorbed within {max_steps} steps")
    mean = float(steps.mean())
    stderr = float(steps.std(ddof=1) / np.sqrt(walks))
    return mean, stderr
