"""Exact small-case oracles for classical communication success.

Given a boolean target f(x, y) with an input distribution mu (a
:class:`~bellforge.protocols.TruthTable`), these routines compute the best
success probability that classical protocols reach under a fixed
communication budget, by direct search over deterministic strategies.  The
final decision rule is filled in greedily per (transcript, y), which is
exact: the decision is the only step that sees both the transcript and
Bob's input, so its optimum decomposes pointwise.  Shared randomness never
helps against a fixed distribution (the value is linear in the strategy
mixture), so the deterministic optimum is the optimum.

The searched quantity is distributional: the best average success under mu
for a fixed budget.  Its inverse (minimum bits to reach a target success)
is a lower-bound surrogate for worst-case complexity, and reports built on
top of these oracles label it as such.

Alongside the search live the standard repetition helpers: Chernoff repeat
counts, majority-vote amplification, and the quadratic "pumping" relation
between budgets at different success levels.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._threads import thread_map
from .protocols import TruthTable
from .states import CapExceededError

# Hard cap on the number of deterministic strategies any single search may
# enumerate (after the greedy-decision factoring).
ENUM_CAP = 10 ** 8

# Batch size for vectorized map enumeration.
_CHUNK = 8192

# Guard subtracted before ceilings of exact rational expressions, so that
# float noise (e.g. 3/(1/6)^2 evaluating to 108.00000000000001) does not
# bump the result to the next integer.
_CEIL_GUARD = 1e-9


def _weights(t: TruthTable) -> np.ndarray:
    """W[b, x, y] = mu(x, y) * [f(x, y) = b]."""
    f = t.f[np.newaxis, :, :]
    b = np.arange(2).reshape(2, 1, 1)
    return np.where(f == b, t.mu[np.newaxis, :, :], 0.0)


def _maps(start: int, stop: int, slots: int, alphabet: int) -> np.ndarray:
    """Rows are base-`alphabet` digit expansions of start..stop-1, shape
    (stop - start, slots)."""
    idx = np.arange(start, stop)
    out = np.empty((stop - start, slots), dtype=np.int64)
    for j in range(slots - 1, -1, -1):
        out[:, j] = idx % alphabet
        idx = idx // alphabet
    return out


def _one_hot(maps: np.ndarray, alphabet: int) -> np.ndarray:
    return (maps[..., np.newaxis] == np.arange(alphabet)).astype(np.float64)


def best_success_one_way(t: TruthTable, bits: int) -> float:
    """Best average success with one `bits`-bit message from Alice to Bob.

    Exhausts all message maps x -> {0..2^bits - 1}; Bob's decision is chosen
    greedily per (message, y).  If the message alphabet covers the whole
    input set the identity map is optimal and the search is skipped.
    """
    if bits < 0:
        raise ValueError(f"bits={bits} must be >= 0")
    nx = t.num_inputs
    m_count = 2 ** bits
    if m_count >= nx:
        # Sending x itself lets the decision rule output f(x, y) directly.
        return 1.0
    total = m_count ** nx
    if total > ENUM_CAP:
        raise CapExceededError(
            f"one-way strategy space {m_count}^{nx} = {total} exceeds "
            f"{ENUM_CAP}")
    w = _weights(t)

    def run_chunk(start: int) -> float:
        stop = min(start + _CHUNK, total)
        hot = _one_hot(_maps(start, stop, nx, m_count), m_count)  # (c, x, m)
        scores = np.einsum("cxm,bxy->cbmy", hot, w)      # (c, b, m, y)
        return float(scores.max(axis=1).sum(axis=(1, 2)).max())

    starts = list(range(0, total, _CHUNK))
    return max(thread_map(run_chunk, starts))


def _genuine_splits(bits: int) -> list[tuple[int, int, int]]:
    """Budget splits (c1, c2, c3) over the three alternating transmissions
    A->B, B->A, A->B where the middle and last legs both carry bits.

    Splits with c3 = 0 collapse to one-way protocols (Bob's own message
    cannot inform his decision), and splits with c2 = 0 merge the two
    Alice legs into one; both are covered by the one-way search.
    """
    out = []
    for c2 in range(1, bits):
        for c3 in range(1, bits - c2 + 1):
            out.append((bits - c2 - c3, c2, c3))
    return out


def _tree_split_value(t: TruthTable, c1: int, c2: int, c3: int) -> float:
    """Best success over deterministic three-leg protocols with leg budgets
    (c1, c2, c3); decisions greedy per (y, first message, last message)."""
    nx = t.num_inputs
    ny = t.num_inputs
    m1a, m2a, m3a = 2 ** c1, 2 ** c2, 2 ** c3
    n1 = m1a ** nx
    n2 = m2a ** (ny * m1a)
    n3 = m3a ** (nx * m2a)
    if n1 * n2 * n3 > ENUM_CAP:
        raise CapExceededError(
            f"tree strategy space {n1}*{n2}*{n3} for split "
            f"({c1},{c2},{c3}) exceeds {ENUM_CAP}")
    w = _weights(t)
    m1_all = _maps(0, n1, nx, m1a)
    m2_all = _maps(0, n2, ny * m1a, m2a).reshape(n2, ny, m1a)
    xs = np.arange(nx)
    best = 0.0
    for m1 in m1_all:
        mask1 = _one_hot(m1, m1a)                        # (x, k1)
        for m2 in m2_all:
            reply = m2[:, m1].T                          # (x, y): m2[y, m1[x]]
            for start in range(0, n3, _CHUNK):
                stop = min(start + _CHUNK, n3)
                m3 = _maps(start, stop, nx * m2a, m3a).reshape(
                    stop - start, nx, m2a)
                hot3 = _one_hot(m3, m3a)                 # (c, x, r, k3)
                sel = hot3[:, xs[:, np.newaxis], reply, :]   # (c, x, y, k3)
                scores = np.einsum("bxy,xk,cxyj->cbykj", w, mask1, sel)
                vals = scores.max(axis=1).sum(axis=(1, 2, 3))
                best = max(best, float(vals.max()))
    return best


def best_success_tree(t: TruthTable, bits: int, rounds: int = 2) -> float:
    """Best average success with `bits` total bits over at most `rounds`
    round trips (up to three alternating transmissions; a fourth cannot
    help since Bob decides).

    With rounds=1 this is the one-way optimum.  Interactive splits are
    searched exhaustively with greedy final decisions.
    """
    if bits < 0:
        raise ValueError(f"bits={bits} must be >= 0")
    if rounds not in (1, 2):
        raise ValueError(f"rounds={rounds} must be 1 or 2")
    best = best_success_one_way(t, bits)
    if rounds == 1 or best >= 1.0 - 1e-15:
        return best
    for c1, c2, c3 in _genuine_splits(bits):
        best = max(best, _tree_split_value(t, c1, c2, c3))
    return best


def distributional_cc(t: TruthTable, p: float, method: str = "one_way",
                      max_bits: int | None = None) -> float:
    """Minimum bits whose best success reaches p - 1e-12; inf if no budget
    up to `max_bits` (default n, where success 1 is always reachable
    one-way) gets there."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"target success p={p} must lie in [0, 1]")
    searchers: dict[str, Callable[[TruthTable, int], float]] = {
        "one_way": best_success_one_way,
        "tree": best_success_tree,
    }
    if method not in searchers:
        raise ValueError(f"unknown method {method!r}")
    if max_bits is None:
        max_bits = t.n
    for c in range(max_bits + 1):
        if searchers[method](t, c) >= p - 1e-12:
            return c
    return math.inf


def _table_key(t: TruthTable) -> str:
    h = hashlib.sha256()
    h.update(str(t.n).encode())
    h.update(np.ascontiguousarray(t.f).tobytes())
    h.update(np.round(t.mu, 12).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class CCQueryResult:
    """Budget-to-success table for one (f, mu) pair.

    `key` identifies the function and distribution (content hash), and
    `success` maps each budget 0..max_bits to the searched optimum.
    """
    key: str
    method: str
    success: tuple[tuple[int, float], ...]

    def min_bits(self, p: float) -> float:
        """Inverse lookup: least tabulated budget reaching p - 1e-12."""
        for c, val in self.success:
            if val >= p - 1e-12:
                return c
        return math.inf


def build_cc_table(t: TruthTable, max_bits: int | None = None,
                   method: str = "one_way") -> CCQueryResult:
    if method not in ("one_way", "tree"):
        raise ValueError(f"unknown method {method!r}")
    if max_bits is None:
        max_bits = t.n
    searcher = best_success_one_way if method == "one_way" else \
        best_success_tree
    rows = tuple((c, searcher(t, c)) for c in range(max_bits + 1))
    return CCQueryResult(key=_table_key(t), method=method, success=rows)


def chernoff_repeats(epsilon: float) -> int:
    """Repetitions of a (1/2 + epsilon)-correct protocol so that the
    majority errs with probability at most 1/3: ceil(3 / epsilon^2)."""
    if not 0.0 < epsilon <= 0.5:
        raise ValueError(f"epsilon={epsilon} must lie in (0, 1/2]")
    return math.ceil(3.0 / epsilon ** 2 - _CEIL_GUARD)


def majority_amplify(runner: Callable[[np.random.Generator], bool],
                     repeats: int, trials: int,
                     seed: int | None = None) -> float:
    """Empirical success of majority voting over `repeats` runs.

    `runner(rng)` performs one protocol run and reports whether it was
    correct.  Each of `trials` experiments takes the majority of `repeats`
    runs; the returned fraction estimates its success probability.  An
    exact tie (possible only for even `repeats`; callers use odd counts)
    is scored as a failure.
    """
    if repeats < 1:
        raise ValueError(f"repeats={repeats} must be >= 1")
    if trials < 1:
        raise ValueError(f"trials={trials} must be >= 1")
    rng = np.random.default_rng(seed)
    wins = 0
    for _ in range(trials):
        correct = sum(bool(runner(rng)) for _ in range(repeats))
        if 2 * correct > repeats:
            wins += 1
    return wins / trials


def pumping_bound(c_at_p: float, epsilon: float) -> float:
    """Budget bound at success 2/3 implied by a budget `c_at_p` that
    already reaches success 1/2 + epsilon: 3 * c_at_p / epsilon^2."""
    if not 0.0 < epsilon <= 1.0 / 6.0:
        raise ValueError(f"epsilon={epsilon} must lie in (0, 1/6]")
    if c_at_p < 0:
        raise ValueError(f"c_at_p={c_at_p} must be >= 0")
    return 3.0 * c_at_p / epsilon ** 2


def pumping_inverse(c_two_thirds: float, epsilon: float) -> float:
    """Budget bound at success 1/2 + epsilon implied by a budget
    `c_two_thirds` at success 2/3: (epsilon^2 / 3) * c_two_thirds."""
    if not 0.0 < epsilon <= 1.0 / 6.0:
        raise ValueError(f"epsilon={epsilon} must lie in (0, 1/6]")
    if c_two_thirds < 0:
        raise ValueError(f"c_two_thirds={c_two_thirds} must be >= 0")
    return epsilon ** 2 / 3.0 * c_two_thirds
