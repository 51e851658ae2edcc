"""Bell tests built from communication protocols and port teleportation.

The pipeline replaces every message of a memoryless protocol with a
port-teleportation step: the sender measures, keeps the port index to
itself, and the receiver continues on every port in parallel.  Outcomes
then form a tree (one level per transmitted message); reading the leaf
measurement along a root-to-leaf path defines correlations that need no
communication at all, and weighting the paths by the input distribution
gives a linear Bell functional whose classical value is tied to the
classical communication cost of the underlying function.

Because the port resource is symmetric under port permutations, every
teleportation outcome is uniform and the conditional state on the selected
port does not depend on the outcome.  The path-indexed joint distribution
therefore factorizes into a uniform prefix over indices times the terminal
Born distribution of the noise-degraded protocol run, which is what the
exact mode computes; all outcome variables off the realized path are
marginalized out (their alphabets are recorded for reporting).

A second, one-way route replaces teleportation with remote state
preparation on a shared maximally entangled pair and yields binary-flag
correlations checked against a nonlinear communication inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from ._threads import thread_map
from .classicalcc import best_success_tree, distributional_cc
from .classicalcc import best_success_one_way
from .protocols import CommProtocol, MemorylessProtocol, TruthTable
from .remoteprep import index_cost_bits, rsp_povm
from .states import (
    CapExceededError,
    InvariantError,
    Povm,
    PureState,
    RegisterLayout,
    _sym,
)
from .teleport import _branch_output, _branch_tensors, build_pbt_povm, \
    build_resource

# Correlation rows must be normalized to this tolerance.
ATOL_TABLE = 1e-9

# Exact branch enumeration is limited to two-round protocols and to
# path-alphabet products (index levels times the binary leaf) this large.
EXACT_MAX_ROUNDS = 2
ALPHABET_CAP = 2 ** 16

# Deterministic local-strategy searches may enumerate at most this many
# strategy combinations after greedy-leaf factoring.
LHV_CAP = 10 ** 7

# Coefficient of the budget-ratio bound sqrt(classical/quantum).
RATIO_COEFF = 1.0 / (6.0 * math.sqrt(3.0))

_CEIL_GUARD = 1e-9


def _leg_dims(p: CommProtocol) -> tuple[int, ...]:
    """Transmitted register dimensions in send order (out, back, out, ...)."""
    out: list[int] = []
    for t in range(p.rounds):
        out.append(p.m_out_dims[t])
        if t < p.rounds - 1:
            out.append(p.m_back_dims[t])
    return tuple(out)


@dataclass(frozen=True)
class PortSchedule:
    """Port counts and port dimensions, one entry per transmitted message.

    Entry i covers the i-th transmission of the protocol (alternating
    sender), using `port_counts[i]` ports of dimension `port_dims[i]`.
    The dimension must equal that of the register being sent, which for a
    converted memoryless protocol bundles the fresh message qubit with
    both parties' compressed memories.
    """
    port_counts: tuple[int, ...]
    port_dims: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.port_counts)
        dims = tuple(int(d) for d in self.port_dims)
        if len(counts) != len(dims):
            raise ValueError(
                f"{len(counts)} port counts vs {len(dims)} dimensions")
        if len(counts) == 0:
            raise ValueError("schedule needs at least one step")
        if any(c < 1 for c in counts):
            raise ValueError(f"port counts must be >= 1, got {counts}")
        if any(d < 2 for d in dims):
            raise ValueError(f"port dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "port_counts", counts)
        object.__setattr__(self, "port_dims", dims)

    @classmethod
    def for_protocol(cls, p: CommProtocol | MemorylessProtocol,
                     port_counts) -> "PortSchedule":
        """Schedule whose step dimensions are read off the protocol."""
        proto = p.proto if isinstance(p, MemorylessProtocol) else p
        legs = _leg_dims(proto)
        counts = tuple(int(c) for c in port_counts)
        if len(counts) != len(legs):
            raise ValueError(
                f"protocol transmits {len(legs)} messages, got "
                f"{len(counts)} port counts")
        return cls(port_counts=counts, port_dims=legs)

    @property
    def levels(self) -> int:
        return len(self.port_counts)

    @property
    def budget_bits(self) -> float:
        """Classical bits needed to reveal every kept port index."""
        return float(sum(math.log2(c) for c in self.port_counts))


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """Joint outcome distributions, one array per input pair (x, y).

    For teleportation tables the array axes are the port indices along the
    realized root-to-leaf path followed by the binary leaf outcome; all
    off-path outcome variables (the receiver acts on every port, so there
    are exponentially many) are marginalized out, and their alphabet sizes
    sit in `meta["full_alphabets"]`.  For the one-way route the axes are
    Alice's success flag and Bob's bit.
    """
    truth: TruthTable
    schedule: PortSchedule | None
    axes: tuple[int, ...]
    tables: dict[tuple[int, int], np.ndarray]
    mode: str
    seed: int | None = None
    trials: int | None = None
    meta: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        size = self.truth.num_inputs
        keys = {(x, y) for x in range(size) for y in range(size)}
        if set(self.tables) != keys:
            raise ValueError("tables must cover every input pair")
        clean = {}
        for key, arr in self.tables.items():
            a = np.asarray(arr, dtype=np.float64)
            if a.shape != self.axes:
                raise ValueError(
                    f"table {key}: shape {a.shape}, expected {self.axes}")
            if a.min() < -1e-12:
                raise InvariantError(
                    f"table {key}: negative probability {a.min()}")
            total = a.sum()
            if abs(total - 1.0) > ATOL_TABLE:
                raise InvariantError(
                    f"table {key}: sums to {total}, expected 1")
            a.setflags(write=False)
            clean[key] = a
        object.__setattr__(self, "tables", clean)

    def path_probability(self, x: int, y: int, path: OutcomePath) -> float:
        """Probability of one full path for input pair (x, y)."""
        if self.schedule is not None:
            path.check(self.schedule)
        cell = path.indices + (path.outcome,)
        arr = self.tables[(x, y)]
        if len(cell) != arr.ndim:
            raise ValueError(
                f"path with {len(path.indices)} indices does not address "
                f"a table of {arr.ndim - 1} levels")
        return float(arr[cell])


def _same_truth(a: TruthTable, b: TruthTable) -> bool:
    return a is b or (a.n == b.n and np.array_equal(a.f, b.f)
                      and np.allclose(a.mu, b.mu, atol=1e-12))


@dataclass(frozen=True)
class OutcomePath:
    """One root-to-leaf path: kept index per level plus the leaf bit."""
    indices: tuple[int, ...]
    outcome: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise ValueError(f"negative path index in {idx}")
        if self.outcome not in (0, 1):
            raise ValueError(f"leaf outcome {self.outcome} must be 0 or 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "outcome", int(self.outcome))

    def check(self, s: PortSchedule) -> None:
        if len(self.indices) != s.levels:
            raise ValueError(
                f"path has {len(self.indices)} indices for a "
                f"{s.levels}-level schedule")
        for i, (idx, count) in enumerate(zip(self.indices, s.port_counts)):
            if idx >= count:
                raise ValueError(
                    f"index {idx} at level {i} out of range [0, {count})")


@lru_cache(maxsize=None)
def _branch_kraus(n_ports: int, d: int) -> tuple[np.ndarray, ...]:
    """Kraus operators of the normalized single-outcome channel of a
    port-teleportation step with `n_ports` ports of dimension d.

    By port symmetry every outcome is equally likely and induces the same
    conditional channel, so one branch determines the whole step.  The
    channel is read off the branch's action on half of a maximally
    entangled pair.
    """
    res = build_resource(n_ports, d)
    meas = build_pbt_povm(n_ports, d)
    ref = np.eye(d, dtype=np.complex128) / math.sqrt(d)
    branches = _branch_tensors(ref, res, meas)
    prob, mat = _branch_output(branches[0], 1, n_ports, d,
                               with_reference=True)
    if abs(prob * n_ports - 1.0) > 1e-9:
        raise InvariantError(
            f"teleportation outcome not uniform: p={prob} for N={n_ports}")
    choi = _sym(mat / prob)
    w, v = np.linalg.eigh(choi)
    kraus = []
    cut = 1e-12 * max(w.max(), 1.0)
    for lam, vec in zip(w, v.T):
        if lam > cut:
            kraus.append(math.sqrt(d * lam) * vec.reshape(d, d).T)
    total = sum(k.conj().T @ k for k in kraus)
    if np.max(np.abs(total - np.eye(d))) > 1e-8:
        raise InvariantError("branch channel is not trace preserving")
    return tuple(kraus)


class _MixedWire:
    """Density-matrix register machine for small protocol simulations."""

    def __init__(self):
        self.names: list[str] = []
        self.dims: list[int] = []
        self.rho = np.ones((1, 1), dtype=np.complex128)

    def add(self, name: str, dim: int) -> None:
        if dim <= 1:
            return
        ground = np.zeros((dim, dim), dtype=np.complex128)
        ground[0, 0] = 1.0
        self.rho = np.kron(self.rho, ground)
        self.names.append(name)
        self.dims.append(dim)

    def _to_front(self, names: list[str]) -> int:
        """Permute registers so `names` lead; returns their block size."""
        axes = [self.names.index(n) for n in names]
        rest = [i for i in range(len(self.dims)) if i not in axes]
        order = axes + rest
        if order != list(range(len(self.dims))):
            total = self.rho.shape[0]
            idx = np.arange(total).reshape(self.dims).transpose(order)
            idx = idx.reshape(-1)
            self.rho = self.rho[np.ix_(idx, idx)]
            self.names = [self.names[i] for i in order]
            self.dims = [self.dims[i] for i in order]
        block = 1
        for n in names:
            block *= self.dims[self.names.index(n)]
        return block

    def apply(self, in_names, u: np.ndarray, out_regs) -> None:
        in_names = [n for n in in_names if n in self.names]
        block = self._to_front(in_names)
        if u.shape != (block, block):
            raise ValueError(
                f"operator shape {u.shape} does not match register block "
                f"dimension {block} for {in_names}")
        rest = self.rho.shape[0] // block
        big = np.kron(u, np.eye(rest))
        self.rho = big @ self.rho @ big.conj().T
        out_regs = [(n, d) for n, d in out_regs if d > 1]
        keep = self.names[len(in_names):]
        keep_dims = self.dims[len(in_names):]
        self.names = [n for n, _ in out_regs] + keep
        self.dims = [d for _, d in out_regs] + keep_dims

    def channel(self, name: str, kraus) -> None:
        d = self._to_front([name])
        rest = self.rho.shape[0] // d
        out = np.zeros_like(self.rho)
        for k in kraus:
            big = np.kron(k, np.eye(rest))
            out += big @ self.rho @ big.conj().T
        self.rho = out

    def probs(self, names, povm: Povm) -> np.ndarray:
        names = [n for n in names if n in self.names]
        block = self._to_front(names)
        rest = self.rho.shape[0] // block
        t = self.rho.reshape(block, rest, block, rest)
        reduced = np.einsum("irjr->ij", t)
        return np.array([np.einsum("ij,ji->", e, reduced).real
                         for e in povm.elements])


def _chain_terminal(p: CommProtocol, x: int, y: int, s: PortSchedule,
                    ideal: tuple[bool, ...]) -> np.ndarray:
    """Terminal outcome distribution along the realized path.

    Runs the protocol with each transmission replaced by the conditional
    channel of its teleportation step (or left intact where the per-level
    ideal mask bypasses it) and returns Bob's two Born probabilities at
    the leaf.
    """
    wire = _MixedWire()
    wire.add("A", p.a0_dim)
    wire.add("B", p.b0_dim)
    r = p.rounds
    level = 0
    for i in range(r):
        wire.add("AncA", p.anc_a_dims[i])
        wire.apply(["M", "A", "AncA"], p.alice_ops[i][x],
                   [("M", p.m_out_dims[i]), ("A", p.a_dims[i])])
        if not ideal[level]:
            wire.channel("M", _branch_kraus(s.port_counts[level],
                                            p.m_out_dims[i]))
        level += 1
        if i < r - 1:
            wire.add("AncB", p.anc_b_dims[i])
            wire.apply(["M", "B", "AncB"], p.bob_ops[i][y],
                       [("M", p.m_back_dims[i]), ("B", p.b_dims[i])])
            if not ideal[level]:
                wire.channel("M", _branch_kraus(s.port_counts[level],
                                                p.m_back_dims[i]))
            level += 1
    t = wire.probs(["M", "B"], p.observables[y])
    t = np.clip(t, 0.0, None)
    return t / t.sum()


def _full_alphabets(s: PortSchedule) -> dict[str, Any]:
    """Alphabet bookkeeping for the complete outcome tuples (every port is
    acted on, so level i carries one index per node of the level above)."""
    node_counts = []
    nodes = 1
    for c in s.port_counts:
        node_counts.append(nodes)
        nodes *= c
    return {
        "level_port_counts": list(s.port_counts),
        "level_variable_counts": node_counts,
        "leaf_variable_count": nodes,
        "leaf_alphabet": 2,
    }


def generate_correlations(p: MemorylessProtocol, s: PortSchedule,
                          mode: str = "exact", trials: int | None = None,
                          seed: int | None = None,
                          ideal: bool | Sequence[bool] = False
                          ) -> CorrelationTable:
    """Path-indexed outcome distributions of the teleportation pipeline.

    exact mode computes every branch weight in closed form; sampled mode
    draws `trials` runs per input pair from per-pair derived substreams of
    `seed`.  The ideal flag replaces each teleportation step by a perfect
    channel (the infinite-port surrogate) while keeping the index tree; a
    sequence of per-level flags bypasses only the selected transmissions.
    """
    if not isinstance(p, MemorylessProtocol):
        raise TypeError("correlations need a memoryless protocol; convert "
                        "with to_memoryless first")
    proto = p.proto
    legs = _leg_dims(proto)
    if s.port_dims != legs:
        raise ValueError(
            f"schedule/protocol mismatch: port dims {s.port_dims} vs "
            f"transmitted dims {legs}")
    if isinstance(ideal, bool):
        mask = (ideal,) * s.levels
    else:
        mask = tuple(bool(v) for v in ideal)
        if len(mask) != s.levels:
            raise ValueError(f"ideal mask length {len(mask)} does not "
                             f"match {s.levels} transmission levels")
    if mode not in ("exact", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    path_cells = 2 * math.prod(s.port_counts)
    if path_cells > ALPHABET_CAP:
        raise CapExceededError(
            f"path alphabet product {path_cells} exceeds {ALPHABET_CAP}")
    if mode == "exact" and proto.rounds > EXACT_MAX_ROUNDS:
        raise CapExceededError(
            f"exact mode supports at most {EXACT_MAX_ROUNDS} rounds, got "
            f"{proto.rounds}")
    if mode == "sampled":
        if trials is None or trials < 1:
            raise ValueError("sampled mode needs trials >= 1")
    size = proto.truth.num_inputs
    pairs = [(x, y) for x in range(size) for y in range(size)]
    counts = s.port_counts
    uniform = np.full(counts, 1.0 / math.prod(counts))
    streams = np.random.default_rng(seed).spawn(len(pairs))

    def one_pair(job) -> np.ndarray:
        (x, y), rng = job
        term = _chain_terminal(proto, x, y, s, mask)
        if mode == "exact":
            return uniform[..., np.newaxis] * term
        arr = np.zeros(counts + (2,))
        draws = tuple(rng.integers(0, c, size=trials) for c in counts)
        outs = (rng.random(trials) < term[1]).astype(np.int64)
        np.add.at(arr, draws + (outs,), 1.0)
        return arr / trials

    results = thread_map(one_pair, list(zip(pairs, streams)))
    tables = dict(zip(pairs, results))
    return CorrelationTable(
        truth=proto.truth, schedule=s, axes=counts + (2,), tables=tables,
        mode=mode, seed=seed, trials=trials if mode == "sampled" else None,
        meta={"ideal": all(mask) if len(set(mask)) == 1 else list(mask),
              "full_alphabets": _full_alphabets(s)})


def simulate_with_classical_comm(table: CorrelationTable,
                                 s: PortSchedule) -> tuple[float, float]:
    """(success probability, classical bits) when the kept indices are sent.

    Revealing every port index collapses the tree to the realized path,
    and the leaf outcome there is the protocol's output; the cost is the
    bits needed to name one index per level.
    """
    if table.schedule is None:
        raise ValueError("table carries no port schedule")
    if s.port_counts != table.schedule.port_counts or \
            s.port_dims != table.schedule.port_dims:
        raise ValueError("schedule does not match the table's schedule")
    t = table.truth
    success = 0.0
    for x, y in t.support():
        success += t.mu[x, y] * table.tables[(x, y)][..., t.f[x, y]].sum()
    return float(success), s.budget_bits


@dataclass(frozen=True)
class BellFunctional:
    """Linear functional over path-indexed correlations.

    Each input pair (x, y) contributes weight mu(x, y) on the event that
    the leaf outcome along the realized path equals f(x, y); the classical
    bound delta (value minus 1/2 over local strategies, optionally granted
    the schedule's bit budget) is filled by `lhv_bound`.
    """
    truth: TruthTable
    schedule: PortSchedule
    delta: float | None = None
    delta_method: str | None = None

    def __post_init__(self):
        if self.delta is not None and not 0.0 <= self.delta <= 0.5 + 1e-12:
            raise InvariantError(
                f"classical margin delta={self.delta} outside [0, 1/2]")

    @property
    def budget_bits(self) -> float:
        return self.schedule.budget_bits

    def with_bound(self, delta: float, method: str) -> "BellFunctional":
        return replace(self, delta=delta, delta_method=method)


def build_linear_bell(t: TruthTable, s: PortSchedule) -> BellFunctional:
    """Path functional for truth table t under port schedule s; its
    classical bound stays unfilled until `lhv_bound` runs."""
    return BellFunctional(truth=t, schedule=s)


@dataclass(frozen=True)
class BellReport:
    """One evaluated Bell test: quantum value, classical bound, ratio."""
    bell_value: float
    shifted_value: float
    classical_delta: float | None
    classical_method: str | None
    ratio: float | None
    schedule: PortSchedule | None
    mode: str
    seed: int | None
    budget_bits: float | None
    meta: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.shifted_value != self.bell_value - 0.5:
            raise InvariantError("shifted value must equal value - 1/2")


def bell_value(table: CorrelationTable,
               functional: BellFunctional) -> BellReport:
    """Evaluate the path functional on a correlation table."""
    if table.schedule is None:
        raise ValueError("table carries no port schedule")
    if not _same_truth(table.truth, functional.truth):
        raise ValueError("table and functional target different functions")
    s = functional.schedule
    if table.schedule.port_counts != s.port_counts or \
            table.schedule.port_dims != s.port_dims:
        raise ValueError("table and functional use different schedules")
    if table.axes != s.port_counts + (2,):
        raise ValueError(
            f"table axes {table.axes} do not match schedule alphabets")
    t = functional.truth
    value = 0.0
    for x, y in t.support():
        value += t.mu[x, y] * table.tables[(x, y)][..., t.f[x, y]].sum()
    value = float(value)
    delta = functional.delta
    ratio = None
    if delta is not None:
        ratio = violation_ratio(value - 0.5, delta)
    return BellReport(
        bell_value=value, shifted_value=value - 0.5,
        classical_delta=delta, classical_method=functional.delta_method,
        ratio=ratio, schedule=s, mode=table.mode, seed=table.seed,
        budget_bits=s.budget_bits,
        meta=dict(table.meta) if table.meta else None)


def _strategy_spaces(t: TruthTable, s: PortSchedule):
    """Deterministic strategy space sizes (per-x choices, per-y choices
    excluding leaves) for the supported tree depths."""
    size = t.num_inputs
    if s.levels == 1:
        return size, s.port_counts[0], 1
    if s.levels == 3:
        n1, n2, n3 = s.port_counts
        per_x = n1 * n3 ** (n1 * n2)
        per_y = n2 ** n1
        return size, per_x, per_y
    raise CapExceededError(
        f"local-strategy search supports 1 or 3 levels, got {s.levels}")


def _digits(value: int, slots: int, base: int) -> np.ndarray:
    out = np.empty(slots, dtype=np.int64)
    for j in range(slots - 1, -1, -1):
        out[j] = value % base
        value //= base
    return out


def _lhv_exact(t: TruthTable, s: PortSchedule) -> float:
    """Best functional value over deterministic local strategies.

    Leaf bits are filled greedily per (y, leaf), which is exact; the
    remaining index labels are enumerated outright.
    """
    size, per_x, per_y = _strategy_spaces(t, s)
    space = per_x ** size * per_y ** size
    if space > LHV_CAP:
        raise CapExceededError(
            f"deterministic strategy space {space} exceeds {LHV_CAP}")
    w = np.stack([np.where(t.f == b, t.mu, 0.0) for b in (0, 1)])
    if s.levels == 1:
        n1 = s.port_counts[0]
        best = 0.0
        for amap in product(range(n1), repeat=size):
            acc = np.zeros((size, n1, 2))
            for x in range(size):
                acc[:, amap[x], :] += w[:, x, :].T
            best = max(best, float(acc.max(axis=2).sum()))
        return best
    n1, n2, n3 = s.port_counts
    a_choices = []
    for cid in range(per_x):
        a1 = cid % n1
        a3 = _digits(cid // n1, n1 * n2, n3).reshape(n1, n2)
        a_choices.append((a1, a3))
    b_choices = [_digits(rid, n1, n2) for rid in range(per_y)]
    best = 0.0
    for aidx in product(range(per_x), repeat=size):
        picks = [a_choices[c] for c in aidx]
        for bidx in product(range(per_y), repeat=size):
            acc = np.zeros((size, n1, n2, n3, 2))
            for x in range(size):
                a1, a3 = picks[x]
                for y in range(size):
                    i2 = b_choices[bidx[y]][a1]
                    acc[y, a1, i2, a3[a1, i2], :] += w[:, x, y]
            best = max(best, float(acc.max(axis=4).sum()))
    return best


def lhv_bound(functional: BellFunctional, method: str = "exact",
              oracle: Callable[[TruthTable, int], float] | None = None
              ) -> float:
    """Classical margin delta: local value minus 1/2.

    method "exact" maximizes over deterministic communication-free
    strategies on the outcome tree.  method "cc_derived" instead grants a
    classical protocol the schedule's full bit budget and uses the
    communication oracle's best success, which can only be larger: local
    strategies are simulated by announcing the kept indices.
    """
    if method == "exact":
        value = _lhv_exact(functional.truth, functional.schedule)
    elif method == "cc_derived":
        bits = math.ceil(functional.budget_bits - _CEIL_GUARD)
        bits = max(bits, 0)
        search = oracle if oracle is not None else best_success_tree
        value = search(functional.truth, bits)
    else:
        raise ValueError(f"unknown method {method!r}")
    return max(float(value) - 0.5, 0.0)


def lhv_strategies(t: TruthTable, s: PortSchedule) -> Iterator[tuple]:
    """All deterministic local strategies for the outcome tree.

    Yields (alice, bob) pairs: for one level, alice = (a1[x],) and
    bob = (leaf[y, i1],); for three levels, alice = (a1[x], a3[x, i1, i2])
    and bob = (b2[y, i1], leaf[y, i1, i2, i3]).
    """
    size, per_x, per_y = _strategy_spaces(t, s)
    if s.levels == 1:
        n1 = s.port_counts[0]
        leaf_space = 2 ** (size * n1)
        if per_x ** size * leaf_space > LHV_CAP:
            raise CapExceededError("strategy enumeration too large")
        for aidx in product(range(n1), repeat=size):
            a1 = np.array(aidx, dtype=np.int64)
            for lid in range(leaf_space):
                leaf = _digits(lid, size * n1, 2).reshape(size, n1)
                yield (a1,), (leaf,)
        return
    n1, n2, n3 = s.port_counts
    leaf_space = 2 ** (size * n1 * n2 * n3)
    if per_x ** size * per_y ** size * leaf_space > LHV_CAP:
        raise CapExceededError("strategy enumeration too large")
    for aidx in product(range(per_x), repeat=size):
        a1 = np.array([c % n1 for c in aidx], dtype=np.int64)
        a3 = np.stack([_digits(c // n1, n1 * n2, n3).reshape(n1, n2)
                       for c in aidx])
        for bidx in product(range(per_y), repeat=size):
            b2 = np.stack([_digits(r, n1, n2) for r in bidx])
            for lid in range(leaf_space):
                leaf = _digits(lid, size * n1 * n2 * n3, 2).reshape(
                    size, n1, n2, n3)
                yield (a1, a3), (b2, leaf)


def lhv_table(t: TruthTable, s: PortSchedule, alice: tuple,
              bob: tuple) -> CorrelationTable:
    """Correlation table of one deterministic local strategy."""
    size = t.num_inputs
    tables = {}
    for x in range(size):
        for y in range(size):
            arr = np.zeros(s.port_counts + (2,))
            if s.levels == 1:
                (a1,), (leaf,) = alice, bob
                i1 = int(a1[x])
                arr[i1, int(leaf[y, i1])] = 1.0
            else:
                (a1, a3), (b2, leaf) = alice, bob
                i1 = int(a1[x])
                i2 = int(b2[y, i1])
                i3 = int(a3[x, i1, i2])
                arr[i1, i2, i3, int(leaf[y, i1, i2, i3])] = 1.0
            tables[(x, y)] = arr
    return CorrelationTable(truth=t, schedule=s, axes=s.port_counts + (2,),
                            tables=tables, mode="lhv")


def violation_ratio(quantum_shifted: float, classical_delta: float) -> float:
    """Quantum-to-classical margin ratio; infinite when the classical
    margin vanishes (reported as a flag, never fed into arithmetic)."""
    if classical_delta < 0:
        raise ValueError(f"classical margin {classical_delta} negative")
    if classical_delta == 0.0:
        return math.inf
    return quantum_shifted / classical_delta


def ratio_lower_bound(c_classical: float, c_quantum: float) -> float:
    """Margin-ratio bound sqrt(classical/quantum budget) / (6 sqrt(3))."""
    if c_classical <= 0 or c_quantum <= 0:
        raise ValueError("budgets must be positive")
    return RATIO_COEFF * math.sqrt(c_classical / c_quantum)


def margin_ratio_lower_bound(delta: float) -> float:
    """Companion bound (1/6)/delta on the quantum-to-classical ratio."""
    if not 0.0 < delta <= 0.5:
        raise ValueError(f"classical margin {delta} outside (0, 1/2]")
    return (1.0 / 6.0) / delta


def asymptotic_ratio_one_way(n: float, c: float = 1.0) -> float:
    """Closed-form ratio for the vector-in-subspace game, one-way route:
    (1/2)(1 - 1/n) / sqrt(5 log2(n) / (c n^(1/3)))."""
    if n < 2:
        raise ValueError(f"dimension n={n} must be >= 2")
    if c <= 0:
        raise ValueError(f"constant c={c} must be positive")
    return 0.5 * (1.0 - 1.0 / n) / math.sqrt(
        5.0 * math.log2(n) / (c * n ** (1.0 / 3.0)))


def asymptotic_ratio_two_way(n: float, c: float = 1.0) -> float:
    """Closed-form ratio for the vector-in-subspace game, interactive
    route: (1/2)(1 - 1/n)^2 / sqrt(c 10 log2(n)^2 / n^(1/4))."""
    if n < 2:
        raise ValueError(f"dimension n={n} must be >= 2")
    if c <= 0:
        raise ValueError(f"constant c={c} must be positive")
    return 0.5 * (1.0 - 1.0 / n) ** 2 / math.sqrt(
        c * 10.0 * math.log2(n) ** 2 / n ** 0.25)


@dataclass(frozen=True)
class OneWayStats:
    """Success statistics of the remote-preparation route.

    p_a is Alice's flag rate (exactly 1/message dimension); p_b is Bob's
    success conditioned on the flag, weighted by mu.
    """
    p_a: float
    p_b: float
    truth: TruthTable

    def __post_init__(self):
        for name, val in (("p_a", self.p_a), ("p_b", self.p_b)):
            if not -1e-12 <= val <= 1.0 + 1e-12:
                raise InvariantError(f"{name}={val} outside [0, 1]")

    @property
    def n(self) -> int:
        return self.truth.n

    @property
    def mu(self) -> np.ndarray:
        return self.truth.mu


def one_way_correlations(p: CommProtocol | MemorylessProtocol
                         ) -> tuple[CorrelationTable, OneWayStats]:
    """Binary-flag correlations of a one-round protocol over a shared
    maximally entangled pair.

    Alice measures her half against the conjugated message state (flag 1
    on the projector), which steers Bob's half to the message itself; Bob
    measures his observable on that half plus his local register.  The
    message must be unentangled with Alice's memory, so the protocol's
    kept register has to be absent.
    """
    proto = p.proto if isinstance(p, MemorylessProtocol) else p
    if proto.rounds != 1:
        raise ValueError("one-way correlations need a one-round protocol")
    if proto.a_dims[0] != 1:
        raise ValueError(
            "message is entangled with the sender's memory; remote "
            "preparation needs an unentangled message state")
    d = proto.m_out_dims[0]
    b0 = proto.b0_dim
    size = proto.truth.num_inputs
    layout = RegisterLayout([("S", d)])
    phi = np.zeros(d * d * b0, dtype=np.complex128)
    for j in range(d):
        phi[(j * d + j) * b0] = 1.0 / math.sqrt(d)
    tables = {}
    for x in range(size):
        message = PureState(proto.alice_ops[0][x][:, 0], layout)
        flag = rsp_povm(message)
        for y in range(size):
            obs = proto.observables[y]
            arr = np.zeros((2, 2))
            for b in range(2):
                op = np.kron(flag.elements[0], obs.elements[b])
                arr[1, b] = float(np.real(phi.conj() @ op @ phi))
                op = np.kron(flag.elements[1], obs.elements[b])
                arr[0, b] = float(np.real(phi.conj() @ op @ phi))
            tables[(x, y)] = arr
    t = proto.truth
    p_a = 0.0
    p_b = 0.0
    for x, y in t.support():
        arr = tables[(x, y)]
        hit = arr[1, :].sum()
        p_a += t.mu[x, y] * hit
        p_b += t.mu[x, y] * arr[1, t.f[x, y]] / hit
    if abs(p_a - 1.0 / d) > 1e-12:
        raise InvariantError(
            f"flag rate {p_a} deviates from 1/d = {1.0 / d}")
    table = CorrelationTable(
        truth=t, schedule=None, axes=(2, 2), tables=tables, mode="one_way",
        meta={"message_dim": d})
    return table, OneWayStats(p_a=float(p_a), p_b=float(p_b), truth=t)


@dataclass(frozen=True)
class NonlinearCheck:
    """Outcome of the nonlinear communication inequality on one-way stats.

    The rigorous form compares the bits of the flag-merging protocol
    (left) against the oracle budget for success (1-delta) p_b + delta/2
    (right).  The heuristic form drops the abort bookkeeping and is
    expected to report violations; the pumped form lower-bounds the right
    side through the amplification relation instead of querying the
    oracle at the composite target.
    """
    delta: float
    target: float
    lhs_bits: float
    rhs_bits: float
    holds: bool
    heuristic_lhs: float
    heuristic_rhs: float
    heuristic_violated: bool
    pumped_rhs: float
    pumped_holds: bool


def nonlinear_bell_check(stats: OneWayStats, delta: float,
                         oracle: Callable[[float], float] | None = None
                         ) -> NonlinearCheck:
    """Check the nonlinear inequality at abort weight delta.

    `oracle(target)` must return the minimum bits for the stats' function
    to reach the target success under its distribution; by default the
    one-way search oracle is used.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta={delta} must lie in (0, 1)")
    if oracle is None:
        truth = stats.truth

        def oracle(target: float) -> float:
            return distributional_cc(truth, target)

    target = (1.0 - delta) * stats.p_b + delta / 2.0
    rhs = oracle(target)
    if math.isinf(rhs):
        raise ValueError(
            f"communication oracle cannot certify target {target}")
    if stats.p_a <= 0.0:
        lhs: float = math.inf
    else:
        lhs = math.ceil(math.log2(1.0 / stats.p_a)
                        + math.log2(math.log2(1.0 / delta))
                        - _CEIL_GUARD) + 1
    holds = bool(lhs >= rhs - 1e-12)
    heuristic_lhs = math.inf if stats.p_a <= 0 else \
        math.log2(1.0 / stats.p_a)
    heuristic_rhs = oracle(stats.p_b)
    c23 = oracle(2.0 / 3.0)
    eps_t = max(target - 0.5, 0.0)
    if target > 2.0 / 3.0:
        pumped = float(c23)
    else:
        pumped = eps_t ** 2 / 3.0 * c23
    return NonlinearCheck(
        delta=delta, target=float(target), lhs_bits=float(lhs),
        rhs_bits=float(rhs), holds=holds,
        heuristic_lhs=float(heuristic_lhs),
        heuristic_rhs=float(heuristic_rhs),
        heuristic_violated=bool(heuristic_lhs < heuristic_rhs - 1e-12),
        pumped_rhs=float(pumped),
        pumped_holds=bool(lhs >= pumped - 1e-12))


def observation_bound(p_succ: float, truth: TruthTable,
                      oracle: Callable[[float], float] | None = None,
                      deltas=(0.5, 0.25, 1.0 / 16.0, 1.0 / 256.0)) -> float:
    """Communication lower bound max over delta of
    oracle((1-delta) p + delta/2) - log2 log2 (1/delta), minus 2.

    Negative results mean the bound is vacuous at the probed scale."""
    if not 0.0 <= p_succ <= 1.0:
        raise ValueError(f"success {p_succ} outside [0, 1]")
    if oracle is None:
        def oracle(target: float) -> float:
            return distributional_cc(truth, target)
    best = -math.inf
    for delta in deltas:
        if not 0.0 < delta <= 0.5:
            raise ValueError(f"delta={delta} must lie in (0, 1/2]")
        target = (1.0 - delta) * p_succ + delta / 2.0
        penalty = math.log2(math.log2(1.0 / delta))
        best = max(best, oracle(target) - penalty)
    return best - 2.0


def one_way_linear_bell(table: CorrelationTable, stats: OneWayStats,
                        k: float = 1.0) -> BellReport:
    """Linear Bell test from merged flag instances.

    Runs ceil(k / p_a) independent instances; Alice announces the first
    flagged one (or ABORT, worth a coin flip), Bob answers from that
    instance.  The classical bound grants a one-way protocol the same
    index budget.
    """
    if table.schedule is not None or table.axes != (2, 2):
        raise ValueError("flag-indexed one-way table required")
    if k < 1:
        raise ValueError(f"amplification parameter k={k} must be >= 1")
    if stats.p_a <= 0:
        raise ValueError("flag rate must be positive")
    m = math.ceil(k / stats.p_a - _CEIL_GUARD)
    t = stats.truth
    value = 0.0
    for x, y in t.support():
        arr = table.tables[(x, y)]
        hit_rate = arr[1, :].sum()
        hit_correct = arr[1, t.f[x, y]]
        q = 1.0 - hit_rate
        if q < 1.0:
            geom = (1.0 - q ** m) / (1.0 - q)
        else:
            geom = 0.0
        value += t.mu[x, y] * (hit_correct * geom + q ** m * 0.5)
    value = float(value)
    if value > 1.0 + 1e-12:
        raise InvariantError(f"merged value {value} exceeds 1")
    budget = index_cost_bits(m)
    delta = best_success_one_way(t, budget) - 0.5
    return BellReport(
        bell_value=value, shifted_value=value - 0.5,
        classical_delta=float(delta), classical_method="cc_derived",
        ratio=violation_ratio(value - 0.5, float(delta)),
        schedule=None, mode=table.mode, seed=table.seed,
        budget_bits=float(budget),
        meta={"instances": m, "k": float(k)})
