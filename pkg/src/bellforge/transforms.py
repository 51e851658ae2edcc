"""Protocol transformations: one-qubit rounds, memory spans, memoryless form.

`to_single_qubit_rounds` rewrites a protocol so that every transmission is a
single qubit: one shuttle qubit bounces between the parties, carrying the
source protocol's message qubits one at a time in dedicated per-message
blocks of rounds.  On that form, for a fixed input, a party's memory after
round i is spanned by at most 2^i vectors (`memory_span_basis`), because
each round moves exactly one data qubit and an empty return leg is always
exactly |0>.  `to_memoryless` exploits the small span: each round the sender
compresses its whole memory onto that span and appends it to the
transmission, so nothing but blank |0> pads ever stays behind.
"""

from __future__ import annotations

import dataclasses
from math import ceil, log2

import numpy as np

from .protocols import CommProtocol, MemorylessProtocol
from .states import InvariantError, Povm

SPAN_RTOL = 1e-5  # singular-value cutoff; squares to the 1e-10 Gram tolerance


def _log2_exact(d: int, what: str) -> int:
    q = d.bit_length() - 1
    if d < 1 or (1 << q) != d:
        raise ValueError(f"{what}: dimension {d} is not a power of 2")
    return q


def _prod(xs) -> int:
    out = 1
    for x in xs:
        out *= int(x)
    return out


class _Ctx:
    """Running unitary over an ordered list of named tensor factors.

    Bookkeeping (renaming or refactoring an axis) is free; permutations and
    embedded operators compose into the matrix.  Dimension-1 factors are
    never materialized.
    """

    def __init__(self, dims, tags):
        pairs = [(t, int(d)) for t, d in zip(tags, dims) if d > 1]
        self.tags = [t for t, _ in pairs]
        self.dims = [d for _, d in pairs]
        self.u = np.eye(_prod(self.dims), dtype=np.complex128)

    def _front(self, tags) -> None:
        pos = [self.tags.index(t) for t in tags]
        rest = [i for i in range(len(self.tags)) if i not in pos]
        order = pos + rest
        if order != list(range(len(order))):
            arr = np.arange(len(self.u)).reshape(self.dims).transpose(order)
            self.u = self.u[arr.reshape(-1), :]
            self.tags = [self.tags[i] for i in order]
            self.dims = [self.dims[i] for i in order]

    def rename(self, old, new) -> None:
        if old in self.tags:
            self.tags[self.tags.index(old)] = new

    def refactor(self, tag, new_dims, new_tags) -> None:
        """Reinterpret one axis as a row-major product of factors."""
        if tag not in self.tags:
            if _prod(new_dims) != 1:
                raise ValueError(f"refactor: absent axis {tag}")
            return
        i = self.tags.index(tag)
        if _prod(new_dims) != self.dims[i]:
            raise ValueError(f"refactor: {new_dims} != dim {self.dims[i]}")
        keep = [(t, d) for t, d in zip(new_tags, new_dims) if d > 1]
        self.tags[i:i + 1] = [t for t, _ in keep]
        self.dims[i:i + 1] = [d for _, d in keep]

    def merge(self, tags, new_tag) -> None:
        """Group the named axes (in order) into one axis."""
        tags = [t for t in tags if t in self.tags]
        if not tags:
            return
        self._front(tags)
        k = len(tags)
        d = _prod(self.dims[:k])
        self.tags[:k] = [new_tag]
        self.dims[:k] = [d]

    def apply(self, op, in_tags, out_dims, out_tags) -> None:
        in_tags = [t for t in in_tags if t in self.tags]
        self._front(in_tags)
        k = len(in_tags)
        d_op = _prod(self.dims[:k])
        if op.shape != (d_op, d_op):
            raise ValueError(
                f"operator shape {op.shape} does not match block {d_op}")
        total = len(self.u)
        self.u = (op @ self.u.reshape(d_op, -1)).reshape(total, total)
        keep = [(t, int(d)) for t, d in zip(out_tags, out_dims) if d > 1]
        self.tags[:k] = [t for t, _ in keep]
        self.dims[:k] = [d for _, d in keep]

    def finish(self, tag_order) -> np.ndarray:
        tag_order = [t for t in tag_order if t in self.tags]
        if sorted(map(str, tag_order)) != sorted(map(str, self.tags)):
            raise ValueError(f"finish: {tag_order} != axes {self.tags}")
        self._front(tag_order)
        return self.u

    def dim_of(self, tag) -> int:
        return self.dims[self.tags.index(tag)] if tag in self.tags else 1


def _message_blocks(p: CommProtocol):
    """Source messages in transmission order: (owner, dim, qubit count)."""
    msgs = []
    for i in range(p.rounds):
        msgs.append(("A", p.m_out_dims[i]))
        if i < p.rounds - 1:
            msgs.append(("B", p.m_back_dims[i]))
    out = []
    for k, (owner, d) in enumerate(msgs):
        if d < 2:
            raise ValueError(
                f"message {k}: dimension {d}; every message must carry at "
                "least one qubit")
        out.append((owner, d, _log2_exact(d, f"message {k}")))
    return out


@dataclasses.dataclass
class _RoundPlan:
    has_sh_in: bool
    in_mem: list          # (tag, dim) of the memory entering the round
    anc: list             # (tag, dim) fresh |0> axes
    absorb: object        # tag the arriving data qubit becomes, or None
    fire: object          # (src_round, sel_tags, out_dims, out_tags) or None
    sh_out: object        # tag that leaves as the shuttle
    bounce_to: object     # tag a kept |0> bounce becomes, or None
    out_mem: list         # (tag, dim) after the round


def _plan_party(p: CommProtocol, msgs, party: str):
    """Symbolic per-round ledger for one party of the split protocol."""
    rounds_total = sum(q for _, _, q in msgs)
    sched = []  # (message index, qubit index) per global round
    for k, (_, _, q) in enumerate(msgs):
        sched.extend((k, j) for j in range(q))
    fire_at = {}  # global round -> source round index
    pos = 0
    for k, (owner, _, q) in enumerate(msgs):
        if owner == party:
            fire_at[pos] = k // 2 if party == "A" else (k - 1) // 2
        pos += q
    mine = "A" if party == "A" else "B"
    init_dim = p.a0_dim if party == "A" else p.b0_dim
    src_dims = p.a_dims if party == "A" else p.b_dims
    src_anc = p.anc_a_dims if party == "A" else p.anc_b_dims
    ledger = [(("src", -1), init_dim)] if init_dim > 1 else []
    blanks = 0
    n_blank = 0
    plans = []
    n_rounds = rounds_total if party == "A" else rounds_total - 1
    for t in range(n_rounds):
        k_in = sched[t - 1] if party == "A" and t > 0 else \
            (sched[t] if party == "B" else None)
        in_data = k_in is not None and msgs[k_in[0]][0] != party
        has_sh_in = party == "B" or t > 0
        in_mem = list(ledger)
        anc, absorb, fire, sh_out = [], None, None, None
        bounce_free = False
        if has_sh_in:
            if in_data:
                absorb = ("q",) + k_in
                ledger.append((absorb, 2))
            else:
                bounce_free = True
        if t in fire_at:
            ell = fire_at[t]
            k_msg = sched[t][0]
            consumed_msg = k_msg - 1  # message this source op takes as input
            sel = []
            if consumed_msg >= 0:
                q_in = msgs[consumed_msg][2]
                sel += [("q", consumed_msg, j) for j in range(q_in)]
            sel.append(("src", ell - 1))
            sa = src_anc[ell]
            if sa > 1:
                anc.append((("anc", t, "src"), sa))
                sel.append(("anc", t, "src"))
            q_out = msgs[k_msg][2]
            out_tags = [("q", k_msg, j) for j in range(q_out)]
            out_dims = [2] * q_out
            sd = src_dims[ell]
            if sd > 1:
                out_tags.append(("src", ell))
                out_dims.append(sd)
            ledger = [e for e in ledger
                      if e[0] not in sel and e[0] != ("src", ell - 1)]
            ledger += [(tg, d) for tg, d in zip(out_tags, out_dims)]
            fire = (ell, [s for s in sel
                          if s[0] != "src" or src_dims_at(p, party, ell - 1) > 1
                          ], out_dims, out_tags)
        out_is_mine = msgs[sched[t][0]][0] == party
        bounce_to = None
        if out_is_mine:
            sh_out = ("q",) + sched[t]
            ledger = [e for e in ledger if e[0] != sh_out]
            if bounce_free:
                bounce_to = ("blank", n_blank)
                n_blank += 1
                ledger.append((bounce_to, 2))
                blanks += 1
        else:
            if bounce_free:
                sh_out = "bounce"
            elif blanks > 0:
                tag = next(e[0] for e in ledger if e[0][0] == "blank")
                ledger = [e for e in ledger if e[0] != tag]
                blanks -= 1
                sh_out = tag
            else:
                tag = ("anc", t, "sh")
                anc.append((tag, 2))
                sh_out = tag
        plans.append(_RoundPlan(has_sh_in, in_mem, anc, absorb, fire,
                                sh_out, bounce_to, list(ledger)))
    return plans, ledger


def src_dims_at(p: CommProtocol, party: str, ell: int) -> int:
    if ell < 0:
        return p.a0_dim if party == "A" else p.b0_dim
    return (p.a_dims if party == "A" else p.b_dims)[ell]


def _build_round_op(p: CommProtocol, party: str, plan: _RoundPlan,
                    v: int) -> np.ndarray:
    dims = ([2] if plan.has_sh_in else []) \
        + [d for _, d in plan.in_mem] + [d for _, d in plan.anc]
    tags = (["sh"] if plan.has_sh_in else []) \
        + [t for t, _ in plan.in_mem] + [t for t, _ in plan.anc]
    ctx = _Ctx(dims, tags)
    if plan.absorb is not None:
        ctx.rename("sh", plan.absorb)
    elif plan.has_sh_in:
        ctx.rename("sh", "bounce")
    if plan.fire is not None:
        ell, sel, out_dims, out_tags = plan.fire
        ops = p.alice_ops if party == "A" else p.bob_ops
        ctx.apply(ops[ell][v], sel, out_dims, out_tags)
    if plan.bounce_to is not None:
        ctx.rename("bounce", plan.bounce_to)
    ctx.rename(plan.sh_out, "sh")
    return ctx.finish(["sh"] + [t for t, _ in plan.out_mem])


def _split_observable(p: CommProtocol, msgs, bob_ledger, y) -> Povm:
    last = len(msgs) - 1
    _, m_dim, q = msgs[last]
    dims = [2] + [d for _, d in bob_ledger]
    tags = ["sh"] + [t for t, _ in bob_ledger]
    ctx = _Ctx(dims, tags)
    front = [("q", last, j) for j in range(q - 1)] + ["sh"]
    src_tag = ("src", p.rounds - 2)
    if p.rounds == 1:
        src_tag = ("src", -1)
    if ctx.dim_of(src_tag) > 1:
        front.append(src_tag)
    perm = ctx.finish(front + [t for t in ctx.tags if t not in front])
    d_total = len(perm)
    b_dim = src_dims_at(p, "B", p.rounds - 2)
    d_meas = m_dim * b_dim
    rest = d_total // d_meas
    elements = []
    for e in p.observables[y].elements:
        big = np.kron(e, np.eye(rest))
        elements.append(perm.conj().T @ big @ perm)
    return Povm(elements)


def to_single_qubit_rounds(p: CommProtocol) -> CommProtocol:
    """Rewrite so every transmitted register is a single qubit.

    One shuttle qubit bounces between the parties each round; the source
    messages ride it one qubit at a time, each message getting a dedicated
    block of rounds.  The number of rounds equals the source's total
    transmitted qubit count, and the output distribution agrees exactly.
    """
    msgs = _message_blocks(p)
    rounds = sum(q for _, _, q in msgs)
    if p.rounds == 1 and p.m_out_dims == (2,):
        return dataclasses.replace(p, meta=_form_meta([True], [], rounds))
    plans_a, _ = _plan_party(p, msgs, "A")
    plans_b, bob_ledger = _plan_party(p, msgs, "B")
    size = p.truth.num_inputs
    alice_ops = tuple(
        {x: _build_round_op(p, "A", plan, x) for x in range(size)}
        for plan in plans_a)
    bob_ops = tuple(
        {y: _build_round_op(p, "B", plan, y) for y in range(size)}
        for plan in plans_b)
    observables = {y: _split_observable(p, msgs, bob_ledger, y)
                   for y in range(size)}
    sched = []
    for k, (_, _, q) in enumerate(msgs):
        sched.extend([k] * q)
    a_out_data = [msgs[sched[t]][0] == "A" for t in range(rounds)]
    meta = _form_meta(a_out_data, sched, rounds)
    return CommProtocol(
        truth=p.truth, rounds=rounds,
        a0_dim=p.a0_dim, b0_dim=p.b0_dim,
        m_out_dims=(2,) * rounds, m_back_dims=(2,) * (rounds - 1),
        a_dims=tuple(_prod(d for _, d in plan.out_mem) for plan in plans_a),
        b_dims=tuple(_prod(d for _, d in plan.out_mem) for plan in plans_b),
        anc_a_dims=tuple(_prod(d for _, d in plan.anc) for plan in plans_a),
        anc_b_dims=tuple(_prod(d for _, d in plan.anc) for plan in plans_b),
        alice_ops=alice_ops, bob_ops=bob_ops,
        observables=observables, epsilon=p.epsilon, meta=meta)


def _form_meta(a_out_data, sched, rounds):
    if not sched:  # single-round shortcut
        return {"single_qubit_form": True,
                "alice_in_data": (False,), "alice_out_data": (True,),
                "bob_in_data": (), "bob_out_data": ()}
    a_out = tuple(bool(v) for v in a_out_data)
    return {
        "single_qubit_form": True,
        "alice_out_data": a_out,
        "alice_in_data": (False,) + tuple(not a_out[t]
                                          for t in range(rounds - 1)),
        "bob_in_data": a_out[:rounds - 1],
        "bob_out_data": tuple(not a_out[t] for t in range(rounds - 1)),
    }


def _orthonormal_rows(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the row space, rank at Gram tol 1e-10."""
    if vectors.size == 0:
        return vectors.reshape(0, vectors.shape[-1])
    _, s, vh = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return vh[:0]
    rank = int(np.sum(s >= SPAN_RTOL * s[0]))
    return vh[:rank]


def _check_single_qubit_form(p: CommProtocol) -> None:
    if any(d != 2 for d in p.m_out_dims + p.m_back_dims):
        raise ValueError(
            "protocol is not in single-qubit-round form; apply "
            "to_single_qubit_rounds first")


def _pin_flags(p: CommProtocol, party: str):
    """Which incoming shuttles may carry data (True) vs are pinned |0>."""
    r = p.rounds
    n = r if party == "A" else r - 1
    meta = p.meta if isinstance(p.meta, dict) else {}
    key = "alice_in_data" if party == "A" else "bob_in_data"
    if meta.get("single_qubit_form") and key in meta:
        flags = meta[key]
        if len(flags) == n:
            return tuple(bool(v) for v in flags)
    # Without construction metadata, conservatively branch on every leg.
    return ((False,) + (True,) * (n - 1)) if party == "A" else (True,) * n


def _span_chain(p: CommProtocol, party: str, v: int):
    """Orthonormal memory-span bases (rows) after each of the party's rounds."""
    r = p.rounds
    n = r if party == "A" else r - 1
    ops = p.alice_ops if party == "A" else p.bob_ops
    anc_dims = p.anc_a_dims if party == "A" else p.anc_b_dims
    pins = _pin_flags(p, party)
    cur = np.zeros((1, src_dims_at(p, party, -1)), dtype=np.complex128)
    cur[0, 0] = 1.0
    chain = []
    for t in range(n):
        has_sh_in = party == "B" or t > 0
        d_mem_out = src_dims_at(p, party, t)
        anc = np.zeros(anc_dims[t], dtype=np.complex128)
        anc[0] = 1.0
        new = []
        for vec in cur:
            base = np.kron(vec, anc)
            if has_sh_in:
                cs = (0, 1) if pins[t] else (0,)
            else:
                cs = (None,)
            for c in cs:
                if c is None:
                    psi = base
                else:
                    sh = np.zeros(2, dtype=np.complex128)
                    sh[c] = 1.0
                    psi = np.kron(sh, base)
                phi = (ops[t][v] @ psi).reshape(2, d_mem_out)
                new.append(phi[0])
                new.append(phi[1])
        cur = _orthonormal_rows(np.array(new))
        if len(cur) > 2 ** (t + 1):
            raise InvariantError(
                f"memory span after round {t + 1} has {len(cur)} vectors, "
                f"exceeding 2^{t + 1}")
        if len(cur) == 0:
            cur = np.zeros((1, d_mem_out), dtype=np.complex128)
            cur[0, 0] = 1.0  # dimension-1 memory: trivial state
        chain.append(cur)
    return chain


def memory_span_basis(p: CommProtocol, party: str, round_index: int,
                      input_value: int) -> np.ndarray:
    """Orthonormal basis (rows) spanning the party's possible memory states
    after its round `round_index` (1-based), over all communication
    histories, for a fixed own input.

    At most 2^i vectors; a dimension-1 (absent) memory yields an empty
    basis.  The bound is guaranteed for protocols produced by
    to_single_qubit_rounds; for hand-built single-qubit protocols every
    incoming leg is treated as potentially data-carrying.
    """
    if party not in ("alice", "bob"):
        raise ValueError(f"party must be 'alice' or 'bob', got {party!r}")
    _check_single_qubit_form(p)
    pc = "A" if party == "alice" else "B"
    n = p.rounds if pc == "A" else p.rounds - 1
    if not 1 <= round_index <= n:
        raise ValueError(f"round_index {round_index} outside 1..{n}")
    size = p.truth.num_inputs
    if not 0 <= input_value < size:
        raise ValueError(f"input {input_value} outside 0..{size - 1}")
    if src_dims_at(p, pc, round_index - 1) == 1:
        return np.zeros((0, 1), dtype=np.complex128)
    chain = _span_chain(p, pc, input_value)
    return chain[round_index - 1]


def _completion_unitary(basis: np.ndarray, big: int, alpha: int) -> np.ndarray:
    """Unitary compressing span vectors into the low block of alpha qubits.

    Row j * 2^(big_qubits - alpha) is the j-th (embedded) span vector, so the
    map sends span vector j to |j>|0...0>; remaining rows complete the basis.
    """
    d = basis.shape[1]
    pad = big // d
    s = basis.shape[0]
    embedded = np.zeros((s, big), dtype=np.complex128)
    embedded[:, ::pad] = basis
    _, _, vh = np.linalg.svd(embedded, full_matrices=True)
    complement = vh[s:]
    u = np.zeros((big, big), dtype=np.complex128)
    stride = big >> alpha
    span_rows = [j * stride for j in range(s)]
    u[span_rows, :] = embedded
    rest_rows = [i for i in range(big) if i not in span_rows]
    u[rest_rows, :] = complement
    return u


def _is_memory_free(p: CommProtocol) -> bool:
    return all(d == 1 for d in p.a_dims) and all(d == 1 for d in p.b_dims)


def to_memoryless(p: CommProtocol) -> MemorylessProtocol:
    """Convert a single-qubit-round protocol into one where no party keeps
    any information between rounds.

    Each round the sender compresses its entire memory onto its span basis
    (at most i qubits after round i) and appends it to the transmission;
    the receiver decompresses, acts, recompresses, and sends everything
    back.  Only exact-|0> blank pads remain local.  `qubit_cost` counts
    each round's fresh content once: the shuttle plus the two newly
    compressed memories (pass-through qubits continue the same round trip).
    """
    _check_single_qubit_form(p)
    q_rounds = p.rounds
    if _is_memory_free(p):
        # Already memoryless: it is its own source, and its cost is just
        # the qubits it transmits.
        cost = len(p.m_out_dims) + len(p.m_back_dims)
        return MemorylessProtocol(proto=p, qubit_cost=cost,
                                  source_qubits=cost)
    for name in ("a0_dim", "b0_dim"):
        _log2_exact(getattr(p, name), name)
    for name in ("a_dims", "b_dims", "anc_a_dims", "anc_b_dims"):
        for d in getattr(p, name):
            _log2_exact(d, name)
    size = p.truth.num_inputs
    chains_a = {x: _span_chain(p, "A", x) for x in range(size)}
    chains_b = {y: _span_chain(p, "B", y) for y in range(size)}
    alpha = [max(ceil(log2(max(len(chains_a[x][t]), 1)))
                 for x in range(size)) for t in range(q_rounds)]
    beta = [max(ceil(log2(max(len(chains_b[y][t]), 1)))
                for y in range(size)) for t in range(q_rounds - 1)]
    dims_a = [p.a0_dim] + list(p.a_dims)
    dims_b = [p.b0_dim] + list(p.b_dims)
    ka = max(max(_log2_exact(d, "a") for d in dims_a),
             max(alpha, default=0))
    kb = max(max(_log2_exact(d, "b") for d in dims_b),
             max(beta, default=0))
    coms_a = {x: [_completion_unitary(chains_a[x][t], 2 ** ka, alpha[t])
                  for t in range(q_rounds)] for x in range(size)}
    coms_b = {y: [_completion_unitary(chains_b[y][t], 2 ** kb, beta[t])
                  for t in range(q_rounds - 1)] for y in range(size)}

    def alice_round(t: int, x: int) -> np.ndarray:
        d_prev, d_cur = dims_a[t], dims_a[t + 1]
        anc_split = p.anc_a_dims[t]
        if t == 0:
            ctx = _Ctx([2 ** ka, 2], ["amb", "anc"])
            ctx.refactor("amb", [d_prev, 2 ** ka // d_prev], ["spA", "pad"])
            ctx.merge(["pad", "anc"], "pool")
            ctx.refactor("pool", [anc_split, 2 ** (ka + 1) // d_prev // anc_split],
                         ["sanc", "left"])
        else:
            b_prev = beta[t - 1]
            ctx = _Ctx([2, 2 ** alpha[t - 1], 2 ** b_prev,
                        2 ** (ka - alpha[t - 1])],
                       ["sh", "cA", "cB", "blank"])
            ctx.merge(["cA", "blank"], "camb")
            ctx.apply(coms_a[x][t - 1].conj().T, ["camb"],
                      [2 ** ka], ["amb"])
            ctx.refactor("amb", [d_prev, 2 ** ka // d_prev], ["spA", "pad"])
            ctx.refactor("pad", [anc_split, 2 ** ka // d_prev // anc_split],
                         ["sanc", "left"])
        ctx.apply(p.alice_ops[t][x], ["sh", "spA", "sanc"],
                  [2, d_cur], ["sh", "spA2"])
        ctx.merge(["spA2", "left"], "camb2")
        ctx.apply(coms_a[x][t], ["camb2"], [2 ** ka], ["amb2"])
        ctx.refactor("amb2", [2 ** alpha[t], 2 ** (ka - alpha[t])],
                     ["cA2", "blank2"])
        order = ["sh", "cA2"] + (["cB"] if t > 0 else []) + ["blank2"]
        return ctx.finish(order)

    def bob_round(t: int, y: int) -> np.ndarray:
        d_prev, d_cur = dims_b[t], dims_b[t + 1]
        anc_split = p.anc_b_dims[t]
        if t == 0:
            ctx = _Ctx([2, 2 ** alpha[0], 2 ** kb], ["sh", "cA", "bamb"])
        else:
            ctx = _Ctx([2, 2 ** alpha[t], 2 ** beta[t - 1],
                        2 ** (kb - beta[t - 1])],
                       ["sh", "cA", "cB", "bblank"])
            ctx.merge(["cB", "bblank"], "cbmb")
            ctx.apply(coms_b[y][t - 1].conj().T, ["cbmb"], [2 ** kb], ["bamb"])
        ctx.refactor("bamb", [d_prev, 2 ** kb // d_prev], ["spB", "pad"])
        ctx.refactor("pad", [anc_split, 2 ** kb // d_prev // anc_split],
                     ["sanc", "left"])
        ctx.apply(p.bob_ops[t][y], ["sh", "spB", "sanc"],
                  [2, d_cur], ["sh", "spB2"])
        ctx.merge(["spB2", "left"], "cbmb2")
        ctx.apply(coms_b[y][t], ["cbmb2"], [2 ** kb], ["bamb2"])
        ctx.refactor("bamb2", [2 ** beta[t], 2 ** (kb - beta[t])],
                     ["cB2", "bblank2"])
        return ctx.finish(["sh", "cA", "cB2", "bblank2"])

    def final_observable(y: int) -> Povm:
        a_last = alpha[q_rounds - 1]
        if q_rounds == 1:
            dims = [2, 2 ** a_last, 2 ** kb]
            tags = ["sh", "cA", "bamb"]
            ctx = _Ctx(dims, tags)
        else:
            b_last = beta[q_rounds - 2]
            ctx = _Ctx([2, 2 ** a_last, 2 ** b_last, 2 ** (kb - b_last)],
                       ["sh", "cA", "cB", "bblank"])
            ctx.merge(["cB", "bblank"], "cbmb")
            ctx.apply(coms_b[y][q_rounds - 2].conj().T, ["cbmb"],
                      [2 ** kb], ["bamb"])
        d_b = dims_b[q_rounds - 1]
        ctx.refactor("bamb", [d_b, 2 ** kb // d_b], ["spB", "pad"])
        v = ctx.finish(["sh", "spB"]
                       + [t for t in ctx.tags if t not in ("sh", "spB")])
        rest = len(v) // (2 * d_b)
        elements = [v.conj().T @ np.kron(e, np.eye(rest)) @ v
                    for e in p.observables[y].elements]
        return Povm(elements)

    m_out = tuple(2 ** (1 + alpha[t] + (beta[t - 1] if t > 0 else 0))
                  for t in range(q_rounds))
    m_back = tuple(2 ** (1 + alpha[t] + beta[t]) for t in range(q_rounds - 1))
    proto = CommProtocol(
        truth=p.truth, rounds=q_rounds,
        a0_dim=2 ** ka, b0_dim=2 ** kb if q_rounds > 1 else p.b0_dim,
        m_out_dims=m_out, m_back_dims=m_back,
        a_dims=tuple(2 ** (ka - alpha[t]) for t in range(q_rounds)),
        b_dims=tuple(2 ** (kb - beta[t]) for t in range(q_rounds - 1)),
        anc_a_dims=(2,) + (1,) * (q_rounds - 1),
        anc_b_dims=(1,) * (q_rounds - 1),
        alice_ops=tuple({x: alice_round(t, x) for x in range(size)}
                        for t in range(q_rounds)),
        bob_ops=tuple({y: bob_round(t, y) for y in range(size)}
                      for t in range(q_rounds - 1)),
        observables={y: final_observable(y) for y in range(size)},
        epsilon=p.epsilon,
        meta={"memoryless": True, "alpha": tuple(alpha), "beta": tuple(beta)},
    )
    cost = q_rounds + sum(alpha) + sum(beta)
    return MemorylessProtocol(proto=proto, qubit_cost=cost,
                              source_qubits=q_rounds)
