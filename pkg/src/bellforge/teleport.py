"""Deterministic port-based teleportation.

The sender holds an input register and one half of N maximally entangled
pairs ("ports"); a single square-root (pretty-good) measurement over the
input plus all sender port halves yields an outcome z, and the receiver's
z-th port half IS the output: no correction is ever applied, the receiver
only discards the other ports.  Average fidelity approaches 1 like
1 - d^2/N while the classical message costs log2(N) bits.

The measurement operators follow the pretty-good-measurement recipe
  sigma_i = (proj onto |Phi+> on input x port i) (x) I/d^(N-1)
  Pi_i    = S^(-1/2) sigma_i S^(-1/2) + (I - P_supp)/N,  S = sum_j sigma_j
with the inverse square root taken on the support of S (eigenvalues below
1e-12 of the largest are treated as zero) and the off-support identity
shared uniformly so the family is complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import (
    MAX_TOTAL_DIM,
    CapExceededError,
    MixedState,
    Povm,
    PureState,
    RegisterLayout,
    _sym,
    embed_operator,
    max_entangled,
    psd_sqrt,
)

# Relative eigenvalue cutoff for the pseudo-inverse square root of S.
PINV_CUTOFF = 1e-12
# The PGM elements pass through several matrix factorizations; completeness
# holds to 1e-9 rather than the raw POVM tolerance.
ATOL_PBT_POVM = 1e-9


@dataclass(frozen=True)
class PbtResource:
    """N maximally entangled pairs on registers A_1..A_N (sender) and
    B_1..B_N (receiver)."""
    N: int
    d: int
    state: PureState


@dataclass(frozen=True)
class PbtMeasurement:
    """Square-root measurement over the input register plus all sender
    port halves (A_0, A_1..A_N)."""
    N: int
    d: int
    signal_states: tuple[MixedState, ...]
    elements: Povm


def _port_names(prefix: str, N: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, N + 1)]


def build_resource(N: int, d: int) -> PbtResource:
    """N fresh maximally entangled pairs, pair i on (A_i, B_i)."""
    if N < 1:
        raise ValueError(f"port count N={N} must be >= 1")
    if d < 2:
        raise ValueError(f"port dimension d={d} must be >= 2")
    total = d ** (2 * N)
    if total > MAX_TOTAL_DIM:
        raise CapExceededError(
            f"resource dimension d^(2N) = {total} exceeds {MAX_TOTAL_DIM}")
    dn = d ** N
    # With layout (A_1..A_N, B_1..B_N) the product of pair states flattens
    # to the identity matrix over the collective port index, scaled d^(-N/2).
    amp = (np.eye(dn, dtype=np.complex128) / math.sqrt(dn)).reshape(-1)
    layout = RegisterLayout(
        [(n, d) for n in _port_names("A", N) + _port_names("B", N)])
    return PbtResource(N=N, d=d, state=PureState(amp, layout))


def build_pbt_povm(N: int, d: int) -> PbtMeasurement:
    """Pretty-good measurement for N ports of dimension d."""
    if N < 1:
        raise ValueError(f"port count N={N} must be >= 1")
    if d < 2:
        raise ValueError(f"port dimension d={d} must be >= 2")
    dim = d ** (N + 1)
    if dim > MAX_TOTAL_DIM:
        raise CapExceededError(
            f"measurement dimension d^(N+1) = {dim} exceeds {MAX_TOTAL_DIM}")
    layout = RegisterLayout([("A0", d)] + [(n, d) for n in _port_names("A", N)])
    phi = max_entangled(d).amplitudes
    proj = np.outer(phi, phi.conj())
    signals = []
    for i in range(1, N + 1):
        sig = embed_operator(proj, layout, ["A0", f"A{i}"]) / d ** (N - 1)
        signals.append(MixedState(sig, layout))
    S = np.zeros((dim, dim), dtype=np.complex128)
    for sig in signals:
        S = S + sig.matrix
    w, v = np.linalg.eigh(_sym(S))
    cut = PINV_CUTOFF * w.max()
    on_supp = w > cut
    inv_root = np.where(on_supp, 1.0 / np.sqrt(np.where(on_supp, w, 1.0)), 0.0)
    s_irt = (v * inv_root) @ v.conj().T
    p_supp = (v * on_supp.astype(float)) @ v.conj().T
    remainder = (np.eye(dim) - p_supp) / N
    elems = [_sym(s_irt @ sig.matrix @ s_irt + remainder) for sig in signals]
    return PbtMeasurement(N=N, d=d, signal_states=tuple(signals),
                          elements=Povm(elems, atol=ATOL_PBT_POVM))


def _purify(rho: MixedState) -> np.ndarray:
    """Purification of a d-dim state: array psi[r, a] with reference index r,
    so that sum_r psi[r,:] psi[r,:]^dag = rho."""
    w, v = np.linalg.eigh(_sym(rho.matrix))
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return (v * np.sqrt(w)).T.astype(np.complex128)


def _branch_tensors(psi_in: np.ndarray, resource: PbtResource,
                    meas: PbtMeasurement) -> list[np.ndarray]:
    """Unnormalized post-measurement tensors, one per outcome.

    psi_in has shape (d_ref, d): a purified input with its reference index
    first.  Each result has shape (d_ref, d^(N+1), d, ..., d) with the last
    N axes the receiver ports B_1..B_N; its squared norm is the outcome
    probability.
    """
    N, d = resource.N, resource.d
    dn = d ** N
    if psi_in.shape[1] != d:
        raise ValueError(f"input dimension {psi_in.shape[1]} != port dim {d}")
    total = psi_in.shape[0] * d * dn * dn
    if total > MAX_TOTAL_DIM:
        raise CapExceededError(
            f"purified joint dimension {total} exceeds {MAX_TOTAL_DIM}")
    res2 = resource.state.amplitudes.reshape(dn, dn)
    # joint[r, a0, x, b]: the measured block is (a0, x) with a0 major, which
    # matches the C-order flattening of the POVM's (A_0, A_1..A_N) layout.
    joint = np.einsum("ra,xb->raxb", psi_in, res2)
    joint = joint.reshape(psi_in.shape[0], d * dn, dn)
    out = []
    for elem in meas.elements.elements:
        root = psd_sqrt(elem)
        branch = np.einsum("mk,rkb->rmb", root, joint)
        out.append(branch.reshape((psi_in.shape[0], d * dn) + (d,) * N))
    return out


def _branch_output(branch: np.ndarray, z: int, N: int, d: int,
                   with_reference: bool) -> tuple[float, np.ndarray]:
    """(probability, unnormalized reduced matrix) of one outcome branch.

    The reduced matrix lives on B_z, preceded by the purification reference
    when `with_reference` is set; dividing by the probability normalizes it.
    """
    axes = list(range(branch.ndim))
    keep = ([0] if with_reference else []) + [1 + z]
    rest = [a for a in axes if a not in keep]
    keep_dim = int(np.prod([branch.shape[a] for a in keep]))
    m = branch.transpose(keep + rest).reshape(keep_dim, -1)
    prob = float(np.einsum("ij,ij->", m, m.conj()).real)
    return prob, m @ m.conj().T


def teleport_branches(input_state: MixedState, resource: PbtResource,
                      meas: PbtMeasurement
                      ) -> list[tuple[float, MixedState]]:
    """All N outcome branches: (probability, output on the selected port).

    The output for outcome z is purely the reduced state of the receiver's
    z-th port; no outcome-dependent correction exists anywhere in this path.
    """
    N, d = resource.N, resource.d
    psi_in = _purify(input_state)
    branches = _branch_tensors(psi_in, resource, meas)
    out = []
    for z, branch in enumerate(branches, start=1):
        prob, raw = _branch_output(branch, z, N, d, with_reference=False)
        if prob < 1e-300:
            # outcome numerically impossible; report the maximally mixed port
            rho = np.eye(d) / d
        else:
            rho = _sym(raw / prob)
            rho = rho / np.trace(rho).real
        out.append((prob, MixedState(rho, [(f"B{z}", d)])))
    return out


def teleport(input_state: MixedState, resource: PbtResource,
             meas: PbtMeasurement, rng: np.random.Generator
             ) -> tuple[int, MixedState]:
    """Run one teleportation: sample the measurement, return (z, output).

    Every outcome yields an output; the receiver only discards the ports
    other than z.
    """
    if resource.N != meas.N or resource.d != meas.d:
        raise ValueError("resource and measurement disagree on (N, d)")
    branches = teleport_branches(input_state, resource, meas)
    probs = np.clip(np.array([p for p, _ in branches]), 0.0, None)
    z = int(rng.choice(len(probs), p=probs / probs.sum())) + 1
    return z, branches[z - 1][1]


def entanglement_fidelity(N: int, d: int, trials: int | None = None,
                          seed: int | None = None) -> float:
    """Fidelity of teleporting one half of a fresh maximally entangled pair.

    The sender's half of |Phi+(d)>, held against an external reference, is
    teleported; the result is the fidelity of (reference (x) output) with
    |Phi+(d)>, averaged exactly over all N outcomes.  With `trials` set the
    average is instead estimated from that many sampled outcomes (the
    per-outcome fidelities stay exact).
    """
    resource = build_resource(N, d)
    meas = build_pbt_povm(N, d)
    phi = max_entangled(d).amplitudes
    psi_in = phi.reshape(d, d)  # reference index first; symmetric anyway
    branches = _branch_tensors(psi_in, resource, meas)
    probs = np.empty(N)
    fids = np.empty(N)
    for z, branch in enumerate(branches, start=1):
        prob, raw = _branch_output(branch, z, N, d, with_reference=True)
        probs[z - 1] = prob
        # <Phi| raw |Phi> / prob, computed without forming the quotient
        val = float(np.real(phi.conj() @ raw @ phi))
        fids[z - 1] = val / prob if prob > 1e-300 else 0.0
    if trials is None:
        return float(np.sum(probs * fids) / probs.sum())
    rng = np.random.default_rng(seed)
    p = np.clip(probs, 0.0, None)
    draws = rng.choice(N, size=trials, p=p / p.sum())
    return float(np.mean(fids[draws]))


def classical_cost(N: int) -> float:
    """Classical bits sent per teleportation: log2(N)."""
    if N < 1:
        raise ValueError(f"port count N={N} must be >= 1")
    return math.log2(N)
