"""Brute-force sub-dynamics of a bipartite photon-atom system.

Given any composite Hamiltonian H = H_photon + H_atom + H_coupling this
module evolves product initial states unitarily, reduces to the marginals,
extracts Kraus families from matrix elements of U, and builds effective
(Heisenberg-picture) subsystem operators defined by the trace duality

    Tr[O rho_sub(t)] = Tr[O_eff(t) rho_sub(0)].

Every effective operator is computed by two independent routes (direct
partial contraction of U† (O ⊗ I) U against the other side's initial state,
and an explicit Kraus-member sum) and the two must agree; a discrepancy is
an internal error, not a result.

Truncation caveat: the truncated creation operator annihilates |n_max>, so
the composite state |n_max, up> is dynamically unphysical.  Comparisons of
truncated results against closed forms are meaningful only on the validated
subspace spanned by {|n, down>} ∪ {|n, up>: n < n_max}; see
:func:`composite_validated_indices`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    ATOM_DIM,
    DOWN,
    UP,
    CoherentState,
    FockSpace,
    embed_atom,
    embed_photon,
    partial_trace,
    require_atom_density,
    require_density,
)
from .numerics import adjoint, eigh_hermitian, max_abs, require_hermitian, require_unitary

__all__ = [
    "CrossCheckError",
    "BipartiteHamiltonian",
    "assemble_hamiltonian",
    "SpectralPropagator",
    "EvolvedState",
    "evolve_and_reduce",
    "KrausSet",
    "kraus_extract",
    "apply_atom_kraus",
    "apply_photon_kraus",
    "EffectiveOperator",
    "effective_operator",
    "algebra_deviation",
    "composite_validated_indices",
    "validated_defect",
    "photon_validated_dim",
]


class CrossCheckError(RuntimeError):
    """Two supposedly equivalent computation routes disagreed."""


@dataclass(frozen=True)
class BipartiteHamiltonian:
    """Composite Hamiltonian split into its three Hermitian parts."""

    space: FockSpace
    photon_part: np.ndarray = field(repr=False)  # embedded on the composite space
    atom_part: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)
    total: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.total.shape[0]


def assemble_hamiltonian(h_photon: np.ndarray, h_atom: np.ndarray,
                         h_coupling: np.ndarray, space: FockSpace) -> BipartiteHamiltonian:
    """Embed subsystem terms and sum with the composite coupling.

    ``h_photon`` lives on the photon space, ``h_atom`` on the atom space,
    ``h_coupling`` on the composite space; each must be Hermitian.
    """
    h_photon = require_hermitian(np.asarray(h_photon, dtype=np.complex128), what="photon part")
    h_atom = require_hermitian(np.asarray(h_atom, dtype=np.complex128), what="atom part")
    h_coupling = require_hermitian(np.asarray(h_coupling, dtype=np.complex128), what="coupling part")
    if h_photon.shape != (space.dim, space.dim):
        raise ValueError(f"photon part must be {space.dim}x{space.dim}, got {h_photon.shape}")
    if h_atom.shape != (ATOM_DIM, ATOM_DIM):
        raise ValueError(f"atom part must be 2x2, got {h_atom.shape}")
    d = ATOM_DIM * space.dim
    if h_coupling.shape != (d, d):
        raise ValueError(f"coupling must be {d}x{d}, got {h_coupling.shape}")
    ph = embed_photon(h_photon)
    at = embed_atom(h_atom, space)
    return BipartiteHamiltonian(space, ph, at, h_coupling, ph + at + h_coupling)


class SpectralPropagator:
    """exp(-i t H) for many times from a single eigendecomposition."""

    def __init__(self, h: np.ndarray):
        self.evals, self.evecs = eigh_hermitian(np.asarray(h, dtype=np.complex128))

    def __call__(self, t: float) -> np.ndarray:
        return (self.evecs * np.exp(-1j * t * self.evals)) @ self.evecs.conj().T


@dataclass(frozen=True)
class EvolvedState:
    t: float
    composite: np.ndarray = field(repr=False)
    atom: np.ndarray = field(repr=False)
    photon: np.ndarray = field(repr=False)


def evolve_and_reduce(ham: BipartiteHamiltonian, rho_photon0: np.ndarray,
                      rho_atom0: np.ndarray, t: float,
                      propagator: SpectralPropagator | None = None,
                      tol: float = 1e-10) -> EvolvedState:
    """Evolve the product state rho_photon0 ⊗ rho_atom0 and reduce.

    Only product initial states are accepted (the Kraus construction this
    module cross-checks requires them); each factor is validated as a
    density matrix.  Pass a precomputed ``propagator`` when sweeping t.
    """
    rho_photon0 = require_density(np.asarray(rho_photon0, dtype=np.complex128), tol,
                                  "photon density matrix")
    rho_atom0 = require_atom_density(rho_atom0, tol)
    if rho_photon0.shape != (ham.space.dim, ham.space.dim):
        raise ValueError("photon density matrix does not match the Fock space")
    if propagator is None:
        propagator = SpectralPropagator(ham.total)
    u = propagator(t)
    rho = u @ np.kron(rho_photon0, rho_atom0) @ u.conj().T
    return EvolvedState(t, rho, partial_trace(rho, "photon"), partial_trace(rho, "atom"))


# --- Kraus families ---------------------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    """Indexed family of subsystem matrices extracted from a propagator.

    ``side='atom'``: members[N] is the 2x2 operator <N|U|alpha>, one per
    retained photon number.  ``side='photon'``: members[s, s'] is the
    photon-space operator <s|U|s'> for atomic indices s, s' in (up, down).

    ``completeness_residual`` is the max-abs defect of the completeness sum:
    sum_N W†W vs I_atom on the atom side (equals the coherent tail mass), and
    max over s' of sum_s V†_{ss'} V_{ss'} vs I_photon on the photon side.
    """

    side: str
    members: np.ndarray = field(repr=False)
    completeness_residual: float


def _as_u4(u: np.ndarray, nph: int) -> np.ndarray:
    return u.reshape(nph, ATOM_DIM, nph, ATOM_DIM)


def kraus_extract(u: np.ndarray, side: str, coherent: CoherentState | None = None,
                  unitary_tol: float = 1e-10) -> KrausSet:
    """Kraus family from matrix elements of a composite propagator.

    Atom side contracts the photon input leg with the coherent amplitudes
    (pure photon start); photon side uses the atomic basis.
    """
    u = require_unitary(np.asarray(u, dtype=np.complex128), unitary_tol, "propagator")
    if u.shape[0] % ATOM_DIM:
        raise ValueError("composite dimension must be even")
    nph = u.shape[0] // ATOM_DIM
    u4 = _as_u4(u, nph)
    if side == "atom":
        if coherent is None:
            raise ValueError("atom-side extraction needs the initial coherent state")
        if coherent.n_max + 1 != nph:
            raise ValueError("coherent state truncation does not match the propagator")
        members = np.einsum("nsmp,m->nsp", u4, coherent.amplitudes)
        gram = np.einsum("nsp,nsq->pq", members.conj(), members)
        residual = max_abs(gram - np.eye(ATOM_DIM))
        return KrausSet("atom", members, float(residual))
    if side == "photon":
        members = np.transpose(u4, (1, 3, 0, 2))  # [s, s', n, m]
        eye = np.eye(nph)
        residual = 0.0
        for s2 in (UP, DOWN):
            gram = sum(members[s, s2].conj().T @ members[s, s2] for s in (UP, DOWN))
            residual = max(residual, max_abs(gram - eye))
        return KrausSet("photon", members, float(residual))
    raise ValueError(f"side must be 'atom' or 'photon', got {side!r}")


def apply_atom_kraus(kset: KrausSet, rho_atom0: np.ndarray) -> np.ndarray:
    """Atom marginal sum_N W rho W†."""
    if kset.side != "atom":
        raise ValueError("atom-side Kraus set required")
    return np.einsum("nsp,pq,ntq->st", kset.members, rho_atom0, kset.members.conj())


def apply_photon_kraus(kset: KrausSet, rho_photon0: np.ndarray,
                       atom_init: np.ndarray) -> np.ndarray:
    """Photon marginal sum_{s,s1,s2} (rho_atom)_{s2 s1} V_{s s2} rho V†_{s1 s}."""
    if kset.side != "photon":
        raise ValueError("photon-side Kraus set required")
    out = np.zeros_like(rho_photon0, dtype=np.complex128)
    for s in (UP, DOWN):
        for s1 in (UP, DOWN):
            for s2 in (UP, DOWN):
                out += atom_init[s2, s1] * (kset.members[s, s2] @ rho_photon0
                                            @ kset.members[s, s1].conj().T)
    return out


# --- effective (Heisenberg sub-dynamic) operators ---------------------------

@dataclass(frozen=True)
class EffectiveOperator:
    """Heisenberg-picture subsystem operator at a fixed time.

    Satisfies Tr[O rho_sub(t)] = Tr[matrix rho_sub(0)] with the weighting
    state (the other side's initial density matrix) recorded alongside.
    """

    side: str
    t: float
    matrix: np.ndarray = field(repr=False)
    weighting_state: np.ndarray = field(repr=False)


def _weight_factors(weight: np.ndarray):
    """Eigen-factorization of a weighting state with negatives clipped."""
    evals, evecs = np.linalg.eigh(weight)
    keep = evals > 1e-15 * max(1.0, float(evals.max(initial=0.0)))
    return np.sqrt(np.clip(evals[keep], 0.0, None)), evecs[:, keep]


def effective_operator(u: np.ndarray, op: np.ndarray, side: str,
                       other_initial: np.ndarray, t: float = 0.0,
                       crosscheck_tol: float = 1e-9,
                       unitary_tol: float = 1e-10) -> EffectiveOperator:
    """Effective operator of ``op`` on ``side``, weighted by the other side's start.

    Computes both the direct contraction Tr_other[U†(O⊗I)U (I⊗rho_other)]
    and the Kraus-member sum, and raises :class:`CrossCheckError` if they
    disagree beyond ``crosscheck_tol``.
    """
    u = require_unitary(np.asarray(u, dtype=np.complex128), unitary_tol, "propagator")
    op = np.asarray(op, dtype=np.complex128)
    other_initial = require_hermitian(np.asarray(other_initial, dtype=np.complex128),
                                      what="weighting state")
    nph = u.shape[0] // ATOM_DIM
    if side == "photon":
        if op.shape != (nph, nph):
            raise ValueError("photon-side operator has wrong shape")
        if other_initial.shape != (ATOM_DIM, ATOM_DIM):
            raise ValueError("weighting state must be a 2x2 atom matrix")
        big = adjoint(u) @ np.kron(op, np.eye(ATOM_DIM)) @ u
        x4 = _as_u4(big, nph)
        direct = np.einsum("nsmp,ps->nm", x4, other_initial)
    elif side == "atom":
        if op.shape != (ATOM_DIM, ATOM_DIM):
            raise ValueError("atom-side operator must be 2x2")
        if other_initial.shape != (nph, nph):
            raise ValueError("weighting state must live on the photon space")
        big = adjoint(u) @ np.kron(np.eye(nph), op) @ u
        x4 = _as_u4(big, nph)
        direct = np.einsum("nsmp,mn->sp", x4, other_initial)
    else:
        raise ValueError(f"side must be 'atom' or 'photon', got {side!r}")

    # independent route: explicit Kraus members from a factorization of the weight
    roots, vecs = _weight_factors(other_initial)
    u4 = _as_u4(u, nph)
    kraus = np.zeros_like(direct)
    for q, chi in zip(roots, vecs.T):
        if side == "photon":
            # K_{s,k}[n, m] = q <n, s|U|m, chi_k>; weight is the atom start
            k_members = q * np.einsum("nsmp,p->snm", u4, chi)
            kraus += np.einsum("snm,nr,srq->mq", k_members.conj(), op, k_members)
        else:
            # K_{N,k}[s, s'] = q <N, s|U|chi_k, s'>; weight is the photon start
            k_members = q * np.einsum("nsmp,m->nsp", u4, chi)
            kraus += np.einsum("nsp,st,ntq->pq", k_members.conj(), op, k_members)

    defect = max_abs(direct - kraus)
    if defect > crosscheck_tol:
        raise CrossCheckError(
            f"effective-operator routes disagree by {defect:.3e} (> {crosscheck_tol:.1e})")
    return EffectiveOperator(side, t, direct, other_initial)


def algebra_deviation(e1: EffectiveOperator, e2: EffectiveOperator,
                      combined: EffectiveOperator, valid_dim: int | None = None) -> float:
    """max |O1_eff O2_eff - (O1 O2)_eff|, the non-preservation of products.

    ``valid_dim`` restricts the comparison to the leading block, masking
    truncation-corrupted rows/columns.
    """
    if not (e1.side == e2.side == combined.side):
        raise ValueError("effective operators live on different sides")
    if not (e1.t == e2.t == combined.t):
        raise ValueError("effective operators taken at different times")
    dev = e1.matrix @ e2.matrix - combined.matrix
    if valid_dim is not None:
        dev = dev[:valid_dim, :valid_dim]
    return max_abs(dev)


# --- validated-subspace helpers ---------------------------------------------

def composite_validated_indices(n_max: int) -> np.ndarray:
    """Composite indices spanning the truncation-faithful subspace.

    Keeps every |n, down> and |n, up> with n < n_max; drops the dangling
    |n_max, up> state whose exchange partner |n_max+1, down> is truncated.
    """
    keep = np.ones(ATOM_DIM * (n_max + 1), dtype=bool)
    keep[2 * n_max + UP] = False
    return np.flatnonzero(keep)


def validated_defect(a: np.ndarray, b: np.ndarray, n_max: int) -> float:
    """max |a - b| over the validated composite subspace."""
    idx = composite_validated_indices(n_max)
    diff = (a - b)[np.ix_(idx, idx)]
    return max_abs(diff)


def photon_validated_dim(n_max: int) -> int:
    """Photon-space dimension unaffected by the truncated top sector."""
    return n_max
