"""Truncated Fock space, two-level atom, and their tensor product.

Conventions fixed here and used by every other module:

* Photon basis ``|0>..|n_max>`` (dimension ``n_max + 1``); the truncated
  creation operator annihilates ``|n_max>``.
* Atom basis ordered ``(|up>, |down>)`` with ``sigma_z |up> = +|up>``;
  index 0 is up, index 1 is down.
* Composite basis is photon-major: ``|n, s> -> 2*n + s``.  Equivalently,
  composite operators are ``np.kron(photon_op, atom_op)``.  This makes the
  exchange-coupled pairs ``{|n, up>, |n+1, down>}`` near-diagonal bands.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .numerics import adjoint, require_finite, require_hermitian

__all__ = [
    "UP",
    "DOWN",
    "ATOM_DIM",
    "FockSpace",
    "annihilation",
    "creation",
    "number_op",
    "ladder_ops",
    "Paulis",
    "pauli_ops",
    "quadrature_ops",
    "CoherentState",
    "coherent_state",
    "poisson_weights",
    "auto_n_max",
    "composite_index",
    "composite_dim",
    "embed_photon",
    "embed_atom",
    "tensor_product",
    "partial_trace",
    "require_atom_density",
    "require_density",
]

UP, DOWN = 0, 1
ATOM_DIM = 2

#: Truncation is considered faithful when the coherent tail mass stays below this.
DEFAULT_TAIL_TOL = 1e-10

# Above this index the running factorial product would overflow float64,
# so Poisson weights switch to the log domain (lgamma).
_LOG_DOMAIN_N = 150


@dataclass(frozen=True)
class FockSpace:
    """Photon Hilbert space truncated at occupation ``n_max``."""

    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def annihilation(space: FockSpace) -> np.ndarray:
    """a with a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, space.dim, dtype=np.float64)), 1).astype(np.complex128)


def creation(space: FockSpace) -> np.ndarray:
    """a† truncated: a†|n_max> = 0."""
    return adjoint(annihilation(space))


def number_op(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=np.float64)).astype(np.complex128)


def ladder_ops(space: FockSpace):
    """(a, a†, N) on the truncated photon space, with N = a†a."""
    a = annihilation(space)
    adag = adjoint(a)
    return a, adag, adag @ a


Paulis = namedtuple("Paulis", ["x", "y", "z", "plus", "minus"])


def pauli_ops() -> Paulis:
    """Standard Pauli matrices in the (|up>, |down>) ordered basis."""
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    return Paulis(sx, sy, sz, (sx + 1j * sy) / 2, (sx - 1j * sy) / 2)


def quadrature_ops(space: FockSpace, omega: float):
    """Field quadratures (electric, magnetic) for mode frequency ``omega``.

    electric = i sqrt(omega/2) (a - a†), magnetic = sqrt(omega/2) (a + a†).
    Both are Hermitian; (electric² + magnetic²)/2 equals omega (a†a + 1/2) on
    the rows/columns with n < n_max (the truncated a a† breaks it at the top).
    """
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    a = annihilation(space)
    adag = adjoint(a)
    scale = math.sqrt(omega / 2.0)
    return 1j * scale * (a - adag), scale * (a + adag)


def poisson_weights(mean: float, n_max: int) -> np.ndarray:
    """p(n) = exp(-mean) mean^n / n! for n = 0..n_max.

    Uses the running-product recurrence; falls back to the log domain
    (lgamma) when the recurrence would underflow or n grows past 150.
    """
    if mean < 0:
        raise ValueError("mean must be >= 0")
    if mean == 0.0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    if n_max <= _LOG_DOMAIN_N and mean < 700.0:
        p = np.empty(n_max + 1)
        p[0] = math.exp(-mean)
        for n in range(n_max):
            p[n + 1] = p[n] * mean / (n + 1)
        return p
    ns = np.arange(n_max + 1, dtype=np.float64)
    logs = -mean + ns * math.log(mean) - np.array([math.lgamma(n + 1.0) for n in ns])
    return np.exp(logs)


def auto_n_max(mean: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest n_max whose Poisson tail mass beyond it is below ``tail_tol``."""
    if mean < 0:
        raise ValueError("mean must be >= 0")
    n = max(1, int(math.ceil(mean)))
    while True:
        tail = 1.0 - float(np.sum(poisson_weights(mean, n)))
        if tail < tail_tol:
            return n
        n += 1
        if n > 100000:
            raise RuntimeError("auto_n_max did not converge")


@dataclass(frozen=True)
class CoherentState:
    """Truncated coherent state |alpha>, alpha = magnitude * exp(i phase).

    ``amplitudes[n] = exp(-|alpha|²/2) alpha^n / sqrt(n!)`` for n <= n_max;
    ``tail_mass`` is the probability weight lost to the truncation.
    """

    magnitude: float
    phase: float
    amplitudes: np.ndarray = field(repr=False)
    tail_mass: float

    @property
    def alpha(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))

    @property
    def mean_photons(self) -> float:
        return self.magnitude ** 2

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def weights(self) -> np.ndarray:
        """Poisson weights p(n) = |amplitudes[n]|² recomputed analytically."""
        return poisson_weights(self.mean_photons, self.n_max)

    def density(self) -> np.ndarray:
        """|alpha><alpha| on the truncated space (trace = 1 - tail_mass)."""
        return np.outer(self.amplitudes, self.amplitudes.conj())


def coherent_state(magnitude: float, phase: float, space: FockSpace) -> CoherentState:
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    alpha = magnitude * complex(math.cos(phase), math.sin(phase))
    amps = np.empty(space.dim, dtype=np.complex128)
    mean = magnitude ** 2
    if mean < 1400.0:  # exp(-mean/2) stays normal
        amps[0] = math.exp(-mean / 2.0)
        for n in range(space.n_max):
            amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1.0)
    else:
        ns = np.arange(space.dim)
        logmag = -mean / 2.0 + np.where(ns > 0, ns * math.log(max(magnitude, 1e-300)), 0.0)
        logmag -= 0.5 * np.array([math.lgamma(n + 1.0) for n in ns])
        amps = np.exp(logmag) * np.exp(1j * phase * ns)
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    return CoherentState(magnitude, phase, amps, tail)


# --- composite space -------------------------------------------------------

def composite_index(n: int, spin: int) -> int:
    """Photon-major composite index of |n, s>; spin 0 = up, 1 = down."""
    return 2 * n + spin


def composite_dim(space: FockSpace) -> int:
    return ATOM_DIM * space.dim


def embed_photon(op: np.ndarray) -> np.ndarray:
    """photon_op ⊗ I_atom on the composite space."""
    op = np.asarray(op, dtype=np.complex128)
    return np.kron(op, np.eye(ATOM_DIM, dtype=np.complex128))


def embed_atom(op: np.ndarray, space: FockSpace) -> np.ndarray:
    """I_photon ⊗ atom_op on the composite space."""
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (ATOM_DIM, ATOM_DIM):
        raise ValueError(f"atom operator must be 2x2, got {op.shape}")
    return np.kron(np.eye(space.dim, dtype=np.complex128), op)


def tensor_product(photon_op: np.ndarray, atom_op: np.ndarray) -> np.ndarray:
    """photon_op ⊗ atom_op with the photon-major index convention."""
    atom_op = np.asarray(atom_op, dtype=np.complex128)
    if atom_op.shape != (ATOM_DIM, ATOM_DIM):
        raise ValueError(f"atom operator must be 2x2, got {atom_op.shape}")
    return np.kron(np.asarray(photon_op, dtype=np.complex128), atom_op)


def partial_trace(rho: np.ndarray, over: str) -> np.ndarray:
    """Trace out one factor of a composite operator.

    ``over='photon'`` returns the 2x2 atom marginal; ``over='atom'`` returns
    the photon marginal.  The composite dimension must be even.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % ATOM_DIM:
        raise ValueError(f"composite matrix of even square shape required, got {rho.shape}")
    nph = rho.shape[0] // ATOM_DIM
    blocks = rho.reshape(nph, ATOM_DIM, nph, ATOM_DIM)
    if over == "photon":
        return np.trace(blocks, axis1=0, axis2=2)
    if over == "atom":
        return np.trace(blocks, axis1=1, axis2=3)
    raise ValueError(f"over must be 'photon' or 'atom', got {over!r}")


# --- density-matrix validation --------------------------------------------

def require_density(rho: np.ndarray, tol: float = 1e-10, what: str = "density matrix") -> np.ndarray:
    """Validate Hermiticity, unit trace and positive semidefiniteness."""
    rho = require_hermitian(np.asarray(rho, dtype=np.complex128), tol, what)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"{what} trace {tr!r} deviates from 1 beyond {tol}")
    evals = np.linalg.eigvalsh(rho)
    if float(evals.min()) < -tol:
        raise ValueError(f"{what} has negative eigenvalue {evals.min():.3e}")
    return rho


def require_atom_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (ATOM_DIM, ATOM_DIM):
        raise ValueError(f"atom density matrix must be 2x2, got {rho.shape}")
    require_finite(rho, "atom density matrix")
    return require_density(rho, tol, "atom density matrix")
