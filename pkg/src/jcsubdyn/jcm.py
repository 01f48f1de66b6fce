"""Closed-form solution of the resonant-exchange (rotating-wave) atom-field model.

The composite Hamiltonian

    H = omega (a†a + 1/2) ⊗ I  +  (omega0/2) I ⊗ sigma_z
        +  g (a ⊗ sigma_+ + a† ⊗ sigma_-)

couples only the pairs {|n, up>, |n+1, down>}, so the propagator factorizes
into 2x2 blocks parameterized by per-sector correlation factors

    lam_n   = sqrt((dw/2)² + g²(n+1)),        dw = omega - omega0
    v_n(t)  = cos(lam_n t) + i (dw/2)/lam_n · sin(lam_n t)
    w_n(t)  = g sqrt(n+1)/lam_n · sin(lam_n t)

with |v_n|² + w_n² = 1 identically.  The boundary sector n = -1 (needed by
every formula that references v_{n-1} or w_{n-1} at n = 0) is the
g·sqrt(n+1) -> 0 limit of the same expressions: v_{-1}(t) = exp(i dw t / 2),
w_{-1} = 0.  It reproduces the exact |0, down> phase for either detuning
sign; the brute-force engine in :mod:`jcsubdyn.subdyn` is the arbiter for
this and every other convention here.

Phase convention: the sector-phase form of the propagator assembled by
:func:`bare_propagator` uses exponents omega·t·(n ± 1/2) relative to a field
term without the zero-point 1/2; multiplying by the global factor
exp(-i omega t / 2) (done in :func:`closed_propagator`) makes it equal to
exp(-i t H) for the Hamiltonian above.  See docs/conventions.md.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .hilbert import (
    DOWN,
    UP,
    CoherentState,
    FockSpace,
    annihilation,
    embed_atom,
    embed_photon,
    number_op,
    pauli_ops,
    poisson_weights,
    require_atom_density,
)
from .subdyn import (
    BipartiteHamiltonian,
    EffectiveOperator,
    KrausSet,
    apply_atom_kraus,
    apply_photon_kraus,
    assemble_hamiltonian,
)

__all__ = [
    "JcmParams",
    "CorrelationFactors",
    "correlation_factors",
    "correlation_tables",
    "hamiltonian_parts",
    "hamiltonian",
    "constant_of_motion",
    "bare_propagator",
    "closed_propagator",
    "closed_kraus",
    "closed_marginal",
    "PhotonDressing",
    "photon_dressing",
    "quasi_annihilation",
    "quasi_number",
    "SpinDressing",
    "spin_plus_series",
    "spin_z_series",
    "quasi_sigma_plus",
    "quasi_sigma_minus",
    "quasi_sigma_z",
]

#: Relative size of the last retained series term above which truncation is flagged.
SERIES_TAIL_RTOL = 1e-12


@dataclass(frozen=True)
class JcmParams:
    """Model parameters; energies in units with hbar = 1.

    The detuning omega - omega0 is always derived, never stored.
    """

    omega: float
    omega0: float
    g: float
    n_max: int

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def detuning(self) -> float:
        return self.omega - self.omega0

    @property
    def half_detuning(self) -> float:
        return 0.5 * (self.omega - self.omega0)

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.n_max)

    def sector_rate(self, n: int) -> float:
        """lam_n, the generalized exchange rate of sector n (n >= -1)."""
        return math.hypot(self.half_detuning, self.g * math.sqrt(n + 1.0))


@dataclass(frozen=True)
class CorrelationFactors:
    """Per-sector correlation factors at one time."""

    n: int
    lam: float
    theta: float
    v: complex
    w: float


def correlation_factors(n: int, t: float, params: JcmParams) -> CorrelationFactors:
    """Sector factors (lam_n, theta_n, v_n(t), w_n(t)); n >= -1 allowed."""
    if n < -1:
        raise ValueError(f"sector index must be >= -1, got {n}")
    d = params.half_detuning
    kappa = params.g * math.sqrt(n + 1.0)
    lam = math.hypot(d, kappa)
    if kappa > 0.0:
        theta = math.atan2(kappa, d + lam)
    else:
        # kappa = 0: eigenvector-continuity branch of tan(theta) = kappa/(d+lam)
        theta = 0.0 if d >= 0.0 else 0.5 * math.pi
    if lam > 0.0:
        s = math.sin(lam * t)
        v = complex(math.cos(lam * t), (d / lam) * s)
        w = (kappa / lam) * s
    else:
        v, w = 1.0 + 0.0j, 0.0
    return CorrelationFactors(n, lam, theta, v, w)


def correlation_tables(ts: np.ndarray, params: JcmParams):
    """(v, w) tables over the grid; column j holds sector n = j - 1."""
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    return _kernels.corr_tables(ts, params.half_detuning, params.g, params.n_max + 2)


def _corr_row(t: float, params: JcmParams):
    v, w = correlation_tables(np.array([t]), params)
    return v[0], w[0]


# --- Hamiltonian pieces ------------------------------------------------------

def hamiltonian_parts(params: JcmParams):
    """(photon, atom, coupling) pieces; the first two on their own spaces."""
    space = params.space
    a = annihilation(space)
    adag = a.conj().T
    pauli = pauli_ops()
    h_photon = params.omega * (adag @ a + 0.5 * np.eye(space.dim))
    h_atom = 0.5 * params.omega0 * pauli.z
    h_coupling = params.g * (np.kron(a, pauli.plus) + np.kron(adag, pauli.minus))
    return h_photon, h_atom, h_coupling


def hamiltonian(params: JcmParams) -> BipartiteHamiltonian:
    h_photon, h_atom, h_coupling = hamiltonian_parts(params)
    return assemble_hamiltonian(h_photon, h_atom, h_coupling, params.space)


def constant_of_motion(params: JcmParams) -> np.ndarray:
    """N ⊗ I + (1/2) I ⊗ sigma_z, which commutes with the full Hamiltonian."""
    space = params.space
    return embed_photon(number_op(space)) + 0.5 * embed_atom(pauli_ops().z, space)


# --- propagator --------------------------------------------------------------

def bare_propagator(t: float, params: JcmParams) -> np.ndarray:
    """Sector-phase propagator with exponents omega t (n ± 1/2), verbatim.

    Lacks the global zero-point factor exp(-i omega t / 2) relative to
    exp(-itH); its dangling |n_max, up> column carries |v_{n_max}| < 1 and is
    sub-unitary.  Kept for the phase-reconciliation regression test; use
    :func:`closed_propagator` for everything else.
    """
    n_max = params.n_max
    v, w = _corr_row(t, params)
    d = 2 * (n_max + 1)
    u = np.zeros((d, d), dtype=np.complex128)
    ms = np.arange(n_max + 1)
    down = 2 * ms + DOWN
    up = 2 * ms + UP
    u[down, down] = np.exp(-1j * params.omega * t * (ms - 0.5)) * np.conj(v[ms])
    u[up, up] = np.exp(-1j * params.omega * t * (ms + 0.5)) * v[ms + 1]
    ns = ms[:-1]
    cross = np.exp(-1j * params.omega * t * (ns + 0.5)) * (-1j) * w[ns + 1]
    u[2 * ns + 2 + DOWN, 2 * ns + UP] = cross
    u[2 * ns + UP, 2 * ns + 2 + DOWN] = cross
    return u


def _top_sector_phase(t: float, params: JcmParams) -> complex:
    # diagonal energy of the dangling |n_max, up> state under the truncated H
    e_top = params.omega * (params.n_max + 0.5) + 0.5 * params.omega0
    return cmath.exp(-1j * t * e_top)


def closed_propagator(t: float, params: JcmParams) -> np.ndarray:
    """exp(-i t H) on the truncated space, assembled from closed-form blocks.

    Equals the spectral exponential of the truncated Hamiltonian to roundoff
    everywhere, including the dangling |n_max, up> state, which evolves by
    its free truncated phase.  Exactly unitary.
    """
    u = cmath.exp(-0.5j * params.omega * t) * bare_propagator(t, params)
    top = 2 * params.n_max + UP
    u[top, top] = _top_sector_phase(t, params)
    return u


# --- closed-form Kraus families and marginals --------------------------------

def closed_kraus(side: str, coherent: CoherentState | None, t: float,
                 params: JcmParams) -> KrausSet:
    """Kraus family of the truncated closed-form propagator.

    Atom side: one 2x2 member per photon number, built from (v, w) and the
    coherent amplitudes.  Photon side: the four <s|U|s'> operators.  Matches
    :func:`jcsubdyn.subdyn.kraus_extract` applied to
    :func:`closed_propagator` to roundoff.
    """
    n_max = params.n_max
    v, w = _corr_row(t, params)
    ns = np.arange(n_max + 1)
    phi = np.exp(-1j * params.omega * t * (ns + 0.5)) * cmath.exp(-0.5j * params.omega * t)
    ephi = np.exp(-1j * params.omega * t * (ns - 0.5)) * cmath.exp(-0.5j * params.omega * t)
    if side == "atom":
        if coherent is None:
            raise ValueError("atom-side Kraus family needs the coherent state")
        if coherent.n_max != n_max:
            raise ValueError("coherent state truncation does not match params")
        amps = coherent.amplitudes
        members = np.zeros((n_max + 1, 2, 2), dtype=np.complex128)
        members[:, UP, UP] = amps * phi * v[ns + 1]
        members[n_max, UP, UP] = amps[n_max] * _top_sector_phase(t, params)
        members[:-1, UP, DOWN] = -1j * amps[1:] * phi[:-1] * w[ns[:-1] + 1]
        members[1:, DOWN, UP] = -1j * amps[:-1] * ephi[1:] * w[ns[1:]]
        members[:, DOWN, DOWN] = amps * ephi * np.conj(v[ns])
        gram = np.einsum("nsp,nsq->pq", members.conj(), members)
        residual = float(np.max(np.abs(gram - np.eye(2))))
        return KrausSet("atom", members, residual)
    if side == "photon":
        members = np.zeros((2, 2, n_max + 1, n_max + 1), dtype=np.complex128)
        diag_up = phi * v[ns + 1]
        diag_up[n_max] = _top_sector_phase(t, params)
        members[UP, UP] = np.diag(diag_up)
        members[DOWN, DOWN] = np.diag(ephi * np.conj(v[ns]))
        cross = -1j * phi[:-1] * w[ns[:-1] + 1]
        vd_up = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
        vd_up[ns[:-1] + 1, ns[:-1]] = cross
        members[DOWN, UP] = vd_up
        members[UP, DOWN] = vd_up.T.copy()
        eye = np.eye(n_max + 1)
        residual = 0.0
        for s2 in (UP, DOWN):
            gram = sum(members[s, s2].conj().T @ members[s, s2] for s in (UP, DOWN))
            residual = max(residual, float(np.max(np.abs(gram - eye))))
        return KrausSet("photon", members, residual)
    raise ValueError(f"side must be 'atom' or 'photon', got {side!r}")


def closed_marginal(side: str, atom_init: np.ndarray, coherent: CoherentState,
                    t: float, params: JcmParams) -> np.ndarray:
    """Reduced density matrix at time t from the closed-form Kraus family."""
    atom_init = require_atom_density(atom_init)
    if side == "atom":
        return apply_atom_kraus(closed_kraus("atom", coherent, t, params), atom_init)
    if side == "photon":
        return apply_photon_kraus(closed_kraus("photon", None, t, params),
                                  coherent.density(), atom_init)
    raise ValueError(f"side must be 'atom' or 'photon', got {side!r}")


# --- dressed photon operators -------------------------------------------------

@dataclass(frozen=True)
class PhotonDressing:
    """Sector coefficients of the quasi-annihilation operator.

    ``a1`` dresses single-quantum annihilation |n><n+1|, ``c2`` the
    two-quantum channel |n-1><n+1|, ``d0`` the quantum-conserving diagonal
    |n><n|.  Pristine values are a1 = 1, c2 = d0 = 0.
    """

    n: int
    t: float
    a1: complex
    c2: complex
    d0: complex


def _dressing_coefficients(v: np.ndarray, w: np.ndarray, ns: np.ndarray,
                           atom_init: np.ndarray):
    """(A, C, D) arrays for the integer sectors in ns; v/w columns are offset by one."""
    rho_uu = atom_init[UP, UP].real
    rho_dd = atom_init[DOWN, DOWN].real
    rho_ud = atom_init[UP, DOWN]
    rho_du = atom_init[DOWN, UP]
    nf = ns.astype(np.float64)
    vn = v[ns + 1]
    vp = v[ns + 2]
    vm = v[ns]
    wn = w[ns + 1]
    wp = w[ns + 2]
    wm = w[ns]
    a = (rho_uu * (np.conj(vn) * vp + wn * wp * np.sqrt((nf + 2.0) / (nf + 1.0)))
         + rho_dd * (np.conj(vn) * vm + wn * wm * np.sqrt(nf / (nf + 1.0))))
    c = 1j * rho_du * (wm * np.conj(vn) * np.sqrt(nf + 1.0) - wn * np.conj(vm) * np.sqrt(nf))
    d = 1j * rho_ud * (wm * vn * np.sqrt(nf) - wn * vm * np.sqrt(nf + 1.0))
    return a, c, d


def photon_dressing(n: int, t: float, atom_init: np.ndarray, params: JcmParams) -> PhotonDressing:
    """Dressing coefficients of sector n (n >= 0) at time t."""
    if n < 0:
        raise ValueError(f"sector index must be >= 0, got {n}")
    atom_init = require_atom_density(atom_init)
    fm = correlation_factors(n - 1, t, params)
    fn = correlation_factors(n, t, params)
    fp = correlation_factors(n + 1, t, params)
    rho_uu = atom_init[UP, UP].real
    rho_dd = atom_init[DOWN, DOWN].real
    a = (rho_uu * (np.conj(fn.v) * fp.v + fn.w * fp.w * math.sqrt((n + 2.0) / (n + 1.0)))
         + rho_dd * (np.conj(fn.v) * fm.v + fn.w * fm.w * math.sqrt(n / (n + 1.0))))
    c = 1j * atom_init[DOWN, UP] * (fm.w * np.conj(fn.v) * math.sqrt(n + 1.0)
                                    - fn.w * np.conj(fm.v) * math.sqrt(float(n)))
    d = 1j * atom_init[UP, DOWN] * (fm.w * fn.v * math.sqrt(float(n))
                                    - fn.w * fm.v * math.sqrt(n + 1.0))
    return PhotonDressing(n, t, complex(a), complex(c), complex(d))


def quasi_annihilation(t: float, atom_init: np.ndarray, params: JcmParams) -> EffectiveOperator:
    """Heisenberg-picture annihilation operator of the photon sub-dynamics.

    exp(-i omega t) [ sqrt(n+1) A_n |n><n+1| + C_n |n-1><n+1| + D_n |n><n| ]
    on the truncated window; entries touching photon level n_max reflect the
    exact (untruncated) coefficients.
    """
    atom_init = require_atom_density(atom_init)
    n_max = params.n_max
    v, w = _corr_row(t, params)
    rot = cmath.exp(-1j * params.omega * t)
    m = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)

    ns = np.arange(n_max)  # single-quantum band, n = 0..n_max-1
    a, _, _ = _dressing_coefficients(v, w, ns, atom_init)
    m[ns, ns + 1] = rot * np.sqrt(ns + 1.0) * a

    if n_max >= 2:
        nc = np.arange(1, n_max)  # two-quantum band
        _, c, _ = _dressing_coefficients(v, w, nc, atom_init)
        m[nc - 1, nc + 1] += rot * c

    nd = np.arange(n_max + 1, dtype=np.float64)
    rho_ud = atom_init[UP, DOWN]
    dcoef = 1j * rho_ud * (w[:-1] * v[1:] * np.sqrt(nd) - w[1:] * v[:-1] * np.sqrt(nd + 1.0))
    m[nd.astype(int), nd.astype(int)] += rot * dcoef
    return EffectiveOperator("photon", t, m, atom_init)


def quasi_number(t: float, atom_init: np.ndarray, params: JcmParams) -> EffectiveOperator:
    """Heisenberg-picture number operator of the photon sub-dynamics.

    Diagonal n + rho_uu w_n² - rho_dd w_{n-1}² plus the single off-diagonal
    coherence band; Hermitian whenever the atom start is.
    """
    atom_init = require_atom_density(atom_init)
    n_max = params.n_max
    v, w = _corr_row(t, params)
    rho_uu = atom_init[UP, UP].real
    rho_dd = atom_init[DOWN, DOWN].real
    rho_ud = atom_init[UP, DOWN]
    rho_du = atom_init[DOWN, UP]
    ns = np.arange(n_max + 1)
    m = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
    m[ns, ns] = ns + rho_uu * w[ns + 1] ** 2 - rho_dd * w[ns] ** 2
    nb = ns[:-1]
    m[nb + 1, nb] = -1j * rho_ud * w[nb + 1] * v[nb + 1]
    m[nb, nb + 1] = 1j * rho_du * w[nb + 1] * np.conj(v[nb + 1])
    return EffectiveOperator("photon", t, m, atom_init)


# --- dressed spin operators ----------------------------------------------------

@dataclass(frozen=True)
class SpinDressing:
    """The four series coefficients of a dressed spin component.

    ``tail_ok`` is False when the last retained term of any series exceeds
    1e-12 of its partial sum, i.e. the truncation is suspect.
    """

    kind: str
    t: float
    s1: complex
    s2: complex
    s3: complex
    s4: complex
    tail_ok: bool = True


def _tail_ok(partials: list[tuple[complex, complex]]) -> bool:
    for total, last in partials:
        if abs(last) > SERIES_TAIL_RTOL * max(abs(total), 1.0):
            return False
    return True


def spin_plus_series(t: float, coherent: CoherentState, params: JcmParams) -> SpinDressing:
    """Series coefficients of the dressed raising operator.

    Each term carries the Poisson weight p(n) of the coherent start (the
    amplitude products <alpha|..|alpha> reduce to p(n) times ratio factors);
    both correlation factors in the s1 product are conjugated; the free
    limit g = 0 must give the bare Heisenberg phase e^{i omega0 t}, and the
    brute-force engine confirms.  Requires alpha != 0 (s2..s4 divide by it).
    """
    if coherent.magnitude == 0.0:
        raise ValueError("spin series are undefined at alpha = 0; use the "
                         "brute-force effective operator instead")
    if coherent.n_max != params.n_max:
        raise ValueError("coherent state truncation does not match params")
    v, w = _corr_row(t, params)
    p = coherent.weights()
    alpha = coherent.alpha
    ns = np.arange(params.n_max + 1, dtype=np.float64)
    vn = v[1:]
    vm = v[:-1]
    wn = w[1:]
    wm = w[:-1]
    t1 = p * np.conj(vn) * np.conj(vm)
    t2 = p * wn * wm * (np.conj(alpha) / alpha) * np.sqrt(ns / (ns + 1.0))
    t3 = -1j * p * np.conj(vn) * wm * np.sqrt(ns) / alpha
    t4 = 1j * p * np.conj(vm) * wn * np.conj(alpha) / np.sqrt(ns + 1.0)
    sums = [complex(x.sum()) for x in (t1, t2, t3, t4)]
    ok = _tail_ok([(s, complex(x[-1])) for s, x in zip(sums, (t1, t2, t3, t4))])
    return SpinDressing("plus", t, *sums, tail_ok=ok)


def spin_z_series(t: float, coherent: CoherentState, params: JcmParams) -> SpinDressing:
    """Series coefficients of the dressed inversion operator (s4 = conj(s3))."""
    if coherent.n_max != params.n_max:
        raise ValueError("coherent state truncation does not match params")
    v, w = _corr_row(t, params)
    p = coherent.weights()
    p_next = poisson_weights(coherent.mean_photons, params.n_max + 1)[1:]
    alpha = coherent.alpha
    ns = np.arange(params.n_max + 1, dtype=np.float64)
    wn = w[1:]
    vn = v[1:]
    t1 = p * wn ** 2
    t2 = p_next * wn ** 2
    t3 = -2j * p * wn * np.conj(vn) * alpha / np.sqrt(ns + 1.0)
    s1 = 1.0 - 2.0 * float(t1.sum())
    s2 = -(1.0 - 2.0 * float(t2.sum()))
    s3 = complex(t3.sum())
    ok = _tail_ok([(s1, complex(2 * t1[-1])), (s2, complex(2 * t2[-1])), (s3, complex(t3[-1]))])
    return SpinDressing("z", t, s1, s2, s3, np.conj(s3), tail_ok=ok)


def quasi_sigma_plus(t: float, coherent: CoherentState, params: JcmParams) -> EffectiveOperator:
    """Heisenberg-picture raising operator of the atom sub-dynamics."""
    s = spin_plus_series(t, coherent, params)
    rot = cmath.exp(1j * params.omega * t)
    m = rot * np.array([[s.s3, s.s1], [s.s2, s.s4]], dtype=np.complex128)
    return EffectiveOperator("atom", t, m, coherent.density())


def quasi_sigma_minus(t: float, coherent: CoherentState, params: JcmParams) -> EffectiveOperator:
    """Adjoint of the dressed raising operator."""
    plus = quasi_sigma_plus(t, coherent, params)
    return EffectiveOperator("atom", t, plus.matrix.conj().T, plus.weighting_state)


def quasi_sigma_z(t: float, coherent: CoherentState, params: JcmParams) -> EffectiveOperator:
    """Heisenberg-picture inversion operator of the atom sub-dynamics; Hermitian."""
    s = spin_z_series(t, coherent, params)
    m = np.array([[s.s1, s.s3], [np.conj(s.s3), s.s2]], dtype=np.complex128)
    return EffectiveOperator("atom", t, m, coherent.density())
