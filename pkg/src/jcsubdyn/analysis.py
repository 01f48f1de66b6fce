"""Physics diagnostics on top of the closed forms.

Time-series evaluation over a gt grid, the dressed-inversion spectrum
(offset and dispersion), the conservation (back-action) audit, the
quasi-particle-likeness metrics, and collapse/revival feature extraction.

Grid convention: grid values are in units of g*t when g > 0; for a free run
(g = 0) they are interpreted as plain times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, hilbert, jcm, subdyn
from .numerics import max_abs

__all__ = [
    "Scenario",
    "TimeSeries",
    "DEFAULT_CHANNELS",
    "ORACLE_CHANNELS",
    "observable_series",
    "SigmaZSpectrum",
    "sigma_z_spectrum",
    "ConservationAudit",
    "conservation_audit",
    "QplMetrics",
    "qpl_dominance",
    "CollapseRevivalFeatures",
    "collapse_revival_features",
]

DEFAULT_CHANNELS = (
    "abs_quasi_a",
    "quasi_a_re",
    "quasi_a_im",
    "quasi_n",
    "sigma_z_mean",
    "sigma_z_offset",
    "sigma_z_dispersion",
    "sigma_z_upper",
    "sigma_z_lower",
    "conservation_residual",
    "qpl_ratio",
    "qpl_deviation",
)

#: Channels that also exist in brute-force form (prefixed ``oracle_``).
ORACLE_CHANNELS = (
    "abs_quasi_a",
    "quasi_n",
    "sigma_z_mean",
    "sigma_z_offset",
    "sigma_z_upper",
    "sigma_z_lower",
    "conservation_residual",
)


@dataclass(frozen=True)
class Scenario:
    """One fully specified run: model, initial states, grid and outputs."""

    params: jcm.JcmParams
    atom_init: np.ndarray = field(repr=False)
    magnitude: float = 0.0
    phase: float = 0.0
    grid: tuple[float, float, int] = (0.0, 50.0, 2000)
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    oracle: bool = False
    label: str = "scenario"

    def __post_init__(self):
        start, stop, steps = self.grid
        if steps < 2:
            raise ValueError(f"grid needs at least 2 steps, got {steps}")
        if not stop > start:
            raise ValueError(f"grid stop must exceed start, got [{start}, {stop}]")
        hilbert.require_atom_density(self.atom_init)
        unknown = set(self.channels) - set(DEFAULT_CHANNELS)
        if unknown:
            raise ValueError(f"unknown channels: {sorted(unknown)}")

    def gt_values(self) -> np.ndarray:
        start, stop, steps = self.grid
        return np.linspace(start, stop, steps)

    def times(self) -> np.ndarray:
        gts = self.gt_values()
        return gts / self.params.g if self.params.g > 0 else gts

    def coherent(self) -> hilbert.CoherentState:
        return hilbert.coherent_state(self.magnitude, self.phase, self.params.space)


@dataclass(frozen=True)
class TimeSeries:
    """Channel values on a gt grid, with scenario provenance attached."""

    scenario: Scenario
    gt: np.ndarray = field(repr=False)
    channels: dict = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def channel(self, name: str) -> np.ndarray:
        if name not in self.channels:
            raise KeyError(f"series has no channel {name!r}; have {sorted(self.channels)}")
        return self.channels[name]


def _closed_channels(scenario: Scenario):
    p = scenario.params
    coh = scenario.coherent()
    weights = coh.weights()
    weights_next = hilbert.poisson_weights(coh.mean_photons, p.n_max + 1)[1:]
    rho = scenario.atom_init
    ts = scenario.times()
    s1z, s2z, s3z, quasi_a, quasi_n, qpl_dev, qpl_cd, qpl_abs_a = _kernels.channel_sums(
        ts, p.n_max, p.half_detuning, p.g, p.omega, weights, weights_next,
        coh.alpha, rho[0, 0].real, rho[1, 1].real, complex(rho[0, 1]))
    sigma_mean = (rho[0, 0].real * s1z + rho[1, 1].real * s2z
                  + 2.0 * (rho[1, 0] * s3z).real)
    offset = 0.5 * (s1z + s2z)
    dispersion = np.hypot(0.5 * (s1z - s2z), np.abs(s3z))
    lhs = coh.mean_photons + 0.5 * (rho[0, 0].real - rho[1, 1].real)
    out = {
        "abs_quasi_a": np.abs(quasi_a),
        "quasi_a_re": quasi_a.real,
        "quasi_a_im": quasi_a.imag,
        "quasi_n": quasi_n,
        "sigma_z_mean": sigma_mean,
        "sigma_z_offset": offset,
        "sigma_z_dispersion": dispersion,
        "sigma_z_upper": offset + dispersion,
        "sigma_z_lower": offset - dispersion,
        "conservation_residual": np.abs(quasi_n + 0.5 * sigma_mean - lhs),
        "qpl_ratio": qpl_cd / np.maximum(qpl_abs_a, 1e-300),
        "qpl_deviation": qpl_dev,
    }
    return out, coh, lhs


def _oracle_channels(scenario: Scenario, coh: hilbert.CoherentState, lhs: float):
    """Brute-force versions of the closed-form channels, one propagator per point."""
    p = scenario.params
    space = p.space
    ham = jcm.hamiltonian(p)
    prop = subdyn.SpectralPropagator(ham.total)
    a_op = hilbert.annihilation(space)
    n_op = hilbert.number_op(space)
    sz = hilbert.pauli_ops().z
    rho_atom = scenario.atom_init
    rho_photon = coh.density()
    amps = coh.amplitudes
    ts = scenario.times()
    nt = len(ts)
    abs_a = np.empty(nt)
    quasi_n = np.empty(nt)
    mean_z = np.empty(nt)
    upper = np.empty(nt)
    lower = np.empty(nt)
    for i, t in enumerate(ts):
        u = prop(t)
        eff_a = subdyn.effective_operator(u, a_op, "photon", rho_atom, t)
        eff_n = subdyn.effective_operator(u, n_op, "photon", rho_atom, t)
        eff_z = subdyn.effective_operator(u, sz, "atom", rho_photon, t)
        abs_a[i] = abs(amps.conj() @ eff_a.matrix @ amps)
        quasi_n[i] = (amps.conj() @ eff_n.matrix @ amps).real
        mean_z[i] = np.trace(eff_z.matrix @ rho_atom).real
        evals = np.linalg.eigvalsh(eff_z.matrix)
        lower[i], upper[i] = float(evals[0]), float(evals[1])
    return {
        "oracle_abs_quasi_a": abs_a,
        "oracle_quasi_n": quasi_n,
        "oracle_sigma_z_mean": mean_z,
        "oracle_sigma_z_offset": 0.5 * (upper + lower),
        "oracle_sigma_z_upper": upper,
        "oracle_sigma_z_lower": lower,
        "oracle_conservation_residual": np.abs(quasi_n + 0.5 * mean_z - lhs),
    }


def observable_series(scenario: Scenario, tail_tol: float = hilbert.DEFAULT_TAIL_TOL) -> TimeSeries:
    """Evaluate the requested channels over the scenario's gt grid.

    Closed forms always; brute-force twins as ``oracle_*`` channels when the
    scenario asks for them.  Metadata records the coherent tail mass (and
    flags it when it violates ``tail_tol``), the kernel lane, and, with the
    oracle on, the worst closed-vs-oracle deviation per channel.
    """
    closed, coh, lhs = _closed_channels(scenario)
    channels = {name: closed[name] for name in scenario.channels}
    metadata = {
        "tail_mass": coh.tail_mass,
        "tail_ok": bool(coh.tail_mass < tail_tol),
        "kernel_lane": _kernels.active_lane(),
        "conservation_lhs": lhs,
        "conservation_residual_max": float(closed["conservation_residual"].max()),
    }
    if scenario.oracle:
        oracle = _oracle_channels(scenario, coh, lhs)
        channels.update({f"oracle_{n}": oracle[f"oracle_{n}"] for n in scenario.channels
                         if n in ORACLE_CHANNELS})
        deviations = {
            name: float(np.max(np.abs(closed[name] - oracle[f"oracle_{name}"])))
            for name in ORACLE_CHANNELS
        }
        metadata["oracle_deviation"] = deviations
        metadata["oracle_deviation_max"] = max(deviations.values())
    return TimeSeries(scenario, scenario.gt_values(), channels, metadata)


# --- dressed-inversion spectrum ------------------------------------------------

@dataclass(frozen=True)
class SigmaZSpectrum:
    """Offset/dispersion form of the dressed inversion's two eigenvalues."""

    t: float
    offset: float
    dispersion: float

    @property
    def upper(self) -> float:
        return self.offset + self.dispersion

    @property
    def lower(self) -> float:
        return self.offset - self.dispersion


def sigma_z_spectrum(eff: subdyn.EffectiveOperator, crosscheck_tol: float = 1e-10) -> SigmaZSpectrum:
    """Spectrum of a 2x2 dressed inversion operator.

    Uses the entrywise closed form offset = (m00 + m11)/2 and
    dispersion = sqrt(((m00 - m11)/2)² + |m01|²), cross-checked against the
    direct eigendecomposition.
    """
    m = eff.matrix
    if m.shape != (2, 2):
        raise ValueError(f"2x2 operator required, got {m.shape}")
    offset = 0.5 * (m[0, 0] + m[1, 1]).real
    dispersion = math.hypot(0.5 * (m[0, 0] - m[1, 1]).real, abs(m[0, 1]))
    evals = np.linalg.eigvalsh(m)
    defect = max(abs(offset - dispersion - evals[0]), abs(offset + dispersion - evals[1]))
    if defect > crosscheck_tol:
        raise subdyn.CrossCheckError(
            f"spectrum formulas disagree with eigendecomposition by {defect:.3e}")
    return SigmaZSpectrum(eff.t, float(offset), float(dispersion))


# --- conservation (back-action) audit -------------------------------------------

@dataclass(frozen=True)
class ConservationAudit:
    """Constancy of <N_eff(t)> + (1/2)<sigma_z_eff(t)> against its t=0 value."""

    lhs: float
    max_residual: float
    residuals: np.ndarray = field(repr=False)


def conservation_audit(series: TimeSeries, atom_init: np.ndarray,
                       mean_photons: float) -> ConservationAudit:
    """Audit the back-action identity over a series.

    Needs the ``quasi_n`` and ``sigma_z_mean`` channels; the initial states
    must match the ones the series was run with.
    """
    atom_init = hilbert.require_atom_density(atom_init)
    if max_abs(atom_init - series.scenario.atom_init) > 1e-12:
        raise ValueError("atom_init does not match the series scenario")
    if abs(mean_photons - series.scenario.magnitude ** 2) > 1e-12:
        raise ValueError("mean photon number does not match the series scenario")
    for name in ("quasi_n", "sigma_z_mean"):
        if name not in series.channels:
            raise ValueError(f"series lacks required channel {name!r}")
    lhs = mean_photons + 0.5 * (atom_init[0, 0].real - atom_init[1, 1].real)
    rhs = series.channel("quasi_n") + 0.5 * series.channel("sigma_z_mean")
    residuals = np.abs(rhs - lhs)
    return ConservationAudit(lhs, float(residuals.max()), residuals)


# --- quasi-particle-likeness metrics ----------------------------------------------

@dataclass(frozen=True)
class QplMetrics:
    """How far the dressed annihilation sits from its pristine form.

    ``ratio`` is the Poisson-weighted (|C|+|D|)/|A| mass ratio (0 when the
    dressing is carried by A alone), ``weighted_deviation`` the Poisson-
    weighted |A_n - 1|.  The raw per-sector channels are exposed so callers
    are not bound to either aggregation: ``deviation_per_n`` = |A_n - 1| and
    ``rabi_over_detuning`` = 2 g sqrt(n+1) / |detuning| (quasi-particle-like
    behaviour needs this << 1).
    """

    t: float
    ratio: float
    weighted_deviation: float
    deviation_per_n: np.ndarray = field(repr=False)
    rabi_over_detuning: np.ndarray = field(repr=False)


def qpl_dominance(t: float, atom_init: np.ndarray, params: jcm.JcmParams,
                  weights: np.ndarray) -> QplMetrics:
    """Aggregate dressing metrics at one time, weighted by ``weights`` (p(n))."""
    atom_init = hilbert.require_atom_density(atom_init)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (params.n_max + 1,):
        raise ValueError("weights must have one entry per retained photon number")
    v, w = jcm._corr_row(t, params)
    ns = np.arange(params.n_max)
    a, c, d = jcm._dressing_coefficients(v, w, ns, atom_init)
    dev = np.abs(a - 1.0)
    num = float(weights[:-1] @ (np.abs(c) + np.abs(d)))
    den = float(weights[:-1] @ np.abs(a))
    half_det = abs(params.half_detuning)
    with np.errstate(divide="ignore"):
        rabi = np.where(half_det > 0,
                        params.g * np.sqrt(ns + 1.0) / max(half_det, 1e-300),
                        np.inf)
    return QplMetrics(t, num / max(den, 1e-300), float(weights[:-1] @ dev), dev, rabi)


# --- collapse / revival features -----------------------------------------------------

@dataclass(frozen=True)
class CollapseRevivalFeatures:
    """Detected quiet windows and rephasing peaks of an oscillating channel."""

    window_gt: float
    threshold: float
    collapse_detected: bool
    collapse_start: float
    collapse_end: float
    collapse_mid: float
    plateau: float
    collapse_floor: float
    revival_onsets: tuple
    revival_peaks: tuple
    photon_quiet_time: float
    photon_peak_time: float


def _rolling(y: np.ndarray, half: int):
    """Centered rolling mean / std / max-deviation with edge clamping."""
    n = len(y)
    mean = np.empty(n)
    std = np.empty(n)
    dev = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        seg = y[lo:hi]
        m = seg.mean()
        mean[i] = m
        std[i] = seg.std()
        dev[i] = np.abs(seg - m).max()
    return mean, std, dev


def _runs(mask: np.ndarray):
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def collapse_revival_features(series: TimeSeries, sigma_channel: str = "sigma_z_upper",
                              photon_channel: str = "quasi_n",
                              quiet_fraction: float = 0.05,
                              revival_factor: float = 3.0) -> CollapseRevivalFeatures:
    """Detect collapse windows and revival peaks on a dressed-inversion channel.

    Collapse: the centered rolling standard deviation (window of one mean
    exchange period) stays below ``quiet_fraction`` of the initial
    oscillation amplitude.  Revival: the rectified rolling envelope exceeds
    ``revival_factor`` times the collapse floor after the quiet window, with
    an interior local maximum.  Photon-channel extremum times (quietest point
    inside the collapse window, strongest post-collapse deviation) are
    reported for the back-action alignment checks.
    """
    gt = series.gt
    y = series.channel(sigma_channel)
    if len(gt) < 16:
        raise ValueError("series too short for collapse/revival windowing")
    p = series.scenario.params
    mean_n = series.scenario.magnitude ** 2
    ratio = (p.half_detuning / p.g) if p.g > 0 else 0.0
    window_gt = math.pi / math.sqrt(ratio * ratio + mean_n + 1.0)
    dgt = gt[1] - gt[0]
    half = max(1, int(round(0.5 * window_gt / dgt)))
    if 2 * half + 1 >= len(gt):
        raise ValueError("series too short for the detection window")

    mean, std, dev = _rolling(y, half)
    first = y[: max(2 * (2 * half + 1), 8)]
    amp0 = 0.5 * (first.max() - first.min())
    threshold = quiet_fraction * amp0

    quiet = std < threshold
    runs = [r for r in _runs(quiet) if r[1] - r[0] + 1 >= 2 * half + 1]
    if not runs:
        nan = float("nan")
        return CollapseRevivalFeatures(window_gt, threshold, False, nan, nan, nan, nan,
                                       nan, (), (), nan, nan)
    i0, i1 = runs[0]
    plateau = float(y[i0:i1 + 1].mean())
    floor = float(np.median(dev[i0:i1 + 1]))

    onsets = []
    peaks = []
    post = dev > revival_factor * max(floor, 1e-300)
    post[: i1 + 1] = False
    for r0, r1 in _runs(post):
        onsets.append(float(gt[r0]))
        seg = dev[r0:r1 + 1]
        k = int(np.argmax(seg))
        # an envelope still rising at the end of the grid has no peak yet
        if r1 < len(gt) - 1 or (k < len(seg) - 1):
            peaks.append(float(gt[r0 + k]))

    z = series.channel(photon_channel)
    _, _, zdev = _rolling(z, half)
    quiet_k = i0 + int(np.argmin(zdev[i0:i1 + 1]))
    photon_quiet = float(gt[quiet_k])
    photon_peak = float("nan")
    if np.any(post):
        idx = np.flatnonzero(post)
        photon_peak = float(gt[idx[np.argmax(zdev[idx])]])

    return CollapseRevivalFeatures(window_gt, threshold, True, float(gt[i0]), float(gt[i1]),
                                   float(0.5 * (gt[i0] + gt[i1])), plateau, floor,
                                   tuple(onsets), tuple(peaks), photon_quiet, photon_peak)
