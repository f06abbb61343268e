"""Stochastic readout simulation and phase-estimate ensembles.

The per-shot phase estimates {phi_ij} produced here all live in the same
differential phase convention as ``phase_exact`` (phi(t) ~ -2 gamma_e
b(t) t_s), so SQL and HQL ensembles can be reconstructed and decomposed
against the same truth.  The default Gaussian noise level is calibrated
so a single-resource estimate has a standard deviation of
``sigma_ref`` = 0.0555 rad at the reference repetition count, matching
the fitted statistical-error constants; the Poisson mode is the
bottom-up photon-statistics alternative.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DecoheredSignalError
from .sensor import (
    Protocol,
    ProtocolConfig,
    SensorParams,
    envelope_pdd,
    envelope_ramsey,
    phase_exact,
    signal,
)
from .waveform import SampleGrid, WaveformSpec, integrate, make_grid

__all__ = [
    "ReadoutModel",
    "PhaseEstimate",
    "PhaseEnsemble",
    "photon_shot_noise",
    "simulate_readout",
    "estimate_phase",
    "acquire_ensemble_sql",
    "acquire_ensemble_hql",
    "write_ensemble_csv",
    "read_ensemble_csv",
]

ENVELOPE_FLOOR = 1e-6

# repetition count the sigma_ref calibration is anchored to
SHOTS_REF = 2_000_000


def _default_photons_per_shot() -> float:
    # chosen so that C * sqrt(shots_R * photons) = snr_ref at the defaults
    p = SensorParams()
    return (p.snr_ref / p.contrast_C) ** 2 / SHOTS_REF


@dataclass(frozen=True)
class ReadoutModel:
    """Readout noise model for one signal point.

    noise_mode is one of "gaussian" (fitted calibration, the default),
    "poisson" (photon statistics) or "none" (noiseless).  sigma_ref is
    the per-quadrature signal noise at shots_R = 2e6 in gaussian mode,
    scaled as 1/sqrt(shots_R) away from that reference.
    """

    shots_R: int = SHOTS_REF
    noise_mode: str = "gaussian"
    photons_per_shot_bright: float = field(default_factory=_default_photons_per_shot)
    seed: int = 0
    sigma_ref: float = 0.0555

    def __post_init__(self):
        if self.shots_R < 1:
            raise ValueError(f"shots_R must be >= 1, got {self.shots_R}")
        if self.noise_mode not in ("gaussian", "poisson", "none"):
            raise ValueError(f"unknown noise_mode {self.noise_mode!r}")
        if not self.photons_per_shot_bright > 0:
            raise ValueError("photons_per_shot_bright must be positive")
        if not self.sigma_ref > 0:
            raise ValueError("sigma_ref must be positive")


@dataclass(frozen=True)
class PhaseEstimate:
    phi_hat: float
    std_err: float
    resources_n2: int

    def __post_init__(self):
        if not math.isfinite(self.phi_hat):
            raise ValueError("phi_hat must be finite")
        if self.std_err < 0:
            raise ValueError("std_err must be >= 0")
        if self.resources_n2 < 1:
            raise ValueError("resources_n2 must be >= 1")


@dataclass(frozen=True)
class PhaseEnsemble:
    """n1 x n_cols matrix of per-shot phase estimates on a sampling grid.

    For SQL ensembles n_cols == n2 (one column per resource).  For HQL
    ensembles each estimate already consumes n2 = 2k resources, so the
    columns index independent repetitions of the full k-pass measurement
    and ``collapsed`` is set.
    """

    n1: int
    n2: int
    estimates: np.ndarray = field(repr=False)
    grid: SampleGrid
    t_s: float
    protocol: str
    collapsed: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=float)
        object.__setattr__(self, "estimates", est)
        if est.shape[0] != self.n1 or est.ndim != 2:
            raise ValueError(f"estimates must be (n1, n_cols), got {est.shape}")
        if not self.collapsed and est.shape[1] != self.n2:
            raise ValueError("non-collapsed ensemble must have n2 columns")
        if not np.all(np.isfinite(est)):
            raise ValueError("all phase estimates must be finite")

    @property
    def resources_total(self) -> int:
        """Total resources consumed: n1 * n2 per repetition batch."""
        batches = self.estimates.shape[1] if self.collapsed else 1
        return self.n1 * self.n2 * batches


def photon_shot_noise(m: ReadoutModel, p: SensorParams, shots: int = 1) -> float:
    """Photon shot noise of one readout, normalized to the bright level."""
    mean_photons = shots * m.photons_per_shot_bright
    return math.sqrt((1.0 - p.contrast_C / 2.0) / mean_photons)


def _gaussian_sigma(m: ReadoutModel, shots: int | None = None) -> float:
    shots = m.shots_R if shots is None else shots
    return m.sigma_ref * math.sqrt(SHOTS_REF / shots)


def _poisson_sigma(m: ReadoutModel, p: SensorParams, shots: int | None = None) -> float:
    shots = m.shots_R if shots is None else shots
    c = p.contrast_C
    return math.sqrt(4.0 * (1.0 - c / 2.0) / (c**2 * m.photons_per_shot_bright * shots))


def quadrature_noise_std(m: ReadoutModel, p: SensorParams) -> float:
    """Per-quadrature standard deviation of a simulated readout."""
    if m.noise_mode == "none":
        return 0.0
    if m.noise_mode == "gaussian":
        return _gaussian_sigma(m)
    return _poisson_sigma(m, p)


def _noisy_signal(s_true: np.ndarray, m: ReadoutModel, p: SensorParams,
                  rng: np.random.Generator, sigma_scale: float = 1.0) -> np.ndarray:
    """Vectorized noisy readout of signal values in [-1, 1]."""
    s_true = np.asarray(s_true, dtype=float)
    if m.noise_mode == "none":
        return s_true.copy()
    if m.noise_mode == "gaussian":
        sigma = sigma_scale * _gaussian_sigma(m)
        return s_true + sigma * rng.standard_normal(s_true.shape)
    # Poisson photon counting: bright-state probability (1 + s)/2,
    # fluorescence mean n_b (1 - C (1 - p_bright)) per shot
    c = p.contrast_C
    n_b = m.photons_per_shot_bright
    mu = m.shots_R * n_b * (1.0 - c / 2.0 + (c / 2.0) * s_true)
    counts = rng.poisson(mu)
    return (counts / m.shots_R - n_b * (1.0 - c / 2.0)) * 2.0 / (c * n_b)


def simulate_readout(s_true: float, m: ReadoutModel, p: SensorParams,
                     rng: np.random.Generator | None = None) -> float:
    """One noisy readout of a signal value; unbiased, Var ~ 1/shots_R."""
    if abs(s_true) > 1.0:
        raise ValueError(f"|s_true| must be <= 1, got {s_true}")
    if rng is None:
        rng = np.random.default_rng(m.seed)
    return float(_noisy_signal(np.asarray(s_true), m, p, rng))


def _wrap_estimate(x_hat, y_hat, kind: Protocol):
    """atan2-based total-phase estimate, branch nearest to zero."""
    if kind is Protocol.TDQD:
        # X carries sin, Y carries cos
        return np.arctan2(x_hat, y_hat)
    return np.arctan2(y_hat, x_hat)


def estimate_phase(w: WaveformSpec, p: SensorParams, c: ProtocolConfig,
                   m: ReadoutModel, rng: np.random.Generator | None = None) -> PhaseEstimate:
    """Simulate both quadratures and invert them to a per-sample phase.

    Dynamic range: the total accumulated phase must stay within one
    atan2 branch (|Phi| < pi); beyond it the estimate wraps and biases.
    """
    if rng is None:
        rng = np.random.default_rng(m.seed)
    from .sensor import _protocol_envelope
    env = _protocol_envelope(p, c)
    if env < ENVELOPE_FLOOR:
        raise DecoheredSignalError(
            f"envelope {env:.3g} below {ENVELOPE_FLOOR:g}: signal fully decohered"
        )
    x = signal(w, p, c, "X")
    y = signal(w, p, c, "Y")
    # the Gaussian calibration is anchored to per-resource noise in the
    # differential phase convention; a single-pass Ramsey estimate gets
    # doubled downstream, so inject half the quadrature noise here
    scale = 0.5 if (c.kind is Protocol.RAMSEY_SQL and m.noise_mode == "gaussian") else 1.0
    x_hat, y_hat = _noisy_signal(np.array([x, y]), m, p, rng, sigma_scale=scale)
    big_phi = float(_wrap_estimate(x_hat, y_hat, c.kind))
    sigma = scale * quadrature_noise_std(m, p)
    if c.kind is Protocol.RAMSEY_SQL:
        return PhaseEstimate(phi_hat=big_phi, std_err=sigma / env, resources_n2=1)
    return PhaseEstimate(phi_hat=big_phi / (2 * c.k),
                         std_err=sigma / (env * 2 * c.k),
                         resources_n2=2 * c.k)


def _ensemble_rng(seed: int) -> np.random.Generator:
    # counter-based bit generator: the (i, j, quadrature) cells map onto
    # consecutive counter values, so output is scheduling-independent
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _centered_window_phases(w: WaveformSpec, p: SensorParams, grid: SampleGrid,
                            t_s: float) -> np.ndarray:
    """Exact differential phase with the sampling window centered on each t_i."""
    return np.array([
        -2.0 * p.gamma_e * integrate(w, t_i - t_s / 2.0, t_i + t_s / 2.0)
        for t_i in grid.instants
    ])


def acquire_ensemble_sql(w: WaveformSpec, p: SensorParams, m: ReadoutModel,
                         n1: int, n2: int, t_s: float) -> PhaseEnsemble:
    """n2 independent single-pass Ramsey estimates at each of n1 instants.

    Entries are stored in the differential phase convention (twice the
    raw Ramsey phase).  Per-entry variance is independent of n2; the
    column means average down as 1/n2.
    """
    T = w.period_T
    if n1 * (t_s + 2 * p.t_pi) > T:
        raise ValueError("n1 * (t_s + 2 t_pi) exceeds the waveform period")
    if n2 < 1:
        raise ValueError(f"n2 must be >= 1, got {n2}")
    grid = make_grid(T, n1)
    phi1 = 0.5 * _centered_window_phases(w, p, grid, t_s)  # single-pass Ramsey phase
    env = envelope_ramsey(p, t_s)
    x = env * np.cos(phi1)[:, None] * np.ones((1, n2))
    y = env * np.sin(phi1)[:, None] * np.ones((1, n2))
    rng = _ensemble_rng(m.seed)
    scale = 0.5 if m.noise_mode == "gaussian" else 1.0
    noisy = _noisy_signal(np.stack([x, y], axis=-1), m, p, rng, sigma_scale=scale)
    estimates = 2.0 * np.arctan2(noisy[..., 1], noisy[..., 0])
    meta = {"seed": m.seed, "protocol": "ramsey-sql", "t_s": t_s,
            "noise_mode": m.noise_mode, "shots_R": m.shots_R}
    return PhaseEnsemble(n1=n1, n2=n2, estimates=estimates, grid=grid,
                         t_s=t_s, protocol="ramsey-sql", collapsed=False, meta=meta)


def acquire_ensemble_hql(w: WaveformSpec, p: SensorParams, m: ReadoutModel,
                         n1: int, n2: int, t_s: float,
                         n_batches: int = 1) -> PhaseEnsemble:
    """One k-pass decoupled estimate (k = n2/2) per instant and batch.

    Each stored estimate consumes n2 = 2k resources; per-estimate noise
    scales as 1/n2 before decoherence.  Columns are independent
    repetitions of the full measurement, flagged via ``collapsed``.
    """
    if n2 < 2 or n2 % 2 != 0:
        raise ValueError(f"n2 must be an even integer >= 2, got {n2}")
    if n_batches < 1:
        raise ValueError(f"n_batches must be >= 1, got {n_batches}")
    T = w.period_T
    k = n2 // 2
    grid = make_grid(T, n1)
    env = envelope_pdd(p, k, t_s, T)
    if env < ENVELOPE_FLOOR:
        raise DecoheredSignalError(
            f"pdd envelope {env:.3g} below {ENVELOPE_FLOOR:g} at k={k}"
        )
    phi = _centered_window_phases(w, p, grid, t_s)
    big_phi = 2 * k * phi
    x = env * np.cos(big_phi)[:, None] * np.ones((1, n_batches))
    y = env * np.sin(big_phi)[:, None] * np.ones((1, n_batches))
    rng = _ensemble_rng(m.seed)
    noisy = _noisy_signal(np.stack([x, y], axis=-1), m, p, rng)
    estimates = np.arctan2(noisy[..., 1], noisy[..., 0]) / (2 * k)
    meta = {"seed": m.seed, "protocol": "pdd-tdqd", "t_s": t_s, "k": k,
            "n_batches": n_batches, "noise_mode": m.noise_mode, "shots_R": m.shots_R}
    return PhaseEnsemble(n1=n1, n2=n2, estimates=estimates, grid=grid,
                         t_s=t_s, protocol="pdd-tdqd", collapsed=True, meta=meta)


def acquire_single_instant_hql(w: WaveformSpec, p: SensorParams, m: ReadoutModel,
                               k: int, t_i: float, t_s: float,
                               n_batches: int = 1) -> PhaseEnsemble:
    """k-pass decoupled estimates at one chosen instant (one-bin grid)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    T = w.period_T
    env = envelope_pdd(p, k, t_s, T)
    if env < ENVELOPE_FLOOR:
        raise DecoheredSignalError(f"pdd envelope {env:.3g} below {ENVELOPE_FLOOR:g}")
    phi = -2.0 * p.gamma_e * integrate(w, t_i - t_s / 2.0, t_i + t_s / 2.0)
    big_phi = 2 * k * phi
    rng = _ensemble_rng(m.seed)
    x = env * np.cos(big_phi) * np.ones((1, n_batches))
    y = env * np.sin(big_phi) * np.ones((1, n_batches))
    noisy = _noisy_signal(np.stack([x, y], axis=-1), m, p, rng)
    estimates = np.arctan2(noisy[..., 1], noisy[..., 0]) / (2 * k)
    meta = {"seed": m.seed, "protocol": "pdd-tdqd", "t_s": t_s, "k": k,
            "t_i": t_i, "n_batches": n_batches, "noise_mode": m.noise_mode,
            "shots_R": m.shots_R}
    return PhaseEnsemble(n1=1, n2=2 * k, estimates=estimates, grid=make_grid(T, 1),
                         t_s=t_s, protocol="pdd-tdqd", collapsed=True, meta=meta)


def write_ensemble_csv(e: PhaseEnsemble, path, deterministic: bool = False) -> None:
    """Write the ensemble as CSV plus a JSON metadata sidecar."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "t_i_seconds", "phi_ij_rad"])
        for i in range(e.n1):
            t_i = e.grid.instants[i]
            for j in range(e.estimates.shape[1]):
                writer.writerow([i + 1, j + 1, repr(t_i), repr(float(e.estimates[i, j]))])
    meta = dict(e.meta)
    meta.update({
        "n1": e.n1, "n2": e.n2, "t_s": e.t_s, "protocol": e.protocol,
        "collapsed": e.collapsed, "period_T": e.grid.period_T,
        "n_cols": int(e.estimates.shape[1]),
    })
    if not deterministic:
        import datetime
        meta["written_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_ensemble_csv(path) -> PhaseEnsemble:
    """Read an ensemble written by :func:`write_ensemble_csv`."""
    path = str(path)
    with open(path + ".meta.json") as fh:
        meta = json.load(fh)
    n1, n_cols = meta["n1"], meta["n_cols"]
    estimates = np.empty((n1, n_cols))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["i", "j", "t_i_seconds", "phi_ij_rad"]:
            raise ValueError(f"unexpected ensemble CSV header: {header}")
        for row in reader:
            i, j = int(row[0]) - 1, int(row[1]) - 1
            estimates[i, j] = float(row[3])
    grid = make_grid(meta["period_T"], n1)
    return PhaseEnsemble(n1=n1, n2=meta["n2"], estimates=estimates, grid=grid,
                         t_s=meta["t_s"], protocol=meta["protocol"],
                         collapsed=meta["collapsed"], meta=meta)


def with_seed(m: ReadoutModel, *entropy) -> ReadoutModel:
    """Derive a child readout model with a deterministic sub-seed."""
    ss = np.random.SeedSequence([int(m.seed)] + [int(x) for x in entropy])
    return replace(m, seed=int(ss.generate_state(1, np.uint64)[0]))
