"""Zero-order-hold reconstruction and exact error decomposition.

All errors are in phase units (rad), with the truth phase
phi(t) = -2 gamma_e b(t) t_s, the same convention the ensembles use.
Window integrals use a fixed 64-point Gauss-Legendre rule per hold
window; the decomposition identity then holds to machine precision
because both routes share the same quadrature nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .measurement import PhaseEnsemble
from .sensor import SensorParams
from .waveform import SampleGrid, WaveformSpec, evaluate

__all__ = [
    "Reconstruction",
    "ErrorReport",
    "reconstruct",
    "decompose_error",
    "recon_error_sq",
    "deterministic_error_curve",
    "phase_truth",
    "phase_to_tesla",
]

_GL_POINTS = 64


@lru_cache(maxsize=1)
def _gl_nodes():
    return np.polynomial.legendre.leggauss(_GL_POINTS)


@dataclass(frozen=True)
class Reconstruction:
    """Piecewise-constant phase estimate phi_tilde(t) on the hold windows."""

    grid: SampleGrid
    phi_bar: np.ndarray = field(repr=False)

    def __post_init__(self):
        pb = np.asarray(self.phi_bar, dtype=float)
        object.__setattr__(self, "phi_bar", pb)
        if pb.shape != (self.grid.n1,):
            raise ValueError(f"phi_bar must have length n1={self.grid.n1}")

    def __call__(self, t):
        """phi_tilde(t); windows are half-open [t_i - w/2, t_i + w/2)."""
        t = np.asarray(t, dtype=float)
        idx = np.floor(t / self.grid.window_width).astype(int)
        idx = np.clip(idx, 0, self.grid.n1 - 1)
        out = self.phi_bar[idx]
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ErrorReport:
    """Total, statistical, and deterministic reconstruction error (rad^2)."""

    delta_sq: float
    delta_stat_sq: float
    delta_det_sq: float
    per_bin_stat: tuple[float, ...]
    per_bin_det: tuple[float, ...]
    delta_sq_direct: float  # brute-force double-sum cross-check

    def __post_init__(self):
        if self.delta_stat_sq < 0 or self.delta_det_sq < 0:
            raise ValueError("error components must be >= 0")

    def to_dict(self) -> dict:
        return {
            "delta_sq_rad2": self.delta_sq,
            "delta_stat_sq_rad2": self.delta_stat_sq,
            "delta_det_sq_rad2": self.delta_det_sq,
            "delta_rad": float(np.sqrt(self.delta_sq)),
            "delta_stat_rad": float(np.sqrt(self.delta_stat_sq)),
            "delta_det_rad": float(np.sqrt(self.delta_det_sq)),
            "delta_sq_direct_rad2": self.delta_sq_direct,
            "per_bin_stat_rad2": list(self.per_bin_stat),
            "per_bin_det_rad2": list(self.per_bin_det),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def reconstruct(e: PhaseEnsemble) -> Reconstruction:
    """Per-bin means phi_bar_i assembled into the ZOH estimator."""
    if e.estimates.size == 0:
        raise ValueError("ensemble is empty")
    return Reconstruction(grid=e.grid, phi_bar=e.estimates.mean(axis=1))


def phase_truth(w: WaveformSpec, p: SensorParams, t_s: float, t):
    """Phase-domain truth phi(t) = -2 gamma_e b(t) t_s."""
    return -2.0 * p.gamma_e * evaluate(w, t) * t_s


def phase_to_tesla(phi, p: SensorParams, t_s: float):
    """Convert phase-domain values (rad) back to field units (tesla)."""
    return np.asarray(phi) / (-2.0 * p.gamma_e * t_s)


def _window_nodes(grid: SampleGrid):
    """Quadrature nodes/weights on every hold window; weights include dt/T."""
    xs, ws = _gl_nodes()
    half = grid.window_width / 2.0
    centers = np.asarray(grid.instants)
    nodes = centers[:, None] + half * xs[None, :]          # (n1, 64)
    weights = (half * ws / grid.period_T)[None, :] * np.ones((grid.n1, 1))
    return nodes, weights


def _truth_on_windows(w: WaveformSpec, p: SensorParams, t_s: float, grid: SampleGrid):
    nodes, weights = _window_nodes(grid)
    return phase_truth(w, p, t_s, nodes), weights


def decompose_error(e: PhaseEnsemble, truth: WaveformSpec, p: SensorParams) -> ErrorReport:
    """Exact split of the total estimation error into statistical and
    deterministic parts, plus the direct double-sum total as cross-check.
    """
    if not np.isclose(truth.period_T, e.grid.period_T, rtol=1e-9):
        raise ValueError(
            f"truth period {truth.period_T:g} does not match ensemble grid "
            f"period {e.grid.period_T:g}"
        )
    est = e.estimates
    n_cols = est.shape[1]
    phi_bar = est.mean(axis=1)
    per_bin_stat = ((est - phi_bar[:, None]) ** 2).mean(axis=1)
    delta_stat_sq = float(per_bin_stat.mean())

    phi_true, weights = _truth_on_windows(truth, p, e.t_s, e.grid)
    per_bin_det = np.sum(weights * (phi_bar[:, None] - phi_true) ** 2, axis=1)
    delta_det_sq = float(per_bin_det.sum())

    # Eq-level cross-check: (1/n_cols) sum_j sum_i int (phi_ij - phi)^2 dt/T
    mean_sq = (est**2).mean(axis=1)
    integrand = mean_sq[:, None] - 2.0 * phi_bar[:, None] * phi_true + phi_true**2
    delta_sq_direct = float(np.sum(weights * integrand))

    return ErrorReport(
        delta_sq=delta_stat_sq + delta_det_sq,
        delta_stat_sq=delta_stat_sq,
        delta_det_sq=delta_det_sq,
        per_bin_stat=tuple(per_bin_stat),
        per_bin_det=tuple(per_bin_det),
        delta_sq_direct=delta_sq_direct,
    )


def recon_error_sq(rec: Reconstruction, truth: WaveformSpec, p: SensorParams,
                   t_s: float) -> float:
    """Reconstruction error (1/T) int (phi_tilde(t) - phi(t))^2 dt in rad^2.

    This is the error of the mean-based ZOH estimator, the quantity the
    overall SQL/HQL scaling experiments track.
    """
    phi_true, weights = _truth_on_windows(truth, p, t_s, rec.grid)
    return float(np.sum(weights * (rec.phi_bar[:, None] - phi_true) ** 2))


def deterministic_error_curve(truth: WaveformSpec, p: SensorParams, n1_list,
                              t_s: float, mode: str = "bin-center"):
    """delta_det vs n1 with noiseless converged bin values.

    mode "bin-center" uses phi(t_i) as the converged value (default);
    "window-mean" uses the window average of the truth.
    """
    if mode not in ("bin-center", "window-mean"):
        raise ValueError(f"unknown mode {mode!r}")
    from .waveform import make_grid
    out = []
    for n1 in n1_list:
        if n1 < 1:
            raise ValueError(f"n1 must be >= 1, got {n1}")
        grid = make_grid(truth.period_T, int(n1))
        phi_true, weights = _truth_on_windows(truth, p, t_s, grid)
        if mode == "bin-center":
            phi_bar = phase_truth(truth, p, t_s, np.asarray(grid.instants))
        else:
            # window mean under the same rule: int phi dt/T normalized per window
            phi_bar = np.sum(weights * phi_true, axis=1) / weights.sum(axis=1)
        det_sq = np.sum(weights * (phi_bar[:, None] - phi_true) ** 2)
        out.append((int(n1), float(np.sqrt(det_sq))))
    return out
