"""Per-episode metrics, CSV serialization, convergence detection and Welch's t-test."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sstats

METRICS_COLUMNS = (
    "episode",
    "mean_reward",
    "energy_j",
    "mean_power_w",
    "unsat_frac",
    "on_frac",
    "switch_count",
)


@dataclass(frozen=True)
class EpisodeMetrics:
    """Roll-up of one episode: reward, energy (sum of per-step W times dt), QoS."""

    episode: int
    mean_reward: float
    energy_j: float
    mean_power_w: float
    unsat_frac: float
    on_frac: float
    switch_count: int


def write_metrics_csv(path, rows: list[EpisodeMetrics]) -> None:
    """Plain CSV, floats via repr so identical runs serialize byte-identically."""
    lines = [",".join(METRICS_COLUMNS)]
    for r in rows:
        lines.append(
            f"{r.episode},{r.mean_reward!r},{r.energy_j!r},{r.mean_power_w!r},"
            f"{r.unsat_frac!r},{r.on_frac!r},{r.switch_count}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path) -> list[EpisodeMetrics]:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != ",".join(METRICS_COLUMNS):
        raise ValueError(f"{path}: not a metrics CSV (bad header)")
    rows = []
    for line in text[1:]:
        parts = line.split(",")
        if len(parts) != len(METRICS_COLUMNS):
            raise ValueError(f"{path}: malformed row {line!r}")
        rows.append(
            EpisodeMetrics(
                episode=int(parts[0]),
                mean_reward=float(parts[1]),
                energy_j=float(parts[2]),
                mean_power_w=float(parts[3]),
                unsat_frac=float(parts[4]),
                on_frac=float(parts[5]),
                switch_count=int(parts[6]),
            )
        )
    return rows


def moving_average(values, window: int) -> np.ndarray:
    """Sliding mean over consecutive windows; output length len(values) - window + 1."""
    x = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size < window:
        raise ValueError("series shorter than window")
    csum = np.concatenate(([0.0], np.cumsum(x)))
    return (csum[window:] - csum[:-window]) / window


def detect_convergence(rewards, window: int = 100, band_frac: float = 0.05) -> int | None:
    """First episode from which the reward moving average stays inside a plateau band.

    The plateau mean is the average of the final `window` episodes; the band is
    +/- band_frac * |plateau mean|. The in-band suffix must span at least `window`
    windows, so a series still drifting at the end (which trivially matches its own
    final window) is reported as not converged (None).
    """
    ma = moving_average(rewards, window)
    plateau = ma[-1]
    band = band_frac * abs(plateau)
    in_band = np.abs(ma - plateau) <= band + 1e-12
    # longest all-in-band suffix
    idx = np.flatnonzero(~in_band)
    first_ok = 0 if idx.size == 0 else int(idx[-1]) + 1
    if ma.size - first_ok >= window:
        return first_ok
    return None


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    dof: float
    p_value: float


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Two-sided Welch's t-test (unequal variances, Satterthwaite dof)."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 observations")
    return welch_t_test_from_stats(
        a.mean(), a.std(ddof=1), a.size, b.mean(), b.std(ddof=1), b.size
    )


def welch_t_test_from_stats(mean_a: float, std_a: float, n_a: int,
                            mean_b: float, std_b: float, n_b: int) -> WelchResult:
    """Welch's t-test from summary statistics (sample standard deviations)."""
    if n_a < 2 or n_b < 2:
        raise ValueError("each sample needs at least 2 observations")
    if std_a < 0 or std_b < 0:
        raise ValueError("standard deviations must be >= 0")
    va = std_a**2 / n_a
    vb = std_b**2 / n_b
    se2 = va + vb
    if se2 == 0.0:
        raise ValueError("degenerate samples: both variances are zero")
    t = (mean_a - mean_b) / np.sqrt(se2)
    dof = se2**2 / (va**2 / (n_a - 1) + vb**2 / (n_b - 1))
    p = 2.0 * float(sstats.t.sf(abs(t), dof))
    return WelchResult(t_stat=float(t), dof=float(dof), p_value=p)
