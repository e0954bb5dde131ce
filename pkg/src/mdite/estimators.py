"""Error analysis for correlated Monte Carlo series.

Binning plus jackknife, integrated autocorrelation times with the
self-consistent window, the Binder ratio with a properly propagated
error, and the convergence-with-depth scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np


class DegenerateDataError(ValueError):
    """A jackknife replicate hit an undefined ratio (e.g. <m^2> <= 0)."""


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    error: float
    method: str  # "binning" | "jackknife"
    tau_int: float = 0.5

    def agrees(self, other: "EstimateWithError", n_sigma: float = 2.0) -> bool:
        combined = np.hypot(self.error, other.error)
        if combined == 0.0:
            return self.mean == other.mean
        return abs(self.mean - other.mean) <= n_sigma * combined


def autocorrelation_time(series: np.ndarray, window_factor: float = 6.0) -> float:
    """Integrated autocorrelation time with the self-consistent window
    (sum rho(t) up to the first W >= window_factor * tau_int(W)).

    Constant series return 0.5 by convention; iid noise gives ~0.5.
    """
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 2 or np.all(x == x[0]):
        return 0.5
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var <= 0.0 or not np.isfinite(var):
        return 0.5
    # autocovariance via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    tau = 0.5
    for t in range(1, n):
        tau += rho[t]
        if t >= window_factor * tau:
            break
    return max(tau, 0.5)


def bin_means(series: np.ndarray, bin_size: int) -> np.ndarray:
    """Non-overlapping bin averages; a trailing partial bin is dropped."""
    if bin_size < 1:
        raise ValueError("bin size must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    n_bins = len(x) // bin_size
    if n_bins < 2:
        raise ValueError(f"need at least 2 full bins ({len(x)} samples, bin size {bin_size})")
    return x[: n_bins * bin_size].reshape(n_bins, bin_size).mean(axis=1)


def default_bin_size(series: np.ndarray) -> int:
    """max(64, 8 * tau_int), capped so at least 8 bins remain."""
    tau = autocorrelation_time(series)
    size = max(64, ceil(8 * tau))
    return max(1, min(size, len(series) // 8))


def binned_estimate(series: np.ndarray, bin_size: int | None = None) -> EstimateWithError:
    """Mean with binning error; bin size defaults to max(64, 8 * tau_int)."""
    x = np.asarray(series, dtype=np.float64)
    tau = autocorrelation_time(x)
    if bin_size is None:
        size = max(64, ceil(8 * tau))
        bin_size = max(1, min(size, len(x) // 8))
    bins = bin_means(x, bin_size)
    err = float(bins.std(ddof=1) / np.sqrt(len(bins)))
    return EstimateWithError(mean=float(x.mean()), error=err, method="binning", tau_int=tau)


@dataclass(frozen=True)
class BinSeries:
    """Non-overlapping bin means per observable channel."""

    bin_size: int
    n_samples: int
    channels: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        counts = {len(v) for v in self.channels.values()}
        if len(counts) > 1:
            raise ValueError("channels disagree on bin count")
        if counts and min(counts) < 2:
            raise ValueError("need at least 2 bins")

    @property
    def n_bins(self) -> int:
        return len(next(iter(self.channels.values())))

    def estimate(self, channel: str) -> EstimateWithError:
        bins = self.channels[channel]
        return EstimateWithError(
            mean=float(bins.mean()),
            error=float(bins.std(ddof=1) / np.sqrt(len(bins))),
            method="binning",
        )


def make_bins(channels: dict[str, np.ndarray], bin_size: int | None = None) -> BinSeries:
    """Bin every channel with one shared bin size (default from the m2 channel,
    falling back to the first channel)."""
    ref = channels.get("m2", next(iter(channels.values())))
    if bin_size is None:
        bin_size = default_bin_size(np.asarray(ref))
    binned = {k: bin_means(np.asarray(v), bin_size) for k, v in channels.items()}
    return BinSeries(bin_size=bin_size, n_samples=len(ref), channels=binned)


def jackknife(bins: np.ndarray, func) -> tuple[float, float]:
    """Leave-one-out jackknife of func over bin means (func maps an array of
    retained bins to a scalar)."""
    b = np.asarray(bins, dtype=np.float64)
    n = b.shape[-1]
    if n < 2:
        raise ValueError("jackknife needs at least 2 bins")
    replicates = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        replicates[i] = func(b[..., idx != i])
    center = replicates.mean()
    err = np.sqrt((n - 1) / n * np.sum((replicates - center) ** 2))
    return float(func(b)), float(err)


def binder_ratio(bins: BinSeries) -> EstimateWithError:
    """R2 = <m^4> / <m^2>^2 with jackknife error over bins.

    The ratio is evaluated per leave-one-out replicate, not assembled from
    the two channels' separate errors.
    """
    if bins.n_bins < 8:
        raise ValueError(f"Binder jackknife needs >= 8 bins, got {bins.n_bins}")
    m2 = bins.channels["m2"]
    m4 = bins.channels["m4"]
    stacked = np.vstack([m2, m4])

    def ratio(kept: np.ndarray) -> float:
        mean2 = kept[0].mean()
        if mean2 <= 0.0:
            raise DegenerateDataError("<m^2> replicate is not positive")
        return kept[1].mean() / mean2**2

    mean, err = jackknife(stacked, ratio)
    return EstimateWithError(mean=mean, error=err, method="jackknife")


# ---------------------------------------------------------------------------
# Convergence with circuit depth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelConvergence:
    channel: str
    status: str  # "converged" | "undetermined"
    recommended_depth: int | None
    depths: tuple[int, ...]


@dataclass(frozen=True)
class StationarityReport:
    per_channel: dict[str, ChannelConvergence]

    @property
    def converged(self) -> bool:
        return all(c.status == "converged" for c in self.per_channel.values())

    def recommended_depth(self) -> int | None:
        depths = [
            c.recommended_depth for c in self.per_channel.values() if c.recommended_depth
        ]
        return max(depths) if len(depths) == len(self.per_channel) else None


def stationarity_scan(
    by_depth: dict[int, dict[str, EstimateWithError]], n_sigma: float = 2.0
) -> StationarityReport:
    """Detect the depth beyond which estimates stop drifting.

    A channel is converged when its last two consecutive-depth pairs agree
    within n_sigma combined errors; the recommended depth is the start of
    the longest agreeing tail.  Disagreement reports "undetermined" rather
    than raising.
    """
    depths = sorted(by_depth)
    if len(depths) < 3:
        raise ValueError("need at least 3 depths to assess stationarity")
    channels = sorted({c for d in depths for c in by_depth[d]})
    report: dict[str, ChannelConvergence] = {}
    for ch in channels:
        agree = [
            by_depth[a][ch].agrees(by_depth[b][ch], n_sigma)
            for a, b in zip(depths, depths[1:])
        ]
        converged = all(agree[-2:])
        rec = None
        if converged:
            j = len(agree)
            while j > 0 and agree[j - 1]:
                j -= 1
            rec = depths[j]
        report[ch] = ChannelConvergence(
            channel=ch,
            status="converged" if converged else "undetermined",
            recommended_depth=rec,
            depths=tuple(depths),
        )
    return StationarityReport(per_channel=report)
