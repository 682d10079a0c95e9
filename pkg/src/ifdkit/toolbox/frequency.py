"""Frequency-domain analyzers: FFT residual, Haar subbands, resampling
periodicity and the blockwise DCT high-pass."""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from ..errors import ParameterError
from ..raster import Raster, luma_plane
from ._common import filter2d, offset_free_luma
from .registry import check_positive_int, tool
from .report import Artifact, HeatMap, ToolName, ToolReport, fmt, percentile99


@tool(ToolName.FFT_RESIDUAL, "fft_residual", "FFT high-frequency residual (low-frequency disk removed)")
def fft_residual(img: Raster, cutoff_frac: float = 0.10) -> ToolReport:
    cutoff_frac = float(cutoff_frac)
    if not 0.0 < cutoff_frac <= 1.0:
        raise ParameterError(f"cutoff_frac must lie in (0, 1], got {cutoff_frac}")
    x = offset_free_luma(img)
    h, w = x.shape
    spectrum = np.fft.fftshift(np.fft.fft2(x))
    yy, xx = np.ogrid[:h, :w]
    radius = np.hypot(yy - h // 2, xx - w // 2)
    spectrum[radius < cutoff_frac * min(h, w) / 2.0] = 0.0
    residual = np.abs(np.fft.ifft2(np.fft.ifftshift(spectrum)).real)
    stats = {"mean_residual": float(residual.mean()), "p99_residual": percentile99(residual)}
    hm = HeatMap(residual, "absolute high-pass residual, luma units")
    return ToolReport(
        ToolName.FFT_RESIDUAL,
        {"cutoff_frac": cutoff_frac},
        stats,
        (Artifact("residual", hm),),
        f"FFT residual with cutoff {cutoff_frac:g}: mean {fmt(stats['mean_residual'])}, "
        f"p99 {fmt(stats['p99_residual'])}. Bright structures mark high-frequency boundaries and texture.",
    )


def haar_subbands(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One-level orthonormal 2-D Haar transform -> (LL, LH, HL, HH).

    HL differences along x (responds to vertical edges), LH along y,
    HH is the diagonal detail. Odd dims are edge-replicated to even.
    """
    h, w = plane.shape
    p = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    a, b = p[0::2, 0::2], p[0::2, 1::2]
    c, d = p[1::2, 0::2], p[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a + b - c - d) / 2.0
    hl = (a - b + c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return ll, lh, hl, hh


@tool(ToolName.DWT_SUBBANDS, "dwt_subbands", "one-level Haar wavelet detail subbands")
def dwt_subbands(img: Raster) -> ToolReport:
    _, lh, hl, hh = haar_subbands(luma_plane(img))
    stats = {
        "energy_LH": float(np.mean(lh ** 2)),
        "energy_HL": float(np.mean(hl ** 2)),
        "energy_HH": float(np.mean(hh ** 2)),
    }
    arts = tuple(
        Artifact(name, HeatMap(np.abs(band), f"|{name}| Haar detail magnitude", block=2))
        for name, band in (("LH", lh), ("HL", hl), ("HH", hh))
    )
    dominant = max(stats, key=stats.get)
    return ToolReport(
        ToolName.DWT_SUBBANDS,
        {},
        stats,
        arts,
        f"Haar detail energies LH={fmt(stats['energy_LH'])}, HL={fmt(stats['energy_HL'])}, "
        f"HH={fmt(stats['energy_HH'])}; strongest band {dominant[7:]}.",
    )


_FOUR_NEIGHBOUR_MEAN = np.array([[0.0, 0.25, 0.0], [0.25, 0.0, 0.25], [0.0, 0.25, 0.0]])


def prediction_residual(plane: np.ndarray) -> np.ndarray:
    return plane - filter2d(plane, _FOUR_NEIGHBOUR_MEAN)


def residual_spectrum(residual: np.ndarray, tile: int = 64) -> np.ndarray:
    """Welch-averaged, Hann-windowed magnitude spectrum of |residual|, DC centered.

    Interpolation makes the residual *energy* periodic, so the spectrum is taken
    of its magnitude; averaging over half-overlapping tiles keeps the noise floor
    flat enough for a fixed peak-to-median test.
    """
    h, w = residual.shape
    tile = min(tile, h, w)
    window = np.outer(np.hanning(tile), np.hanning(tile))
    mag = np.abs(residual)
    acc = np.zeros((tile, tile))
    n = 0
    step = max(tile // 2, 1)
    for y in range(0, h - tile + 1, step):
        for x in range(0, w - tile + 1, step):
            t = mag[y:y + tile, x:x + tile]
            acc += np.abs(np.fft.fft2((t - t.mean()) * window))
            n += 1
    return np.fft.fftshift(acc / n)


def spectral_peaks(spectrum: np.ndarray, peak_ratio: float, dc_guard: float = 2.0) -> tuple[np.ndarray, float]:
    """Boolean mask of off-DC local maxima above peak_ratio x median, and the best ratio seen."""
    h, w = spectrum.shape
    yy, xx = np.ogrid[:h, :w]
    off_dc = np.hypot(yy - h // 2, xx - w // 2) > dc_guard
    local_max = (spectrum == ndimage.maximum_filter(spectrum, size=3, mode="wrap")) & off_dc & (spectrum > 0)
    med = float(np.median(spectrum))
    if med <= 0.0:
        return np.zeros_like(local_max), 0.0
    ratios = spectrum / med
    best = float(ratios[local_max].max()) if local_max.any() else 0.0
    return local_max & (ratios > peak_ratio), best


@tool(ToolName.RESAMPLING_PERIODICITY, "resampling_periodicity", "interpolation periodicity peaks in the residual spectrum")
def resampling_periodicity(img: Raster, peak_ratio: float = 4.0, tile: int = 64) -> ToolReport:
    peak_ratio = float(peak_ratio)
    if peak_ratio <= 1.0:
        raise ParameterError(f"peak_ratio must exceed 1, got {peak_ratio}")
    tile = check_positive_int("tile", tile, 8)
    plane = luma_plane(img)
    if min(plane.shape) < 8:
        raise ParameterError("resampling analysis needs an image of at least 8x8 pixels")
    spectrum = residual_spectrum(prediction_residual(plane), tile)
    peaks, best = spectral_peaks(spectrum, peak_ratio)
    count = int(peaks.sum())
    flagged = count >= 2
    stats = {"peak_count": float(count), "max_peak_ratio": best}
    hm = HeatMap(np.log1p(spectrum), "log(1 + |spectrum|) of residual magnitude, DC centered",
                 domain="frequency")
    verdict = "periodic interpolation traces found, consistent with resampling" if flagged \
        else "no periodic interpolation traces"
    return ToolReport(
        ToolName.RESAMPLING_PERIODICITY,
        {"peak_ratio": peak_ratio, "tile": tile},
        stats,
        (Artifact("spectrum", hm),),
        f"Resampling check: {count} spectral peak(s) above {peak_ratio:g}x median "
        f"(max ratio {fmt(best)}); {verdict}.",
    )


def blockwise_dct_highpass(plane: np.ndarray, low_sum: int, block: int = 8) -> np.ndarray:
    """Zero 8x8 DCT-II coefficients with u+v < low_sum and invert; edge-padded."""
    h, w = plane.shape
    p = np.pad(plane, ((0, -h % block), (0, -w % block)), mode="edge")
    ph, pw = p.shape
    blocks = p.reshape(ph // block, block, pw // block, block).transpose(0, 2, 1, 3)
    coeffs = sfft.dctn(blocks, axes=(2, 3), norm="ortho")
    u, v = np.ogrid[:block, :block]
    coeffs[:, :, (u + v) < low_sum] = 0.0
    rec = sfft.idctn(coeffs, axes=(2, 3), norm="ortho")
    return rec.transpose(0, 2, 1, 3).reshape(ph, pw)[:h, :w]


def blockiness(plane: np.ndarray, block: int = 8) -> float:
    cols = [np.abs(plane[:, k] - plane[:, k - 1]) for k in range(block, plane.shape[1], block)]
    rows = [np.abs(plane[k, :] - plane[k - 1, :]) for k in range(block, plane.shape[0], block)]
    jumps = [a.ravel() for a in cols + rows]
    return float(np.concatenate(jumps).mean()) if jumps else 0.0


@tool(ToolName.DCT_HIGHPASS, "dct_highpass", "8x8 blockwise DCT high-pass")
def dct_highpass(img: Raster, low_sum: int = 4) -> ToolReport:
    low_sum = check_positive_int("low_sum", low_sum, 0)
    plane = luma_plane(img)
    if low_sum == 0:
        hp = plane.copy()
    else:
        hp = blockwise_dct_highpass(offset_free_luma(img), low_sum)
    mag = np.abs(hp)
    stats = {"mean_hp_energy": float(np.mean(hp ** 2)), "blockiness": blockiness(plane)}
    return ToolReport(
        ToolName.DCT_HIGHPASS,
        {"low_sum": low_sum},
        stats,
        (Artifact("highpass", HeatMap(mag, "absolute blockwise DCT high-pass, luma units")),),
        f"DCT high-pass (u+v >= {low_sum}): mean energy {fmt(stats['mean_hp_energy'])}, "
        f"8-px border blockiness {fmt(stats['blockiness'])}.",
    )
