"""
Spektren - Leistungsspektren von Stichproben und Permutationskontrast
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .estimators import frobenius_sq
from .measures import EmpiricalMeasure, check_tau


@dataclass
class SpectrumReport:
    """
    Gemitteltes Leistungsspektrum

    frequencies sind normierte Frequenzen (Bin / Signallänge), multiplicity
    zählt die DFT-Koeffizienten pro Bin, sodass sum(multiplicity * power)
    der mittleren Energie pro Koeffizient entspricht.
    """

    frequencies: np.ndarray
    power: np.ndarray
    multiplicity: np.ndarray
    n_samples: int
    exclude_dc: bool
    mode: str = '1d'

    def __post_init__(self):
        if np.any(self.power < 0.0):
            raise ValueError("Leistung darf nicht negativ sein")
        if np.any(np.diff(self.frequencies) <= 0.0):
            raise ValueError("Frequenz-Bins müssen aufsteigend sein")

    def total_power(self) -> float:
        return float(np.sum(self.multiplicity * self.power))

    def l1_distance(self, other: 'SpectrumReport') -> float:
        if self.power.shape != other.power.shape:
            raise ValueError("Spektren haben unterschiedlich viele Bins")
        return float(np.sum(np.abs(self.power - other.power)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'frequency': self.frequencies, 'power': self.power,
                             'multiplicity': self.multiplicity})


def _standardize(samples: np.ndarray, axes) -> np.ndarray:
    centered = samples - samples.mean(axis=axes, keepdims=True)
    std = centered.std(axis=axes, keepdims=True)
    # konstante Signale bleiben Null
    return np.divide(centered, std, out=np.zeros_like(centered), where=std > 0.0)


def power_spectrum_1d(samples, normalize: bool = False,
                      exclude_dc: bool = False) -> SpectrumReport:
    """
    Einseitiges 1-D Leistungsspektrum, gemittelt über alle Stichproben

    Bin j enthält |X_j|^2 / k^2; für reelle Signale ist das der Mittelwert
    über das Paar (+j, -j).

    Args:
        samples: N x k Matrix, k >= 2
        normalize: jede Zeile vor der Transformation standardisieren
        exclude_dc: Bin 0 (Mittelwert) weglassen

    Returns:
        SpectrumReport mit den Bins 0..k/2
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n, k = x.shape
    if k < 2:
        raise ValueError(f"Signallänge muss >= 2 sein, erhalten: {k}")
    if normalize:
        x = _standardize(x, axes=1)
    spectrum = np.fft.rfft(x, axis=1)
    power = np.mean(np.abs(spectrum) ** 2, axis=0) / k ** 2
    bins = np.arange(power.shape[0])
    multiplicity = np.full(power.shape[0], 2.0)
    multiplicity[0] = 1.0
    if k % 2 == 0:
        multiplicity[-1] = 1.0
    if exclude_dc:
        bins, power, multiplicity = bins[1:], power[1:], multiplicity[1:]
    return SpectrumReport(bins / k, power, multiplicity, n, exclude_dc, '1d')


def power_spectrum_2d(samples, normalize: bool = False,
                      exclude_dc: bool = False) -> SpectrumReport:
    """
    Radial gemitteltes 2-D Leistungsspektrum für N x C x H x W Stichproben

    |FFT|^2 / (H W)^2 wird über Kanäle und Stichproben gemittelt und in
    Ringe ganzzahligen Radius um die Nullfrequenz einsortiert.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, None, :, :]
    if x.ndim != 4:
        raise ValueError(f"Erwartet N x C x H x W, erhalten Form {x.shape}")
    n, _, height, width = x.shape
    if height < 2 or width < 2:
        raise ValueError(f"H und W müssen >= 2 sein, erhalten {height} x {width}")
    if normalize:
        x = _standardize(x, axes=(2, 3))

    spectrum = np.fft.fft2(x, axes=(2, 3))
    power_map = np.mean(np.abs(spectrum) ** 2, axis=(0, 1)) / (height * width) ** 2

    ky = np.fft.fftfreq(height) * height
    kx = np.fft.fftfreq(width) * width
    radius = np.rint(np.hypot(ky[:, None], kx[None, :])).astype(int)
    counts = np.bincount(radius.ravel())
    sums = np.bincount(radius.ravel(), weights=power_map.ravel())
    occupied = np.nonzero(counts)[0]
    bins = occupied
    power = sums[occupied] / counts[occupied]
    multiplicity = counts[occupied].astype(np.float64)
    if exclude_dc:
        bins, power, multiplicity = bins[1:], power[1:], multiplicity[1:]
    return SpectrumReport(bins / max(height, width), power, multiplicity, n, exclude_dc, '2d')


@dataclass
class PermutationContrast:
    """FI/FIR vor und nach einer Koordinatenpermutation und Abstand der Spektren"""

    tau: float
    fi_before: float
    fi_after: float
    fir_before: float
    fir_after: float
    spectrum_distance: float

    @property
    def fi_difference(self) -> float:
        return abs(self.fi_after - self.fi_before)

    @property
    def fir_difference(self) -> float:
        return abs(self.fir_after - self.fir_before)

    def to_dict(self) -> dict:
        return {'tau': self.tau, 'fi_before': self.fi_before, 'fi_after': self.fi_after,
                'fir_before': self.fir_before, 'fir_after': self.fir_after,
                'fi_difference': self.fi_difference, 'fir_difference': self.fir_difference,
                'spectrum_distance': self.spectrum_distance}


def permutation_contrast(measure: EmpiricalMeasure, perm: Sequence[int], tau: float,
                         n_points: int = 256, seed: int = 0,
                         normalize: bool = False) -> PermutationContrast:
    """
    Vergleicht Fisher-Größen und Spektren vor und nach einer Permutation

    FI und FIR werden mit dem exakten Mischungs-Orakel auf denselben,
    mitpermutierten Auswertepunkten gebildet; die FIR nutzt die exakte
    Frobenius-Norm. Beide Differenzen sind daher nur Rundungsfehler.

    Args:
        measure: empirisches Maß
        perm: Permutation der Koordinaten
        tau: Rauschniveau
        n_points: Anzahl der Auswertepunkte
        seed: Seed der Auswertepunkte
        normalize: Zeilen vor dem Spektrum standardisieren
    """
    tau = check_tau(tau)
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(measure.dim)):
        raise ValueError(f"Keine gültige Permutation von {measure.dim} Koordinaten: {perm.tolist()}")
    permuted = measure.permuted(perm)

    points = measure.sample(tau, n_points, seed)
    moved = points[:, perm]
    fi_before = float(np.mean(np.sum(measure.score(points, tau) ** 2, axis=1)))
    fi_after = float(np.mean(np.sum(permuted.score(moved, tau) ** 2, axis=1)))
    fir_before = float(np.mean(frobenius_sq(measure, points, tau)))
    fir_after = float(np.mean(frobenius_sq(permuted, moved, tau)))

    distance = power_spectrum_1d(measure.samples, normalize).l1_distance(
        power_spectrum_1d(permuted.samples, normalize))
    return PermutationContrast(tau, fi_before, fi_after, fir_before, fir_after, distance)


def spectrum_from_samples(samples: np.ndarray, mode: str = '1d',
                          shape: Optional[Sequence[int]] = None,
                          normalize: bool = False, exclude_dc: bool = False) -> SpectrumReport:
    """
    Spektrum für die Kommandozeile: Zeilen als 1-D Signale oder als C x H x W Bilder

    Args:
        shape: (C, H, W) oder (H, W) für mode '2d'; Standard ist ein quadratisches Bild
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if mode == '1d':
        return power_spectrum_1d(x, normalize, exclude_dc)
    if mode != '2d':
        raise ValueError(f"Unbekannter Spektrum-Modus '{mode}', erlaubt: 1d, 2d")
    if shape is None:
        side = int(round(np.sqrt(x.shape[1])))
        if side * side != x.shape[1]:
            raise ValueError(
                f"Zeilenlänge {x.shape[1]} ist kein Quadrat; Bildform angeben (C, H, W)")
        shape = (1, side, side)
    if len(shape) == 2:
        shape = (1, *shape)
    return power_spectrum_2d(x.reshape(x.shape[0], *shape), normalize, exclude_dc)
