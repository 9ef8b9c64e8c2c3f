"""
Tests für Leistungsspektren und den Permutationskontrast
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Füge das Projektverzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.measures import EmpiricalMeasure  # noqa: E402
from core.spectra import (  # noqa: E402
    permutation_contrast,
    power_spectrum_1d,
    power_spectrum_2d,
    spectrum_from_samples,
)


def _sinusoids(n: int, length: int, frequency: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2 * np.pi, size=(n, 1))
    grid = np.arange(length)[None, :]
    return np.sin(2 * np.pi * frequency * grid / length + phase)


class TestPowerSpectrum1d(unittest.TestCase):
    """Einseitiges 1-D Spektrum"""

    def test_constant_without_dc_is_zero(self):
        """
        Test: Konstantes Signal hat ohne DC-Bin nur Nullen
        """
        report = power_spectrum_1d(np.full((4, 16), 3.0), exclude_dc=True)
        np.testing.assert_allclose(report.power, 0.0, atol=1e-24)
        self.assertAlmostEqual(report.frequencies[0], 1 / 16)

    def test_sinusoid_has_dominant_bin(self):
        """
        Test: Sinus der Frequenz 4 konzentriert die Leistung in Bin 4
        """
        report = power_spectrum_1d(_sinusoids(50, 32, 4))
        self.assertEqual(int(np.argmax(report.power)), 4)
        self.assertAlmostEqual(report.frequencies[4], 4 / 32)
        self.assertGreater(report.power[4] * report.multiplicity[4], 0.99 * report.total_power())

    def test_parseval(self):
        """
        Test: Summe über die Bins mit Multiplizität = mittlere Energie pro Koordinate
        """
        rng = np.random.default_rng(3)
        for length in (15, 16):
            x = rng.standard_normal((20, length))
            report = power_spectrum_1d(x)
            self.assertAlmostEqual(report.total_power(), float(np.mean(x ** 2)), places=12)
            self.assertEqual(report.multiplicity[0], 1.0)
            self.assertEqual(report.multiplicity[-1], 1.0 if length % 2 == 0 else 2.0)

    def test_normalize(self):
        """
        Test: Standardisierte Zeilen haben Gesamtleistung 1 (ohne DC)
        """
        x = 5.0 + 2.0 * _sinusoids(10, 16, 2, seed=1)
        report = power_spectrum_1d(x, normalize=True, exclude_dc=True)
        self.assertAlmostEqual(report.total_power(), 1.0, places=10)

    def test_too_short(self):
        """
        Test: Signallänge 1 wird abgewiesen
        """
        with self.assertRaises(ValueError):
            power_spectrum_1d(np.zeros((3, 1)))


class TestPowerSpectrum2d(unittest.TestCase):
    """Radial gemitteltes 2-D Spektrum"""

    def test_parseval_2d(self):
        """
        Test: Gesamtleistung = mittlere Energie pro Pixel
        """
        rng = np.random.default_rng(5)
        x = rng.standard_normal((6, 3, 8, 8))
        report = power_spectrum_2d(x)
        self.assertAlmostEqual(report.total_power(), float(np.mean(x ** 2)), places=12)
        self.assertEqual(report.mode, '2d')

    def test_horizontal_stripes(self):
        """
        Test: Streifen der Frequenz 2 landen im Ring mit Radius 2
        """
        rows = np.cos(2 * np.pi * 2 * np.arange(16) / 16)
        image = np.tile(rows[:, None], (1, 16))[None, :, :]
        report = power_spectrum_2d(image, exclude_dc=True)
        peak = report.frequencies[int(np.argmax(report.power))]
        self.assertAlmostEqual(peak, 2 / 16)

    def test_from_samples_reshapes_rows(self):
        """
        Test: Zeilen der Länge 64 werden als 8 x 8 Bilder gelesen, sonst Fehler
        """
        rng = np.random.default_rng(0)
        report = spectrum_from_samples(rng.standard_normal((4, 64)), mode='2d')
        self.assertEqual(report.mode, '2d')
        with self.assertRaises(ValueError):
            spectrum_from_samples(rng.standard_normal((4, 10)), mode='2d')
        with self.assertRaises(ValueError):
            spectrum_from_samples(rng.standard_normal((4, 10)), mode='3d')
        report = spectrum_from_samples(rng.standard_normal((4, 24)), mode='2d', shape=(2, 3, 4))
        self.assertEqual(report.n_samples, 4)


class TestPermutationContrast(unittest.TestCase):
    """Permutation ändert das Spektrum, nicht aber FI und FIR"""

    def test_interleaving_permutation(self):
        """
        Test: Verschränkung der Koordinaten verschiebt das Spektrum, FI/FIR bleiben gleich
        """
        measure = EmpiricalMeasure(_sinusoids(300, 8, 1, seed=2))
        contrast = permutation_contrast(measure, (0, 2, 4, 6, 1, 3, 5, 7), tau=0.1, n_points=128)
        self.assertLess(contrast.fi_difference, 1e-9 * contrast.fi_before)
        self.assertLess(contrast.fir_difference, 1e-9 * contrast.fir_before)
        self.assertGreater(contrast.spectrum_distance, 0.1)
        self.assertIn('spectrum_distance', contrast.to_dict())

    def test_invalid_permutation(self):
        """
        Test: Keine Permutation der Koordinaten wird abgewiesen
        """
        measure = EmpiricalMeasure(np.zeros((3, 4)))
        with self.assertRaises(ValueError):
            permutation_contrast(measure, (0, 1, 2), tau=1.0)


if __name__ == '__main__':
    unittest.main()
