"""
Test: Zufallsströme
"""
import sys
import unittest
from pathlib import Path

import numpy as np

# Füge das Projektverzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.rng import CHUNK_SIZE, chunks, stream  # noqa: E402


class TestStreams(unittest.TestCase):

    def test_same_key_same_numbers(self):
        """
        Test: Gleiche (seed, keys) liefern dieselbe Folge
        """
        a = stream(5, "sample", 3).standard_normal(10)
        b = stream(5, "sample", 3).standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_keys_separate_streams(self):
        """
        Test: Anderer Seed, Name oder Index ergibt eine andere Folge
        """
        base = stream(5, "sample", 3).standard_normal(10)
        for other in (stream(6, "sample", 3), stream(5, "noise", 3), stream(5, "sample", 4)):
            self.assertFalse(np.array_equal(base, other.standard_normal(10)))

    def test_negative_index(self):
        """
        Test: Negative Indizes werden abgewiesen
        """
        with self.assertRaises(ValueError):
            stream(0, "sample", -1)

    def test_chunks_cover_range(self):
        """
        Test: Blöcke fester Größe decken range(count) lückenlos ab
        """
        blocks = list(chunks(2 * CHUNK_SIZE + 5))
        self.assertEqual([b[0] for b in blocks], [0, 1, 2])
        self.assertEqual(blocks[-1], (2, 2 * CHUNK_SIZE, 2 * CHUNK_SIZE + 5))
        self.assertEqual(list(chunks(0)), [])


if __name__ == '__main__':
    unittest.main()
