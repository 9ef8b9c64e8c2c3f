"""
Test: Konfiguration
Testet key=value Dateien, Vorrangregeln und das Ausgabeverzeichnis
"""
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

# Füge das Projektverzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.config import (OUT_ENV, ConfigError, RunConfig, load_config,  # noqa: E402
                         parse_config_file)
from core.estimators import DEFAULT_N, LARGE_MODEL_BUDGET  # noqa: E402


class TestConfigFile(unittest.TestCase):
    """Tests für das Einlesen von Konfigurationsdateien"""

    def setUp(self):
        """Erstelle temporäre Test-Umgebung"""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Räume temporäre Test-Umgebung auf"""
        shutil.rmtree(self.test_dir)

    def _write(self, content: str) -> str:
        path = Path(self.test_dir) / 'run.cfg'
        path.write_text(content, encoding='utf-8')
        return str(path)

    def test_parses_values_and_comments(self):
        """
        Test: Kommentare und Leerzeilen werden ignoriert, Werte typisiert
        """
        path = self._write("# Lauf\n\nn = 500\nlr=0.001  # Lernrate\nschedule = ddpm\nfd_step = none\n")
        values = parse_config_file(path)
        self.assertEqual(values, {'n': 500, 'lr': 0.001, 'schedule': 'ddpm', 'fd_step': None})

    def test_reports_line_number(self):
        """
        Test: Zeile ohne '=' wird mit Zeilennummer gemeldet
        """
        path = self._write("n = 10\n\nprobes 5\n")
        with self.assertRaises(ConfigError) as ctx:
            parse_config_file(path)
        self.assertIn(':3:', str(ctx.exception))

    def test_unknown_key(self):
        """
        Test: Unbekannter Schlüssel wird abgewiesen und benannt
        """
        path = self._write("samples = 10\n")
        with self.assertRaises(ConfigError) as ctx:
            parse_config_file(path)
        self.assertIn("'samples'", str(ctx.exception))
        self.assertIn(':1:', str(ctx.exception))

    def test_invalid_value(self):
        """
        Test: Nicht umwandelbarer Wert wird mit Zeilennummer gemeldet
        """
        path = self._write("seed = 1\nn = viele\n")
        with self.assertRaises(ConfigError) as ctx:
            parse_config_file(path)
        self.assertIn(':2:', str(ctx.exception))

    def test_missing_file(self):
        """
        Test: Fehlende Datei ergibt ConfigError
        """
        with self.assertRaises(ConfigError):
            parse_config_file(str(Path(self.test_dir) / 'fehlt.cfg'))


class TestPrecedence(unittest.TestCase):
    """Flag > Datei > Standard"""

    def setUp(self):
        """Erstelle temporäre Test-Umgebung"""
        self.test_dir = tempfile.mkdtemp()
        self.path = str(Path(self.test_dir) / 'run.cfg')
        Path(self.path).write_text("n = 300\nprobes = 7\nseed = 4\n", encoding='utf-8')

    def tearDown(self):
        """Räume temporäre Test-Umgebung auf"""
        shutil.rmtree(self.test_dir)

    def test_flag_over_file_over_default(self):
        """
        Test: Kommandozeile schlägt Datei, Datei schlägt Standardwert
        """
        cfg = load_config(self.path, {'n': 50, 'workers': None})
        self.assertEqual(cfg.n, 50)
        self.assertEqual(cfg.probes, 7)
        self.assertEqual(cfg.workers, 1)
        self.assertEqual(cfg.sources['n'], 'flag')
        self.assertEqual(cfg.sources['probes'], 'file')
        self.assertEqual(cfg.sources['workers'], 'default')

    def test_defaults_without_file(self):
        """
        Test: Ohne Datei und Flags gelten die Standardwerte
        """
        cfg = load_config()
        self.assertEqual(cfg.n, DEFAULT_N)
        self.assertEqual(len(cfg.tau_grid()), 64)
        self.assertTrue(all(source == 'default' for source in cfg.sources.values()))

    def test_large_model_budget(self):
        """
        Test: Das Preset setzt nur Werte, die nicht explizit angegeben sind
        """
        cfg = load_config(None, {'budget': 'large-model'})
        self.assertEqual(cfg.n, LARGE_MODEL_BUDGET['n'])
        self.assertEqual(cfg.probes, LARGE_MODEL_BUDGET['probes'])
        self.assertEqual(cfg.sources['n'], 'budget')

        cfg = load_config(self.path, {'budget': 'large-model'})
        self.assertEqual(cfg.n, 300)
        self.assertEqual(cfg.probes, 7)

    def test_unknown_override(self):
        """
        Test: Unbekannte Schlüssel in den Overrides werden abgewiesen
        """
        with self.assertRaises(ConfigError):
            load_config(None, {'tempo': 3})

    def test_invalid_choices(self):
        """
        Test: Ungültiges Budget oder ungültige Methode ergibt ConfigError
        """
        with self.assertRaises(ConfigError):
            RunConfig(budget='riesig')
        with self.assertRaises(ConfigError):
            RunConfig(method='pathwise')
        with self.assertRaises(ConfigError):
            RunConfig(probe='uniform')


class TestOutputDirectory(unittest.TestCase):
    """--out, dann $FIRDIAG_OUT, dann ./firdiag_out"""

    def test_out_resolution(self):
        """
        Test: Reihenfolge der Quellen für das Ausgabeverzeichnis
        """
        with mock.patch.dict(os.environ, {OUT_ENV: '/tmp/aus_env'}):
            self.assertEqual(RunConfig().out_dir(), Path('/tmp/aus_env'))
            self.assertEqual(RunConfig(out='/tmp/aus_flag').out_dir(), Path('/tmp/aus_flag'))
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(RunConfig().out_dir(), Path('./firdiag_out'))

    def test_experiment_spec(self):
        """
        Test: ExperimentSpec übernimmt Gitter und Budget aus der Konfiguration
        """
        cfg = RunConfig(grid='log:0.1:10:3', n=20, probes=2, seed=9)
        spec = cfg.experiment_spec('activation_curves')
        self.assertEqual(len(spec.taus), 3)
        self.assertAlmostEqual(spec.taus[1], 1.0, places=12)
        self.assertEqual((spec.n, spec.probes, spec.seed), (20, 2, 9))


if __name__ == '__main__':
    unittest.main()
