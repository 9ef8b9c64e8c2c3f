"""
Report Exporter - Abbildungen, Prüfergebnisse, Statistikbericht und Manifest
"""

import hashlib
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from . import __version__  # noqa: E402
from .curve_exporter import CurveExporter, _json_safe  # noqa: E402
from .estimators import DiagnosticCurve  # noqa: E402
from .spectra import SpectrumReport  # noqa: E402
from .theory_bench import BenchReport, BoundCheckResult, FigureData  # noqa: E402

# feste Salt-Zeichenkette, damit SVG-IDs zwischen Läufen gleich bleiben
SVG_HASHSALT = 'firdiag'
LOG_AXIS_DECADES = 2.0


def wants_log_axis(values) -> bool:
    """Log-Achse, wenn alle Werte positiv sind und mehr als zwei Dekaden überspannen"""
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size < 2 or np.any(arr <= 0.0):
        return False
    return bool(np.log10(arr.max() / arr.min()) > LOG_AXIS_DECADES)


def curve_figure(curve: DiagnosticCurve, name: str = 'curve') -> FigureData:
    """FI und FIR über tau; Achsen nach der Dekadenregel"""
    figure = FigureData(name, f"FI / FIR ({curve.provenance.get('oracle', '')})", 'tau', 'Wert')
    figure.add('FI', curve.grid.values, curve.fi_mean, style='-')
    figure.add('FIR', curve.grid.values, curve.fir_mean, style='-')
    figure.logx = wants_log_axis(curve.grid.values)
    figure.logy = wants_log_axis(np.concatenate([curve.fi_mean, curve.fir_mean]))
    return figure


def spectrum_figure(report: SpectrumReport, name: str = 'spectrum') -> FigureData:
    """Mittlere Leistung je Frequenz-Bin"""
    figure = FigureData(name, f"Leistungsspektrum ({report.mode}, {report.n_samples} Stichproben)",
                        'Frequenz', 'Leistung')
    figure.add('Leistung', report.frequencies, report.power)
    figure.logx = wants_log_axis(report.frequencies)
    figure.logy = wants_log_axis(report.power)
    return figure


@dataclass
class RunManifest:
    """Beschreibt einen Lauf: Aufruf, Konfiguration und alle Ausgabedateien mit Hash"""

    command: List[str]
    config: Dict
    seed: int
    version: str = __version__
    wall_time: float = 0.0
    files: List[Dict] = field(default_factory=list)
    started_at: float = field(default_factory=time.perf_counter, repr=False)
    environment: Dict = field(default_factory=lambda: {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'pandas': pd.__version__,
        'matplotlib': matplotlib.__version__,
    })

    def add_file(self, path: Path, root: Path):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.files.append({'path': Path(path).relative_to(root).as_posix(), 'sha256': digest})


class ReportExporter:
    """Schreibt die Ergebnisse eines Laufs in ein Ausgabeverzeichnis"""

    @staticmethod
    def export_figure(figure: FigureData, output_path: str) -> Path:
        """
        Schreibt eine Abbildung als eigenständige SVG-Datei

        Args:
            figure: Plot-Daten
            output_path: Zielpfad (.svg)

        Returns:
            Pfad der geschriebenen Datei
        """
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)

        with plt.rc_context({'svg.hashsalt': SVG_HASHSALT, 'svg.fonttype': 'path'}):
            fig, ax = plt.subplots(figsize=(6.4, 4.4))
            for series in figure.series:
                ax.plot(series['x'], series['y'], series.get('style', '-o'),
                        label=series['label'], markersize=3)
            if figure.logx:
                ax.set_xscale('log')
            if figure.logy:
                ax.set_yscale('log')
            ax.set_title(figure.title)
            ax.set_xlabel(figure.xlabel)
            ax.set_ylabel(figure.ylabel)
            ax.grid(True, which='both', alpha=0.3)
            if figure.series:
                ax.legend(fontsize='small')
            fig.tight_layout()
            fig.savefig(output_file, format='svg', metadata={'Date': None})
            plt.close(fig)
        return output_file

    @staticmethod
    def export_verdicts(checks: Sequence[BoundCheckResult], output_path: str) -> Path:
        doc = {'passed': all(c.passed for c in checks),
               'checks': [c.to_dict() for c in checks]}
        return CurveExporter.export_json(doc, output_path)

    @staticmethod
    def results_frame(report: BenchReport) -> pd.DataFrame:
        """Alle Tabellen untereinander; ohne Tabellen eine Zeile je Prüfung"""
        if report.tables:
            frames = []
            for name, table in report.tables.items():
                frame = table.copy()
                frame.insert(0, 'experiment', name)
                frames.append(frame)
            return pd.concat(frames, ignore_index=True, sort=False)
        return pd.DataFrame({'check': [c.name for c in report.checks],
                             'passed': [c.passed for c in report.checks]})

    @staticmethod
    def export_statistics(report: BenchReport, output_path: str) -> Path:
        """
        Erstellt eine Statistik-Textdatei mit allen Prüfergebnissen

        Args:
            report: Bench-Bericht
            output_path: Pfad zur Ausgabe-Textdatei
        """
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        passed = sum(1 for c in report.checks if c.passed)

        with open(output_file, 'w', encoding='utf-8', newline='\n') as f:
            f.write("=" * 80 + "\n")
            f.write("FIR DIAGNOSE - PRÜFBERICHT\n")
            f.write("=" * 80 + "\n")
            # kein Zeitstempel: die Datei geht mit ihrem Hash ins Manifest
            f.write(f"Ziel: {report.config.get('target', '-')}, "
                    f"Seed: {report.config.get('seed', '-')}\n")
            f.write(f"\nPrüfungen: {len(report.checks)}, bestanden: {passed}, "
                    f"fehlgeschlagen: {len(report.checks) - passed}\n")
            f.write(f"Tabellen: {', '.join(report.tables) or '-'}\n")

            for check in report.checks:
                f.write("\n" + "-" * 80 + "\n")
                f.write(f"{check.name.upper()}: {'BESTANDEN' if check.passed else 'FEHLGESCHLAGEN'}\n")
                f.write("-" * 80 + "\n")
                tolerance = ', '.join(f"{k}={v}" for k, v in sorted(check.tolerance.items()))
                f.write(f"Toleranz: {tolerance or '-'}\n")
                if check.slope is not None:
                    f.write(f"Steigung: {check.slope:.6g}, Achsenabschnitt: {check.intercept:.6g}\n")
                for line in check.details:
                    f.write(f"  {line}\n")

            for name, table in report.tables.items():
                f.write("\n" + "-" * 80 + "\n")
                f.write(f"TABELLE {name.upper()}\n")
                f.write("-" * 80 + "\n")
                f.write(table.to_string(index=False, float_format=lambda v: f"{v:.6g}") + "\n")

            f.write("\n" + "=" * 80 + "\n")
        return output_file

    @staticmethod
    def export_manifest(manifest: RunManifest, output_dir: str) -> Path:
        output_file = Path(output_dir) / 'manifest.json'
        output_file.parent.mkdir(parents=True, exist_ok=True)
        manifest.wall_time = round(time.perf_counter() - manifest.started_at, 3)
        doc = asdict(manifest)
        doc.pop('started_at')
        with open(output_file, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(_json_safe(doc), f, indent=2, sort_keys=True)
            f.write('\n')
        return output_file

    @staticmethod
    def export_bench(report: BenchReport, output_dir: str,
                     manifest: Optional[RunManifest] = None) -> List[Path]:
        """
        Schreibt results.csv, verdicts.json, summary.txt, eine SVG je Abbildung
        und zuletzt manifest.json mit den Hashes aller anderen Dateien

        Returns:
            Liste der geschriebenen Dateien (Manifest zuletzt)
        """
        root = Path(output_dir)
        root.mkdir(parents=True, exist_ok=True)
        written = [CurveExporter.export_table(ReportExporter.results_frame(report),
                                              root / 'results.csv')]
        if len(report.tables) > 1:
            for name, table in report.tables.items():
                written.append(CurveExporter.export_table(table, root / f"table_{name}.csv"))
        written.append(ReportExporter.export_verdicts(report.checks, root / 'verdicts.json'))
        for figure in report.figures:
            written.append(ReportExporter.export_figure(figure, root / f"{figure.name}.svg"))
        written.append(ReportExporter.export_statistics(report, root / 'summary.txt'))
        return ReportExporter.finish(written, root, manifest)

    @staticmethod
    def finish(written: List[Path], output_dir: str, manifest: Optional[RunManifest]) -> List[Path]:
        """Hängt das Manifest über die geschriebenen Dateien an"""
        if manifest is None:
            return list(written)
        root = Path(output_dir)
        for path in written:
            manifest.add_file(path, root)
        return list(written) + [ReportExporter.export_manifest(manifest, root)]
