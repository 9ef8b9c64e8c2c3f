"""
Curve Exporter - Exportiert Kurven und Tabellen als CSV/JSON
"""

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .estimators import DiagnosticCurve

# 17 signifikante Stellen: jeder float64 lässt sich exakt zurücklesen
FLOAT_FORMAT = '%.17g'


def _json_safe(value: Any) -> Any:
    """numpy-Typen in Python-Typen, nicht endliche Zahlen als Zeichenkette"""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


class CurveExporter:
    """Schreibt Diagnosekurven, Tabellen und JSON-Dokumente"""

    @staticmethod
    def export_table(frame: pd.DataFrame, output_path: str) -> Path:
        """
        Exportiert eine Tabelle als CSV

        Args:
            frame: pandas DataFrame
            output_path: Pfad zur Ausgabe-CSV-Datei

        Returns:
            Pfad der geschriebenen Datei
        """
        output_file = Path(output_path)

        # Erstelle Verzeichnis falls nicht vorhanden
        output_file.parent.mkdir(parents=True, exist_ok=True)

        frame.to_csv(output_file, index=False, float_format=FLOAT_FORMAT, na_rep='nan',
                     encoding='utf-8', lineterminator='\n')
        return output_file

    @staticmethod
    def export_curve(curve: DiagnosticCurve, output_path: str) -> Path:
        """Eine Zeile pro tau mit FI, FIR, MMSE und Zerlegung; Flags als Text"""
        frame = curve.to_frame()
        frame['flags'] = [';'.join(sorted(set(a.flags) | set(b.flags)))
                          for a, b in zip(curve.fi, curve.fir)]
        return CurveExporter.export_table(frame, output_path)

    @staticmethod
    def export_json(doc: dict, output_path: str) -> Path:
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        with open(output_file, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(_json_safe(doc), f, indent=2, sort_keys=True, allow_nan=False)
            f.write('\n')
        return output_file

    @staticmethod
    def read_table(input_path: str) -> pd.DataFrame:
        input_file = Path(input_path)
        if not input_file.exists():
            raise ValueError(f"Datei nicht gefunden: {input_path}")
        return pd.read_csv(input_file, float_precision='round_trip')
