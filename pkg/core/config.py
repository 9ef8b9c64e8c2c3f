"""
Konfiguration - key=value Dateien, Standardwerte und Vorrangregeln
"""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional

from .estimators import DEFAULT_N, DEFAULT_PROBES, LARGE_MODEL_BUDGET, TauGrid
from .theory_bench import ExperimentSpec

OUT_ENV = 'FIRDIAG_OUT'
DEFAULT_OUT = './firdiag_out'
BUDGETS = ('default', 'large-model')


class ConfigError(ValueError):
    """Unbekannter Schlüssel oder fehlerhafte Zeile in einer Konfigurationsdatei"""


@dataclass
class RunConfig:
    """Aufgelöste Einstellungen eines Kommandos (Flag > Datei > Standard)"""

    n: int = DEFAULT_N
    probes: int = DEFAULT_PROBES
    seed: int = 0
    workers: int = 1
    grid: str = 'log-sqrt:0.01:80:64'
    budget: str = 'default'
    probe: str = 'rademacher'
    method: str = 'jvp'
    fd_step: Optional[float] = None
    out: Optional[str] = None
    schedule: str = 've'
    epochs: int = 200
    batch: int = 256
    dataset_size: int = 50000
    lr: float = 5e-4
    weight_decay: float = 0.01
    encoder: str = 'identity'
    measure: str = 'builtin:gauss2d'
    sources: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget not in BUDGETS:
            raise ConfigError(f"Unbekanntes Budget '{self.budget}' (gültig: {', '.join(BUDGETS)})")
        if self.probe not in ('rademacher', 'gaussian'):
            raise ConfigError(f"Unbekannte Probe-Verteilung '{self.probe}'")
        if self.method not in ('jvp', 'fd', 'auto'):
            raise ConfigError(f"Unbekannte FIR-Methode '{self.method}'")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls) if f.name != 'sources']

    def tau_grid(self) -> TauGrid:
        return TauGrid.parse(self.grid)

    def out_dir(self) -> Path:
        """--out, sonst $FIRDIAG_OUT, sonst ./firdiag_out"""
        return Path(self.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)

    def to_dict(self) -> dict:
        return asdict(self)

    def experiment_spec(self, name: str, source: str = 'analytic') -> ExperimentSpec:
        return ExperimentSpec(name, measure=self.measure, encoder=self.encoder,
                              taus=tuple(self.tau_grid().values.tolist()), n=self.n,
                              probes=self.probes, source=source, seed=self.seed)


def _convert(key: str, text: str):
    """Wandelt einen Dateiwert in den Typ des Feldes"""
    default = RunConfig.__dataclass_fields__[key].default
    if key == 'fd_step':
        return None if text.lower() in ('', 'none') else float(text)
    if key == 'out':
        return text or None
    if isinstance(default, bool):
        return text.lower() in ('1', 'true', 'yes', 'ja')
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_config_file(path: str) -> Dict[str, object]:
    """
    Liest eine key=value Datei

    '#' leitet einen Kommentar ein, Leerzeilen werden ignoriert.

    Raises:
        ConfigError: fehlerhafte Zeile (mit Zeilennummer) oder unbekannter Schlüssel
    """
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigError(f"Konfigurationsdatei nicht gefunden: {path}")
    valid = RunConfig.keys()
    values: Dict[str, object] = {}
    with open(config_file, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition('=')
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{number}: erwartet key=value, erhalten '{raw.rstrip()}'")
            if key not in valid:
                raise ConfigError(f"{path}:{number}: unbekannter Schlüssel '{key}' "
                                  f"(gültig: {', '.join(valid)})")
            try:
                values[key] = _convert(key, value)
            except ValueError:
                raise ConfigError(f"{path}:{number}: ungültiger Wert für {key}: '{value}'")
    return values


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """
    Löst Standardwerte, Datei und Kommandozeilenwerte auf

    Args:
        path: optionale key=value Datei
        overrides: explizit gesetzte Kommandozeilenwerte (None-Werte zählen nicht)

    Returns:
        RunConfig; sources hält für jeden Schlüssel 'default', 'file' oder 'flag'
    """
    file_values = parse_config_file(path) if path else {}
    flag_values = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = sorted(set(flag_values) - set(RunConfig.keys()))
    if unknown:
        raise ConfigError(f"Unbekannte Schlüssel {unknown} (gültig: {', '.join(RunConfig.keys())})")

    merged = {**file_values, **flag_values}
    sources = {key: 'flag' if key in flag_values else 'file' if key in file_values else 'default'
               for key in RunConfig.keys()}
    if merged.get('budget') == 'large-model':
        # das Preset ersetzt nur Werte, die nirgends explizit gesetzt sind
        for key in ('n', 'probes'):
            if key not in merged:
                merged[key] = LARGE_MODEL_BUDGET[key]
                sources[key] = 'budget'
    return RunConfig(**merged, sources=sources)
