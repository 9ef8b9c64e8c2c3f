"""
Estimators - Monte-Carlo-Schätzer für FI, FIR, MMSE und FIR-Abweichungen

Alle Schätzer arbeiten gegen ein beliebiges ScoreOracle. Stichproben und
Probe-Vektoren kommen blockweise aus seeded Streams; die Blockgrenzen sind
fest, daher sind die Ergebnisse für jede Thread-Anzahl bitgleich.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial.hermite_e import hermegauss

from .measures import BaseMeasure, EmpiricalMeasure, MissingCapabilityError, ScoreOracle, check_tau
from .rng import CHUNK_SIZE, chunks, stream

# Schwelle für das Flag "unstable": clustered stderr > 20 % von |mean|
UNSTABLE_FRACTION = 0.2

DEFAULT_N = 1000
DEFAULT_PROBES = 50
LARGE_MODEL_BUDGET = {'n': 200, 'probes': 20}
# bis zu dieser Dimension wird ||Hess||_F^2 direkt aus der Posterior-Kovarianz gebildet
FROBENIUS_DIRECT_MAX_DIM = 8


@dataclass
class TauGrid:
    """Aufsteigendes Gitter positiver Rauschvarianzen tau"""
    values: np.ndarray
    spacing: str = "log-sqrt"

    SPACINGS = ('log-sqrt', 'log', 'linear')

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.spacing not in self.SPACINGS:
            raise ValueError(f"Unbekannte Gitterart '{self.spacing}' (gültig: {', '.join(self.SPACINGS)})")
        if self.values.size < 1 or np.any(self.values <= 0.0):
            raise ValueError("tau-Gitter braucht positive Werte")
        if np.any(np.diff(self.values) <= 0.0):
            raise ValueError("tau-Gitter muss streng aufsteigend sein")

    @classmethod
    def log_sqrt(cls, lo: float = 0.01, hi: float = 80.0, count: int = 64) -> 'TauGrid':
        """sqrt(tau) logarithmisch verteilt in [lo, hi]"""
        return cls(np.geomspace(lo, hi, count) ** 2, 'log-sqrt')

    @classmethod
    def log(cls, lo: float, hi: float, count: int) -> 'TauGrid':
        return cls(np.geomspace(lo, hi, count), 'log')

    @classmethod
    def linear(cls, lo: float, hi: float, count: int) -> 'TauGrid':
        return cls(np.linspace(lo, hi, count), 'linear')

    @classmethod
    def parse(cls, text: str) -> 'TauGrid':
        """Format <spacing>:<lo>:<hi>:<count>, bei log-sqrt sind lo/hi sqrt(tau)-Grenzen"""
        try:
            spacing, lo, hi, count = text.split(':')
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError:
            raise ValueError(f"Ungültiges Gitter '{text}' (Format: spacing:lo:hi:count)")
        builders = {'log-sqrt': cls.log_sqrt, 'log': cls.log, 'linear': cls.linear}
        if spacing not in builders:
            raise ValueError(f"Unbekannte Gitterart '{spacing}'")
        return builders[spacing](lo, hi, count)

    @property
    def sqrt(self) -> np.ndarray:
        return np.sqrt(self.values)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())


@dataclass
class EstimateWithError:
    """Schätzwert mit Standardfehler (Stichproben-Std / sqrt(n))"""
    mean: float
    stderr: float
    n_samples: int
    n_probes: int = 0
    stderr_naive: Optional[float] = None
    flags: Tuple[str, ...] = ()

    @classmethod
    def exact(cls, value: float) -> 'EstimateWithError':
        return cls(mean=float(value), stderr=0.0, n_samples=0, flags=('exact',))

    def __post_init__(self):
        flags = list(self.flags)
        if self.mean < 0.0 and 'negative' not in flags:
            flags.append('negative')
        if self.stderr > UNSTABLE_FRACTION * abs(self.mean) and 'unstable' not in flags:
            flags.append('unstable')
        self.flags = tuple(flags)

    def to_dict(self) -> dict:
        return {'mean': self.mean, 'stderr': self.stderr, 'n_samples': self.n_samples,
                'n_probes': self.n_probes, 'stderr_naive': self.stderr_naive,
                'flags': list(self.flags)}


@dataclass
class DiagnosticCurve:
    """FI, FIR, MMSE und Widerstandszerlegung entlang eines tau-Gitters"""
    grid: TauGrid
    fi: List[EstimateWithError]
    fir: List[EstimateWithError]
    mmse: List[EstimateWithError]
    resistance: List[EstimateWithError]
    noise_gain: np.ndarray
    complexity_penalty: np.ndarray
    dim: int
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.grid)
        lengths = {len(self.fi), len(self.fir), len(self.mmse), len(self.resistance),
                   len(self.noise_gain), len(self.complexity_penalty)}
        if lengths != {n}:
            raise ValueError(f"Kurvenlängen {sorted(lengths)} passen nicht zur Gitterlänge {n}")

    @property
    def fi_mean(self) -> np.ndarray:
        return np.array([e.mean for e in self.fi])

    @property
    def fir_mean(self) -> np.ndarray:
        return np.array([e.mean for e in self.fir])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'tau': self.grid.values,
            'sqrt_tau': self.grid.sqrt,
            'fi_mean': self.fi_mean,
            'fi_stderr': [e.stderr for e in self.fi],
            'fir_mean': self.fir_mean,
            'fir_stderr': [e.stderr for e in self.fir],
            'mmse': [e.mean for e in self.mmse],
            'resistance_total': [e.mean for e in self.resistance],
            'noise_gain': self.noise_gain,
            'complexity_penalty': self.complexity_penalty,
        })


# ---------------------------------------------------------------------------
# Hilfsfunktionen
# ---------------------------------------------------------------------------

def _require(o: ScoreOracle, sampler: bool = False, hvp: bool = False):
    if sampler and not o.has_sampler:
        raise MissingCapabilityError(f"Orakel '{o.name}' hat keinen Sampler")
    if hvp and not o.has_hvp:
        raise MissingCapabilityError(f"Orakel '{o.name}' bietet keine Hessian-Vektor-Produkte")


def _map_chunks(fn: Callable[[int, int, int], np.ndarray], count: int, workers: int = 1,
                size: int = CHUNK_SIZE) -> np.ndarray:
    """Wendet fn auf feste Blöcke an und fügt in Blockreihenfolge zusammen"""
    blocks = list(chunks(count, size))
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda blk: fn(*blk), blocks))
    else:
        parts = [fn(*blk) for blk in blocks]
    return np.concatenate(parts, axis=0)


def _draw_probes(rng: np.random.Generator, shape: Tuple[int, ...], probe: str) -> np.ndarray:
    if probe == 'rademacher':
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if probe == 'gaussian':
        return rng.standard_normal(shape)
    raise ValueError(f"Unbekannte Probe-Verteilung '{probe}' (gültig: rademacher, gaussian)")


def _summarize(values: np.ndarray, n_probes: int = 0) -> EstimateWithError:
    """Mittelwert und stderr; bei Probe-Matrizen (n, m) zusätzlich clustered stderr"""
    if values.ndim == 2:
        n, m = values.shape
        flat = values.reshape(-1)
        naive = float(flat.std(ddof=1) / np.sqrt(flat.size)) if flat.size > 1 else 0.0
        if n > 1:
            clustered = float(values.mean(axis=1).std(ddof=1) / np.sqrt(n))
        else:
            clustered = naive
        return EstimateWithError(mean=float(flat.mean()), stderr=clustered, n_samples=n,
                                 n_probes=m, stderr_naive=naive)
    n = values.size
    stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return EstimateWithError(mean=float(values.mean()), stderr=stderr, n_samples=n,
                             n_probes=n_probes, stderr_naive=stderr)


# ---------------------------------------------------------------------------
# FI / FIR
# ---------------------------------------------------------------------------

def estimate_fi(o: ScoreOracle, tau: float, n: int = DEFAULT_N, seed: int = 0,
                workers: int = 1) -> EstimateWithError:
    """
    FI(tau) = E ||s_tau(x)||^2 aus n geglätteten Stichproben

    Args:
        o: Orakel mit Sampler
        tau: Rauschvarianz
        n: Anzahl Stichproben (>= 2)
        seed: Seed
        workers: Threads für die Score-Auswertung (ändert das Ergebnis nicht)

    Returns:
        EstimateWithError
    """
    tau = check_tau(tau)
    _require(o, sampler=True)
    if n < 2:
        raise ValueError(f"estimate_fi braucht n >= 2, erhalten: {n}")
    x = o.sample(tau, n, seed)

    def block(_index, start, stop):
        return np.sum(o.score(x[start:stop], tau) ** 2, axis=1)

    return _summarize(_map_chunks(block, n, workers))


def _probe_matrix(o: ScoreOracle, x: np.ndarray, m_probes: int, seed: int, probe: str,
                  directional: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  workers: int) -> np.ndarray:
    k = o.dim

    def block(index, start, stop):
        rows = stop - start
        probes = _draw_probes(stream(seed, "probe", index), (rows, m_probes, k), probe)
        xs = np.repeat(x[start:stop], m_probes, axis=0)
        jv = directional(xs, probes.reshape(-1, k))
        return np.sum(jv ** 2, axis=1).reshape(rows, m_probes)

    # kleinere Blöcke, da jede Zeile m_probes Auswertungen trägt
    size = max(1, CHUNK_SIZE // max(1, m_probes) * 8)
    return _map_chunks(block, x.shape[0], workers, size=size)


def estimate_fir_jvp(o: ScoreOracle, tau: float, n: int = DEFAULT_N,
                     m_probes: int = DEFAULT_PROBES, seed: int = 0, probe: str = 'rademacher',
                     workers: int = 1) -> EstimateWithError:
    """
    Hutchinson-Schätzer (1/(n m)) sum ||H(x_n) v_m||^2 mit exakten Hessian-Vektor-Produkten

    stderr ist der nach Stichproben geclusterte Standardfehler;
    stderr_naive behandelt jedes (Stichprobe, Probe)-Paar als Beobachtung.
    """
    tau = check_tau(tau)
    _require(o, sampler=True, hvp=True)
    if n < 1 or m_probes < 1:
        raise ValueError("n und m_probes müssen >= 1 sein")
    x = o.sample(tau, n, seed)
    values = _probe_matrix(o, x, m_probes, seed, probe,
                           lambda xs, vs: o.hessian_vp(xs, tau, vs), workers)
    return _summarize(values)


def estimate_fir_fd(o: ScoreOracle, tau: float, n: int = DEFAULT_N,
                    m_probes: int = DEFAULT_PROBES, fd_step: Optional[float] = None,
                    seed: int = 0, probe: str = 'rademacher', workers: int = 1) -> EstimateWithError:
    """Wie estimate_fir_jvp, mit (s(x + eps v) - s(x)) / eps statt H v"""
    tau = check_tau(tau)
    _require(o, sampler=True)
    if n < 1 or m_probes < 1:
        raise ValueError("n und m_probes müssen >= 1 sein")
    step = 1e-4 * np.sqrt(tau) if fd_step is None else float(fd_step)
    if not step > 0.0:
        raise ValueError(f"fd_step muss positiv sein, erhalten: {fd_step}")
    x = o.sample(tau, n, seed)

    def directional(xs, vs):
        return (o.score(xs + step * vs, tau) - o.score(xs, tau)) / step

    return _summarize(_probe_matrix(o, x, m_probes, seed, probe, directional, workers))


def estimate_fir_pathwise(o: ScoreOracle, tau: float, n: int = DEFAULT_N, seed: int = 0,
                          rel_step: float = 1e-3) -> EstimateWithError:
    """
    -dFI/dtau über zentrale Differenzen von ||s_tau(x0 + sqrt(tau) n)||^2 pro Stichprobe

    (x0, n) werden für tau(1 - h) und tau(1 + h) geteilt.
    """
    tau = check_tau(tau)
    _require(o, sampler=True)
    clean, noise = o.sample_pairs(n, seed)
    lo, hi = tau * (1.0 - rel_step), tau * (1.0 + rel_step)
    q_lo = np.sum(o.score(clean + np.sqrt(lo) * noise, lo) ** 2, axis=1)
    q_hi = np.sum(o.score(clean + np.sqrt(hi) * noise, hi) ** 2, axis=1)
    return _summarize((q_lo - q_hi) / (hi - lo))


def gauss_hermite_rule(dim: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor-Gauß-Hermite-Regel für N(0, I_dim); Gewichte summieren zu 1"""
    nodes_1d, weights_1d = hermegauss(order)
    weights_1d = weights_1d / weights_1d.sum()
    grids = np.meshgrid(*([nodes_1d] * dim), indexing='ij')
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = np.ones(nodes.shape[0])
    for axis_weights in np.meshgrid(*([weights_1d] * dim), indexing='ij'):
        weights = weights * axis_weights.reshape(-1)
    return nodes, weights


def _quadrature(o: ScoreOracle, nodes: EmpiricalMeasure, tau: float, order: int,
                integrand: Callable[[np.ndarray], np.ndarray]) -> EstimateWithError:
    tau = check_tau(tau)
    noise, noise_w = gauss_hermite_rule(o.dim, order)
    total = 0.0
    per_atom = max(1, CHUNK_SIZE * 4 // noise.shape[0])
    for start in range(0, nodes.n_atoms, per_atom):
        atoms = nodes.samples[start:start + per_atom]
        points = (atoms[:, None, :] + np.sqrt(tau) * noise[None, :, :]).reshape(-1, o.dim)
        weights = (nodes.weights[start:start + per_atom, None] * noise_w[None, :]).reshape(-1)
        total += float(weights @ integrand(points))
    return EstimateWithError(mean=total, stderr=0.0, n_samples=nodes.n_atoms * noise.shape[0],
                             flags=('quadrature',))


def estimate_fi_quadrature(o: ScoreOracle, nodes: EmpiricalMeasure, tau: float,
                           order: int = 16) -> EstimateWithError:
    """Deterministische FI für ein Maß aus gewichteten Knoten (Gauß-Hermite über das Rauschen)"""
    return _quadrature(o, nodes, tau, order,
                       lambda pts: np.sum(o.score(pts, tau) ** 2, axis=1))


def frobenius_sq(o: ScoreOracle, points: np.ndarray, tau: float) -> np.ndarray:
    """||grad s(x)||_F^2 pro Punkt; exakt über das Orakel, falls es die Norm direkt liefert"""
    if hasattr(o, 'hessian_frobenius_sq') and o.dim <= FROBENIUS_DIRECT_MAX_DIM:
        return o.hessian_frobenius_sq(points, tau)
    out = np.zeros(points.shape[0])
    for j in range(o.dim):
        basis = np.zeros(o.dim)
        basis[j] = 1.0
        out += np.sum(o.hessian_vp(points, tau, basis) ** 2, axis=1)
    return out


def estimate_fir_quadrature(o: ScoreOracle, nodes: EmpiricalMeasure, tau: float,
                            order: int = 16) -> EstimateWithError:
    """Deterministische FIR mit exakter Frobenius-Norm aus k Basis-HVPs"""
    _require(o, hvp=True)
    return _quadrature(o, nodes, tau, order, lambda pts: frobenius_sq(o, pts, tau))


# ---------------------------------------------------------------------------
# MMSE und Zerlegung
# ---------------------------------------------------------------------------

def mmse_from_fi(tau, k: int, fi):
    """MMSE(tau) = tau k - tau^2 FI"""
    tau = np.asarray(tau, dtype=np.float64)
    return tau * k - tau ** 2 * np.asarray(fi, dtype=np.float64)


def denoising_resistance(tau, k: int, fi, fir):
    """
    dMMSE/dtau = (k - 2 tau FI) + tau^2 FIR

    Returns:
        Tuple (total, noise_gain, complexity_penalty)
    """
    tau = np.asarray(tau, dtype=np.float64)
    noise_gain = k - 2.0 * tau * np.asarray(fi, dtype=np.float64)
    penalty = tau ** 2 * np.asarray(fir, dtype=np.float64)
    return noise_gain + penalty, noise_gain, penalty


def empirical_mmse(e: EmpiricalMeasure, tau: float, n: int = DEFAULT_N,
                   seed: int = 0) -> EstimateWithError:
    """E ||x0 - E[x0 | x]||^2 über Paare (x0, x = x0 + sqrt(tau) n)"""
    tau = check_tau(tau)
    clean, noise = e.sample_pairs(n, seed)
    x = clean + np.sqrt(tau) * noise

    def block(_index, start, stop):
        post = e.posterior(x[start:stop], tau)
        return np.sum((clean[start:stop] - post.mean) ** 2, axis=1)

    return _summarize(_map_chunks(block, n))


# ---------------------------------------------------------------------------
# Abweichungen
# ---------------------------------------------------------------------------

def fir_deviation(r_ambient, r_latent):
    """D_R = |1 - R_ambient / R_latent|"""
    latent = np.asarray(r_latent, dtype=np.float64)
    if np.any(latent <= 0.0):
        raise ValueError("r_latent muss positiv sein")
    result = np.abs(1.0 - np.asarray(r_ambient, dtype=np.float64) / latent)
    return float(result) if result.ndim == 0 else result


def fir_deviation_scaled(r_ambient, r_latent, D: int, d: int, m: int):
    """Dimensionsnormierte Abweichung |1 - ((d - m)/(D - m)) R_ambient / R_latent|"""
    if D <= m or d <= m:
        raise ValueError(f"Skalierungsfaktor undefiniert: D={D}, d={d}, m={m} (verlangt D > m, d > m)")
    latent = np.asarray(r_latent, dtype=np.float64)
    if np.any(latent <= 0.0):
        raise ValueError("r_latent muss positiv sein")
    factor = (d - m) / (D - m)
    result = np.abs(1.0 - factor * np.asarray(r_ambient, dtype=np.float64) / latent)
    return float(result) if result.ndim == 0 else result


def deviation_table(ambient: DiagnosticCurve, latent: DiagnosticCurve,
                    D: Optional[int] = None, d: Optional[int] = None,
                    m: Optional[int] = None) -> pd.DataFrame:
    """Punktweise Abweichungen zweier Kurven auf identischem Gitter"""
    if not np.array_equal(ambient.grid.values, latent.grid.values):
        raise ValueError("tau-Gitter der beiden Kurven stimmen nicht exakt überein")
    frame = pd.DataFrame({'tau': ambient.grid.values,
                          'fir_ambient': ambient.fir_mean,
                          'fir_latent': latent.fir_mean})
    frame['deviation'] = fir_deviation(frame['fir_ambient'].to_numpy(), frame['fir_latent'].to_numpy())
    if D is not None and d is not None and m is not None:
        frame['deviation_scaled'] = fir_deviation_scaled(
            frame['fir_ambient'].to_numpy(), frame['fir_latent'].to_numpy(), D, d, m)
    return frame


def fir_from_fi_curve(curve: Union[DiagnosticCurve, Tuple[Sequence[float], Sequence[float]]]) -> np.ndarray:
    """
    -dFI/dtau aus zentralen Differenzen der FI-Kurve

    Auf Gittern mit gleichmäßigem log(tau) wird in log(tau) differenziert
    (Fünf-Punkte-Stern im Inneren, einseitige Stencils vierter Ordnung
    an den Rändern, ab fünf Punkten); sonst np.gradient in tau.
    """
    if isinstance(curve, DiagnosticCurve):
        tau, fi = curve.grid.values, curve.fi_mean
    else:
        tau, fi = (np.asarray(a, dtype=np.float64) for a in curve)
    if tau.size < 3:
        raise ValueError("Mindestens 3 Gitterpunkte nötig")
    u = np.log(tau)
    steps = np.diff(u)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return -np.gradient(fi, tau, edge_order=2)
    h = steps[0]
    deriv = np.gradient(fi, h, edge_order=2)
    if fi.size >= 5:
        deriv[2:-2] = (fi[:-4] - 8.0 * fi[1:-3] + 8.0 * fi[3:-1] - fi[4:]) / (12.0 * h)
        # einseitige Stencils vierter Ordnung an den Rändern
        deriv[0] = (-25.0 * fi[0] + 48.0 * fi[1] - 36.0 * fi[2] + 16.0 * fi[3] - 3.0 * fi[4]) / (12.0 * h)
        deriv[1] = (-3.0 * fi[0] - 10.0 * fi[1] + 18.0 * fi[2] - 6.0 * fi[3] + fi[4]) / (12.0 * h)
        deriv[-1] = (25.0 * fi[-1] - 48.0 * fi[-2] + 36.0 * fi[-3] - 16.0 * fi[-4] + 3.0 * fi[-5]) / (12.0 * h)
        deriv[-2] = (3.0 * fi[-1] + 10.0 * fi[-2] - 18.0 * fi[-3] + 6.0 * fi[-4] - fi[-5]) / (12.0 * h)
    return -deriv / tau


# ---------------------------------------------------------------------------
# Kurven
# ---------------------------------------------------------------------------

def _curve_from_values(grid: TauGrid, k: int, fi: List[EstimateWithError],
                       fir: List[EstimateWithError], provenance: dict) -> DiagnosticCurve:
    tau = grid.values
    fi_mean = np.array([e.mean for e in fi])
    fir_mean = np.array([e.mean for e in fir])
    total, gain, penalty = denoising_resistance(tau, k, fi_mean, fir_mean)
    mmse_vals = mmse_from_fi(tau, k, fi_mean)
    mmse = [EstimateWithError(mean=float(v), stderr=float(t ** 2 * e.stderr), n_samples=e.n_samples)
            for v, t, e in zip(mmse_vals, tau, fi)]
    resistance = [EstimateWithError(mean=float(v),
                                    stderr=float(np.hypot(2.0 * t * a.stderr, t ** 2 * b.stderr)),
                                    n_samples=a.n_samples, n_probes=b.n_probes)
                  for v, t, a, b in zip(total, tau, fi, fir)]
    return DiagnosticCurve(grid=grid, fi=fi, fir=fir, mmse=mmse, resistance=resistance,
                           noise_gain=gain, complexity_penalty=penalty, dim=k,
                           provenance=provenance)


def analytic_curve(measure: BaseMeasure, grid: TauGrid) -> DiagnosticCurve:
    """Kurve aus geschlossenen Formeln (Gauß, Unterraum, Produkte davon)"""
    if not hasattr(measure, 'fi_exact'):
        raise MissingCapabilityError(f"Maß '{measure.name}' hat keine geschlossene Form")
    fi = [EstimateWithError.exact(measure.fi_exact(t)) for t in grid]
    fir = [EstimateWithError.exact(measure.fir_exact(t)) for t in grid]
    return _curve_from_values(grid, measure.dim, fi, fir,
                              {'oracle': measure.name, 'source': 'analytic'})


def diagnostic_sweep(o: ScoreOracle, grid: TauGrid, n: int = DEFAULT_N,
                     m_probes: int = DEFAULT_PROBES, seed: int = 0, method: str = 'auto',
                     probe: str = 'rademacher', workers: int = 1,
                     progress_callback: Optional[Callable[[str], None]] = None) -> DiagnosticCurve:
    """
    FI, FIR, MMSE und Widerstand für jedes tau des Gitters

    Args:
        method: 'jvp', 'fd' oder 'auto' (jvp, falls das Orakel HVPs bietet)
        workers: parallele tau-Auswertungen; das Ergebnis hängt nicht davon ab
        progress_callback: Optionale Callback-Funktion für Fortschrittsmeldungen
    """
    if method == 'auto':
        method = 'jvp' if o.has_hvp else 'fd'
    if method not in ('jvp', 'fd'):
        raise ValueError(f"Unbekannte FIR-Methode '{method}' (gültig: jvp, fd, auto)")

    def one(tau):
        fi = estimate_fi(o, tau, n, seed)
        if method == 'jvp':
            fir = estimate_fir_jvp(o, tau, n, m_probes, seed, probe)
        else:
            fir = estimate_fir_fd(o, tau, n, m_probes, None, seed, probe)
        if progress_callback:
            progress_callback(f"tau={tau:.4g}: FI={fi.mean:.6g} ± {fi.stderr:.2g}, "
                              f"FIR={fir.mean:.6g} ± {fir.stderr:.2g}")
        return fi, fir

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(tau) for tau in grid]

    provenance = {'oracle': o.name, 'seed': seed, 'n': n, 'm_probes': m_probes,
                  'method': method, 'probe': probe, 'source': 'monte_carlo'}
    return _curve_from_values(grid, o.dim, [r[0] for r in results], [r[1] for r in results],
                              provenance)
