"""
Measures - Maße auf R^k, ihre Wärmeleitungs-Glättung und exakte Score-Orakel

Ein Orakel liefert für das geglättete Maß mu_tau = mu * N(0, tau I)
den Score s_tau(x), Hessian-Vektor-Produkte und Stichproben.
Alle Orakel arbeiten auf Batches: x hat die Form (B, k) oder (k,).
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist
from scipy.special import softmax

from .rng import chunks, stream

# Obergrenze für B x N Zwischenmatrizen der Mischungs-Orakel
_MIXTURE_BLOCK_ELEMENTS = 2_000_000

# Zwischengespeicherte Cholesky-Faktoren pro Gauß-Maß (je ein tau)
FACTOR_CACHE_SIZE = 256


class DimensionError(ValueError):
    """Eingabe passt nicht zur Dimension des Maßes"""


class MissingCapabilityError(ValueError):
    """Orakel bietet die angeforderte Fähigkeit (Sampler, HVP) nicht an"""


def as_batch(x, dim: int, what: str = "x") -> Tuple[np.ndarray, bool]:
    """
    Wandelt einen Punkt oder Batch in ein (B, dim)-Array um

    Returns:
        Tuple (Batch-Array float64, True falls die Eingabe ein einzelner Punkt war)
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(
            f"{what} hat Form {np.shape(x)}, erwartet wird Dimension {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} enthält NaN oder Inf")
    return arr, single


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0.0 or not np.isfinite(tau):
        raise ValueError(f"tau muss positiv und endlich sein, erhalten: {tau}")
    return tau


class ScoreOracle(ABC):
    """
    Schnittstelle für alles, was s_tau(x) auswerten kann

    Fähigkeiten werden über Klassenattribute angezeigt:
    has_exact_hessian (hessian_vp ist exakt), has_hvp (hessian_vp existiert)
    und has_sampler (sample ist verfügbar).
    """

    name = "oracle"
    has_exact_hessian = False
    has_hvp = False
    has_sampler = False

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def score(self, x, tau: float) -> np.ndarray:
        ...

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        raise MissingCapabilityError(
            f"Orakel '{self.name}' bietet keine Hessian-Vektor-Produkte an")

    def sample(self, tau: float, count: int, seed: int) -> np.ndarray:
        raise MissingCapabilityError(f"Orakel '{self.name}' hat keinen Sampler")

    def sample_pairs(self, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        raise MissingCapabilityError(f"Orakel '{self.name}' hat keinen Sampler")


class BaseMeasure(ScoreOracle):
    """Gemeinsame Logik aller Maße: Sampling x = x0 + sqrt(tau) n"""

    has_sampler = True
    has_hvp = True
    has_exact_hessian = True

    @abstractmethod
    def sample_clean(self, rng: np.random.Generator, count: int) -> np.ndarray:
        ...

    def sample_pairs(self, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Zieht (x0, n)-Paare blockweise aus seeded Streams

        Block b verwendet immer stream(seed, "sample", b); das Ergebnis
        hängt daher nur von seed und count ab.
        """
        if count < 1:
            raise ValueError(f"count muss >= 1 sein, erhalten: {count}")
        clean = np.empty((count, self.dim))
        noise = np.empty((count, self.dim))
        for index, start, stop in chunks(count):
            rng = stream(seed, "sample", index)
            clean[start:stop] = self.sample_clean(rng, stop - start)
            noise[start:stop] = rng.standard_normal((stop - start, self.dim))
        return clean, noise

    def sample(self, tau: float, count: int, seed: int) -> np.ndarray:
        tau = float(tau)
        if tau < 0.0:
            raise ValueError(f"tau darf nicht negativ sein: {tau}")
        clean, noise = self.sample_pairs(count, seed)
        if tau == 0.0:
            return clean
        return clean + np.sqrt(tau) * noise


class GaussianMeasure(BaseMeasure):
    """
    Gauß-Maß N(mean, covariance); geglättet N(mean, covariance + tau I)

    Args:
        mean: Mittelwert der Länge k
        covariance: symmetrische positiv semidefinite k x k Matrix
    """

    def __init__(self, mean, covariance, name: str = "gaussian"):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.covariance = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        k = self.mean.shape[0]
        if self.covariance.shape != (k, k):
            raise DimensionError(
                f"Kovarianz hat Form {self.covariance.shape}, erwartet ({k}, {k})")
        scale = max(1.0, float(np.max(np.abs(self.covariance))))
        if np.max(np.abs(self.covariance - self.covariance.T)) > 1e-12 * scale:
            raise ValueError("Kovarianz ist nicht symmetrisch (Toleranz 1e-12)")
        eigvals, eigvecs = np.linalg.eigh(self.covariance)
        if eigvals.min() < -1e-12 * scale:
            raise ValueError(f"Kovarianz hat negativen Eigenwert {eigvals.min():.3e}")
        self._eigvals = np.clip(eigvals, 0.0, None)
        self._eigvecs = eigvecs
        self._factor = lru_cache(maxsize=FACTOR_CACHE_SIZE)(self._cholesky)
        self.name = name

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def _cholesky(self, tau: float):
        return cho_factor(self.covariance + tau * np.eye(self.dim), lower=True)

    def score(self, x, tau: float) -> np.ndarray:
        tau = check_tau(tau)
        batch, single = as_batch(x, self.dim)
        result = -cho_solve(self._factor(tau), (batch - self.mean).T).T
        return result[0] if single else result

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        tau = check_tau(tau)
        batch, single = as_batch(x, self.dim)
        vecs = np.broadcast_to(np.asarray(v, dtype=np.float64), batch.shape)
        result = -cho_solve(self._factor(tau), vecs.T).T
        return result[0] if single else result

    def fi_exact(self, tau: float) -> float:
        tau = check_tau(tau)
        return float(np.sum(1.0 / (self._eigvals + tau)))

    def fir_exact(self, tau: float) -> float:
        tau = check_tau(tau)
        return float(np.sum(1.0 / (self._eigvals + tau) ** 2))

    def sample_clean(self, rng: np.random.Generator, count: int) -> np.ndarray:
        root = self._eigvecs * np.sqrt(self._eigvals)
        return self.mean + rng.standard_normal((count, self.dim)) @ root.T

    def transformed(self, matrix, offset=None) -> 'GaussianMeasure':
        """Bildmaß unter x -> A x + b (exakt für Gauß-Maße)"""
        A = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        mean = A @ self.mean
        if offset is not None:
            mean = mean + np.asarray(offset, dtype=np.float64)
        cov = A @ self.covariance @ A.T
        return GaussianMeasure(mean, 0.5 * (cov + cov.T), name=self.name)

    def scaled(self, factor: float) -> 'GaussianMeasure':
        return self.transformed(factor * np.eye(self.dim))

    def to_json(self) -> dict:
        return {'kind': 'gaussian', 'mean': self.mean.tolist(),
                'covariance': self.covariance.tolist()}


class SubspaceGaussian(BaseMeasure):
    """
    Gauß-Maß auf einem flachen m-dimensionalen Unterraum von R^k

    Args:
        embedding: k x m Matrix mit orthonormalen Spalten
        intrinsic_covariance: symmetrisch positiv definite m x m Matrix
    """

    def __init__(self, embedding, intrinsic_covariance, name: str = "subspace"):
        self.embedding = np.atleast_2d(np.asarray(embedding, dtype=np.float64))
        self.intrinsic_covariance = np.atleast_2d(
            np.asarray(intrinsic_covariance, dtype=np.float64))
        k, m = self.embedding.shape
        if m > k:
            raise ValueError(f"Unterraumdimension {m} größer als Umgebungsdimension {k}")
        if self.intrinsic_covariance.shape != (m, m):
            raise DimensionError(
                f"intrinsische Kovarianz hat Form {self.intrinsic_covariance.shape}, "
                f"erwartet ({m}, {m})")
        if np.max(np.abs(self.embedding.T @ self.embedding - np.eye(m))) > 1e-10:
            raise ValueError("Einbettung hat keine orthonormalen Spalten (Toleranz 1e-10)")
        self.intrinsic = GaussianMeasure(np.zeros(m), self.intrinsic_covariance,
                                         name=f"{name}-intrinsic")
        if np.min(self.intrinsic._eigvals) <= 0.0:
            raise ValueError("intrinsische Kovarianz ist nicht positiv definit")
        self.ambient = self.intrinsic.transformed(self.embedding)
        self.name = name

    @classmethod
    def standard(cls, m: int, k: int) -> 'SubspaceGaussian':
        """N(0, I_m) auf den ersten m Koordinaten von R^k"""
        return cls(np.eye(k, m), np.eye(m), name=f"subspace-{m}-in-{k}")

    @property
    def intrinsic_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.embedding.shape[0]

    @property
    def dim(self) -> int:
        return self.ambient_dim

    def score(self, x, tau: float) -> np.ndarray:
        return self.ambient.score(x, tau)

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        return self.ambient.hessian_vp(x, tau, v)

    def sample_clean(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.intrinsic.sample_clean(rng, count) @ self.embedding.T

    def tangential_fi_exact(self, tau: float) -> float:
        """FI des intrinsischen Maßes (Tangentialanteil des Scores)"""
        return self.intrinsic.fi_exact(tau)

    def fi_exact(self, tau: float) -> float:
        tau = check_tau(tau)
        return self.intrinsic.fi_exact(tau) + (self.ambient_dim - self.intrinsic_dim) / tau

    def fir_exact(self, tau: float) -> float:
        tau = check_tau(tau)
        normal = (self.ambient_dim - self.intrinsic_dim) / tau ** 2
        return self.intrinsic.fir_exact(tau) + normal

    def to_json(self) -> dict:
        return {'kind': 'subspace', 'embedding': self.embedding.tolist(),
                'intrinsic_covariance': self.intrinsic_covariance.tolist()}


@dataclass
class MixturePosterior:
    """Posterior über die Atome einer Mischung für einen Batch von Punkten"""
    weights: np.ndarray
    mean: np.ndarray
    atoms: np.ndarray

    def cov_vp(self, v) -> np.ndarray:
        """Cov_post v = sum_i w_i <x_i - m, v> (x_i - m), ohne dichte Matrix"""
        vecs = np.broadcast_to(np.asarray(v, dtype=np.float64), self.mean.shape)
        centered = vecs @ self.atoms.T - np.sum(vecs * self.mean, axis=1)[:, None]
        weighted = self.weights * centered
        return weighted @ self.atoms - weighted.sum(axis=1)[:, None] * self.mean


class EmpiricalMeasure(BaseMeasure):
    """
    Atomares Maß sum_i w_i delta_{x_i}; geglättet eine N-komponentige Gauß-Mischung

    Args:
        samples: N x k Matrix der Atome
        weights: optionale nichtnegative Gewichte mit Summe 1 (Standard: uniform)
    """

    def __init__(self, samples, weights=None, name: str = "empirical"):
        self.samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if self.samples.shape[0] < 1:
            raise ValueError("Empirisches Maß braucht mindestens ein Atom")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("Atome enthalten NaN oder Inf")
        n_atoms = self.samples.shape[0]
        if weights is None:
            self.weights = np.full(n_atoms, 1.0 / n_atoms)
            self._uniform = True
        else:
            self.weights = np.asarray(weights, dtype=np.float64).reshape(-1)
            if self.weights.shape[0] != n_atoms:
                raise DimensionError(
                    f"{self.weights.shape[0]} Gewichte für {n_atoms} Atome")
            if np.any(self.weights < 0.0):
                raise ValueError("Gewichte dürfen nicht negativ sein")
            if abs(self.weights.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"Gewichte summieren sich zu {self.weights.sum():.15f} statt 1")
            self._uniform = False
        with np.errstate(divide='ignore'):
            self.log_weights = np.log(self.weights)
        self._atom_sq = np.sum(self.samples ** 2, axis=1)
        self.name = name

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.samples.shape[0]

    def _blocks(self, rows: int):
        step = max(1, _MIXTURE_BLOCK_ELEMENTS // self.n_atoms)
        for start in range(0, rows, step):
            yield start, min(start + step, rows)

    def _posterior_block(self, batch: np.ndarray, tau: float) -> MixturePosterior:
        logits = self.log_weights[None, :] - cdist(batch, self.samples, 'sqeuclidean') / (2.0 * tau)
        weights = softmax(logits, axis=1)
        return MixturePosterior(weights=weights, mean=weights @ self.samples,
                                atoms=self.samples)

    def posterior(self, x, tau: float) -> MixturePosterior:
        """
        Posterior-Gewichte (log-sum-exp stabilisiert) und -Mittelwert

        Für große Batches wird blockweise gerechnet; die Gewichtsmatrix
        hat dann Form (B, N).
        """
        tau = check_tau(tau)
        batch, _ = as_batch(x, self.dim)
        parts = [self._posterior_block(batch[a:b], tau) for a, b in self._blocks(len(batch))]
        return MixturePosterior(weights=np.vstack([p.weights for p in parts]),
                                mean=np.vstack([p.mean for p in parts]),
                                atoms=self.samples)

    def score(self, x, tau: float) -> np.ndarray:
        tau = check_tau(tau)
        batch, single = as_batch(x, self.dim)
        result = np.empty_like(batch)
        for a, b in self._blocks(len(batch)):
            post = self._posterior_block(batch[a:b], tau)
            # Tweedie: s = (E[x0|x] - x) / tau
            result[a:b] = (post.mean - batch[a:b]) / tau
        return result[0] if single else result

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        tau = check_tau(tau)
        batch, single = as_batch(x, self.dim)
        vecs = np.broadcast_to(np.asarray(v, dtype=np.float64), batch.shape)
        result = np.empty_like(batch)
        for a, b in self._blocks(len(batch)):
            post = self._posterior_block(batch[a:b], tau)
            result[a:b] = post.cov_vp(vecs[a:b]) / tau ** 2 - vecs[a:b] / tau
        return result[0] if single else result

    def hessian_frobenius_sq(self, x, tau: float) -> np.ndarray:
        """
        ||Hess log p_tau(x)||_F^2 pro Punkt aus der zentrierten Posterior-Kovarianz

        Hess = Cov_post / tau^2 - I / tau; ein Posterior-Durchlauf pro Block.
        """
        tau = check_tau(tau)
        batch, single = as_batch(x, self.dim)
        result = np.empty(len(batch))
        eye = np.eye(self.dim)
        step = max(1, _MIXTURE_BLOCK_ELEMENTS // (self.n_atoms * self.dim))
        for a in range(0, len(batch), step):
            b = min(a + step, len(batch))
            post = self._posterior_block(batch[a:b], tau)
            centered = self.samples[None, :, :] - post.mean[:, None, :]
            weighted = post.weights[:, :, None] * centered
            cov = np.matmul(weighted.transpose(0, 2, 1), centered)
            result[a:b] = np.sum((cov / tau ** 2 - eye / tau) ** 2, axis=(1, 2))
        return result[0] if single else result

    def sample_clean(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self._uniform:
            index = rng.integers(0, self.n_atoms, size=count)
        else:
            index = rng.choice(self.n_atoms, size=count, p=self.weights)
        return self.samples[index]

    def mean_and_covariance(self) -> Tuple[np.ndarray, np.ndarray]:
        mean = self.weights @ self.samples
        centered = self.samples - mean
        return mean, (self.weights[:, None] * centered).T @ centered

    def permuted(self, permutation: Sequence[int]) -> 'EmpiricalMeasure':
        perm = np.asarray(permutation, dtype=int)
        if sorted(perm.tolist()) != list(range(self.dim)):
            raise ValueError(f"Ungültige Permutation der Koordinaten: {perm.tolist()}")
        weights = None if self._uniform else self.weights
        return EmpiricalMeasure(self.samples[:, perm], weights, name=f"{self.name}-perm")

    def save_csv(self, path: str, header: bool = True) -> Path:
        output_file = Path(path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        columns = [f"x{i + 1}" for i in range(self.dim)]
        frame = pd.DataFrame(self.samples, columns=columns)
        frame.to_csv(output_file, index=False, header=header, float_format='%.17g')
        return output_file

    @classmethod
    def load_csv(cls, path: str, header: bool = True) -> 'EmpiricalMeasure':
        input_file = Path(path)
        if not input_file.exists():
            raise ValueError(f"Datei nicht gefunden: {input_file}")
        frame = pd.read_csv(input_file, header=0 if header else None, float_precision='round_trip')
        return cls(frame.to_numpy(dtype=np.float64), name=input_file.stem)


class ProductMeasure(BaseMeasure):
    """
    Produkt unabhängiger Faktoren; Score und Hessian sind blockdiagonal

    FI und FIR addieren sich über die Faktoren.
    """

    def __init__(self, parts: List[BaseMeasure], name: str = "product"):
        if not parts:
            raise ValueError("Produktmaß braucht mindestens einen Faktor")
        self.parts = list(parts)
        self._bounds = np.cumsum([0] + [p.dim for p in self.parts])
        self.has_exact_hessian = all(p.has_exact_hessian for p in self.parts)
        self.name = name

    @property
    def dim(self) -> int:
        return int(self._bounds[-1])

    def _blockwise(self, fn: Callable, x, *extra) -> np.ndarray:
        batch, single = as_batch(x, self.dim)
        pieces = []
        for i, part in enumerate(self.parts):
            lo, hi = self._bounds[i], self._bounds[i + 1]
            args = [np.broadcast_to(np.asarray(e, dtype=np.float64), batch.shape)[:, lo:hi]
                    for e in extra]
            pieces.append(fn(part, batch[:, lo:hi], *args))
        result = np.hstack(pieces)
        return result[0] if single else result

    def score(self, x, tau: float) -> np.ndarray:
        return self._blockwise(lambda p, xs: p.score(xs, tau), x)

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        return self._blockwise(lambda p, xs, vs: p.hessian_vp(xs, tau, vs), x, v)

    def sample_clean(self, rng: np.random.Generator, count: int) -> np.ndarray:
        # ein Teilstrom pro Faktor
        children = rng.spawn(len(self.parts))
        return np.hstack([p.sample_clean(child, count) for p, child in zip(self.parts, children)])

    def fi_exact(self, tau: float) -> float:
        return float(sum(p.fi_exact(tau) for p in self.parts))

    def fir_exact(self, tau: float) -> float:
        return float(sum(p.fir_exact(tau) for p in self.parts))


# ---------------------------------------------------------------------------
# Operationen als Funktionen
# ---------------------------------------------------------------------------

def gaussian_score(g: GaussianMeasure, x, tau: float) -> np.ndarray:
    """-(Sigma + tau I)^-1 (x - mean) über Cholesky-Zerlegung"""
    return g.score(x, tau)


def gaussian_fi_exact(g: GaussianMeasure, tau: float) -> float:
    """Tr((Sigma + tau I)^-1)"""
    return g.fi_exact(tau)


def gaussian_fir_exact(g: GaussianMeasure, tau: float) -> float:
    """Tr((Sigma + tau I)^-2)"""
    return g.fir_exact(tau)


def mixture_posterior(e: EmpiricalMeasure, x, tau: float):
    """
    Posterior einer Mischung an einem Punkt oder Batch

    Returns:
        Tuple (Gewichte, Posterior-Mittelwert, Funktion v -> Cov_post v)
    """
    post = e.posterior(x, tau)
    single = np.asarray(x).ndim == 1
    if single:
        def cov_vp(v):
            return post.cov_vp(np.asarray(v, dtype=np.float64)[None, :])[0]
        return post.weights[0], post.mean[0], cov_vp
    return post.weights, post.mean, post.cov_vp


def mixture_score(e: EmpiricalMeasure, x, tau: float) -> np.ndarray:
    return e.score(x, tau)


def mixture_hessian_vp(e: EmpiricalMeasure, x, tau: float, v) -> np.ndarray:
    return e.hessian_vp(x, tau, v)


def sample_smoothed(measure: BaseMeasure, tau: float, count: int, seed: int) -> np.ndarray:
    """Zieht x = x0 + sqrt(tau) n; tau = 0 liefert saubere Stichproben"""
    return measure.sample(tau, count, seed)


def subspace_fir_exact(s: SubspaceGaussian, tau: float) -> float:
    """FIR des intrinsischen Maßes plus Normalanteil (k - m) / tau^2"""
    return s.fir_exact(tau)


def measure_from_json(path: str) -> BaseMeasure:
    """Lädt GaussianMeasure oder SubspaceGaussian aus einem JSON-Dokument"""
    input_file = Path(path)
    if not input_file.exists():
        raise ValueError(f"Datei nicht gefunden: {input_file}")
    with open(input_file, 'r', encoding='utf-8') as f:
        doc = json.load(f)
    kind = doc.get('kind')
    if kind == 'gaussian':
        return GaussianMeasure(doc['mean'], doc['covariance'], name=input_file.stem)
    if kind == 'subspace':
        return SubspaceGaussian(doc['embedding'], doc['intrinsic_covariance'],
                                name=input_file.stem)
    raise ValueError(f"Unbekannter Maßtyp '{kind}' in {input_file}")


def measure_to_json(measure: BaseMeasure, path: str) -> Path:
    output_file = Path(path)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    with open(output_file, 'w', encoding='utf-8') as f:
        json.dump(measure.to_json(), f, indent=2)
    return output_file


BUILTIN_MEASURES = {
    'gauss2d': lambda: GaussianMeasure(np.zeros(2), np.eye(2), name="gauss2d"),
}


def builtin_measure(name: str) -> GaussianMeasure:
    if name not in BUILTIN_MEASURES:
        valid = ", ".join(sorted(BUILTIN_MEASURES))
        raise ValueError(f"Unbekanntes eingebautes Maß '{name}' (gültig: {valid})")
    return BUILTIN_MEASURES[name]()


def measure_from_spec(text: str, header: bool = True) -> BaseMeasure:
    """
    Löst eine Maß-Angabe auf

    Formate: builtin:<name>, gaussian:<datei.json>, subspace:<m>:<k>,
    empirical:<datei.csv> oder ein blanker Pfad auf .csv.
    Modell-Orakel (model:...) löst die Kommandozeile auf.
    """
    kind, _, rest = text.partition(':')
    if kind == 'builtin':
        return builtin_measure(rest)
    if kind == 'gaussian':
        return measure_from_json(rest)
    if kind == 'subspace':
        try:
            m, k = (int(part) for part in rest.split(':'))
        except ValueError:
            raise ValueError(f"Ungültige Unterraum-Angabe '{text}' (Format: subspace:m:k)")
        return SubspaceGaussian.standard(m, k)
    if kind == 'empirical':
        return EmpiricalMeasure.load_csv(rest, header)
    if text.lower().endswith('.csv'):
        return EmpiricalMeasure.load_csv(text, header)
    raise ValueError(
        f"Unbekannte Maß-Angabe '{text}' (gültig: builtin:, gaussian:, subspace:, empirical:)")
