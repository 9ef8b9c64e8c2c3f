"""
Encoders - Encoder-Familie mit analytischen Jacobi-Matrizen und Krümmungsdaten

Enthält außerdem die geometrischen Schätzer: Isometrie-Defekt (delta),
Taylor-Residuum (epsilon) und bi-Lipschitz-Konstanten (c, C).
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, ndtr

from .measures import (BaseMeasure, DimensionError, EmpiricalMeasure, GaussianMeasure,
                       SubspaceGaussian, as_batch)
from .rng import stream

_PDF_NORM = 1.0 / np.sqrt(2.0 * np.pi)
_BILIP_BLOCK = 4_000_000


class DistributionalCurvatureError(ValueError):
    """Krümmung an einem Knick einer stückweise linearen Aktivierung (Dirac-Anteil)"""


class Encoder(ABC):
    """
    Basisklasse: Abbildung R^D -> R^d

    input_dim None bedeutet dimensionsunabhängig (punktweise Aktivierungen).
    """

    name = "encoder"
    smooth = True
    is_linear = False

    def __init__(self, input_dim: Optional[int] = None, output_dim: Optional[int] = None):
        self.input_dim = input_dim
        self.output_dim = output_dim if output_dim is not None else input_dim

    @property
    def differentiability(self) -> str:
        return "smooth" if self.smooth else "piecewise-linear"

    def out_dim_for(self, dim: int) -> int:
        return self.output_dim if self.output_dim is not None else dim

    def _batch(self, x) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        dim = self.input_dim if self.input_dim is not None else arr.shape[-1]
        return as_batch(arr, dim)

    def apply(self, x) -> np.ndarray:
        batch, single = self._batch(x)
        result = self._apply(batch)
        return result[0] if single else result

    def jacobian(self, x, return_kink_flag: bool = False):
        """
        Analytische Jacobi-Matrix, Form (d, D) bzw. (B, d, D)

        Args:
            return_kink_flag: liefert zusätzlich, ob ein Knick getroffen wurde
        """
        batch, single = self._batch(x)
        jac, kink = self._jacobian(batch)
        jac = jac[0] if single else jac
        if return_kink_flag:
            return jac, bool(np.any(kink))
        return jac

    def curvature(self, x, weights) -> np.ndarray:
        """Matrix sum_i w_i Hess(E_i)(x) der Form (D, D) für einen einzelnen Punkt"""
        point = np.asarray(x, dtype=np.float64).reshape(-1)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != self.out_dim_for(point.shape[0]):
            raise DimensionError(
                f"Gewichtsvektor hat Länge {w.shape[0]}, erwartet {self.out_dim_for(point.shape[0])}")
        return self._curvature(point, w)

    def taylor_bound_sq(self, h) -> np.ndarray:
        """
        Obere Schranke für ||R(h)||^2 aus konstanten Hessian-Majoranten

        R ist das Restglied erster Ordnung um einen beliebigen Punkt;
        pro Ausgabe gilt |R_i| <= 1/2 h^T K_i h.
        """
        raise ValueError(f"Encoder '{self.name}' hat keine globale Hessian-Schranke")

    @abstractmethod
    def _apply(self, batch: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _jacobian(self, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def _curvature(self, point: np.ndarray, weights: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def to_json(self) -> dict:
        ...


class Identity(Encoder):
    name = "identity"
    is_linear = True

    def _apply(self, batch):
        return batch.copy()

    def _jacobian(self, batch):
        eye = np.eye(batch.shape[1])
        return np.broadcast_to(eye, (len(batch),) + eye.shape).copy(), np.zeros(len(batch), bool)

    def _curvature(self, point, weights):
        return np.zeros((point.shape[0], point.shape[0]))

    def taylor_bound_sq(self, h):
        return np.zeros(np.atleast_2d(h).shape[0])

    def to_json(self):
        return {'variant': 'identity', 'params': {'dim': self.input_dim}}


# Aktivierungen: (Funktion, Ableitung, zweite Ableitung, sup |f''|)
def _gelu(x):
    return x * ndtr(x)


def _gelu_d1(x):
    return ndtr(x) + x * _PDF_NORM * np.exp(-0.5 * x * x)


def _gelu_d2(x):
    return _PDF_NORM * np.exp(-0.5 * x * x) * (2.0 - x * x)


def _sigmoid_d1(x):
    s = expit(x)
    return s * (1.0 - s)


def _sigmoid_d2(x):
    s = expit(x)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _tanh_d1(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _tanh_d2(x):
    t = np.tanh(x)
    return -2.0 * t * (1.0 - t * t)


_SMOOTH_ACTIVATIONS = {
    'gelu': (_gelu, _gelu_d1, _gelu_d2, 2.0 * _PDF_NORM),
    'sigmoid': (expit, _sigmoid_d1, _sigmoid_d2, np.sqrt(3.0) / 18.0),
    'tanh': (np.tanh, _tanh_d1, _tanh_d2, 4.0 / (3.0 * np.sqrt(3.0))),
}


class PointwiseActivation(Encoder):
    """
    Punktweise Aktivierung: relu, leaky_relu(alpha), gelu (exakt über Phi), sigmoid, tanh

    An einem Knick (Koordinate exakt 0) wird die Ableitung des negativen
    Zweigs verwendet und die Auswertung markiert.
    """

    KINDS = ('relu', 'leaky_relu', 'gelu', 'sigmoid', 'tanh')

    def __init__(self, kind: str, alpha: float = 0.01, dim: Optional[int] = None):
        if kind not in self.KINDS:
            raise ValueError(f"Unbekannte Aktivierung '{kind}' (gültig: {', '.join(self.KINDS)})")
        if kind == 'leaky_relu' and not alpha > 0.0:
            raise ValueError(f"leaky_relu braucht alpha > 0, erhalten: {alpha}")
        super().__init__(dim, dim)
        self.kind = kind
        self.alpha = float(alpha) if kind == 'leaky_relu' else 0.0
        self.smooth = kind in _SMOOTH_ACTIVATIONS
        self.name = f"leaky_relu:{self.alpha:g}" if kind == 'leaky_relu' else kind

    def _apply(self, batch):
        if self.smooth:
            return _SMOOTH_ACTIVATIONS[self.kind][0](batch)
        return np.where(batch > 0.0, batch, self.alpha * batch)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.smooth:
            return _SMOOTH_ACTIVATIONS[self.kind][1](x)
        return np.where(x > 0.0, 1.0, self.alpha)

    def _jacobian(self, batch):
        diag = self.derivative(batch)
        jac = diag[:, :, None] * np.eye(batch.shape[1])[None, :, :]
        kink = np.zeros(len(batch), bool) if self.smooth else np.any(batch == 0.0, axis=1)
        return jac, kink

    def _curvature(self, point, weights):
        if self.smooth:
            return np.diag(weights * _SMOOTH_ACTIVATIONS[self.kind][2](point))
        if np.any((point == 0.0) & (weights != 0.0)):
            raise DistributionalCurvatureError(
                f"{self.name}: Krümmung am Knick ist distributionell (Koordinate exakt 0)")
        return np.zeros((point.shape[0], point.shape[0]))

    def taylor_bound_sq(self, h):
        if not self.smooth:
            raise ValueError(f"{self.name}: zweite Ableitung ist singulär, keine Schranke")
        kappa = _SMOOTH_ACTIVATIONS[self.kind][3]
        h = np.atleast_2d(h)
        return np.sum((0.5 * kappa * h * h) ** 2, axis=1)

    def to_json(self):
        params = {'kind': self.kind}
        if self.kind == 'leaky_relu':
            params['alpha'] = self.alpha
        return {'variant': 'pointwise', 'params': params}


class GeneralLinear(Encoder):
    """Lineare Abbildung z = A x"""

    name = "linear"
    is_linear = True

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        super().__init__(self.matrix.shape[1], self.matrix.shape[0])

    def _apply(self, batch):
        return batch @ self.matrix.T

    def _jacobian(self, batch):
        jac = np.broadcast_to(self.matrix, (len(batch),) + self.matrix.shape).copy()
        return jac, np.zeros(len(batch), bool)

    def _curvature(self, point, weights):
        return np.zeros((self.input_dim, self.input_dim))

    def taylor_bound_sq(self, h):
        return np.zeros(np.atleast_2d(h).shape[0])

    def to_json(self):
        return {'variant': 'linear', 'params': {'matrix': self.matrix.tolist()}}


class LinearDiag(GeneralLinear):
    """A = diag(sqrt(1 + delta0), sqrt(1 - delta0)) auf R^2"""

    def __init__(self, delta0: float):
        if not 0.0 <= delta0 < 1.0:
            raise ValueError(f"delta0 muss in [0, 1) liegen, erhalten: {delta0}")
        self.delta0 = float(delta0)
        super().__init__(np.diag([np.sqrt(1.0 + delta0), np.sqrt(1.0 - delta0)]))
        self.name = f"linear_diag:{self.delta0:g}"

    def to_json(self):
        return {'variant': 'linear_diag', 'params': {'delta0': self.delta0}}


class ZeroPad(GeneralLinear):
    """z = (x_1, ..., x_m, 0, ..., 0) in R^d"""

    def __init__(self, input_dim: int, output_dim: int, keep: Optional[int] = None):
        keep = min(input_dim, output_dim) if keep is None else keep
        if keep > input_dim or keep > output_dim or keep < 1:
            raise ValueError(
                f"ZeroPad: keep={keep} unverträglich mit D={input_dim}, d={output_dim}")
        matrix = np.zeros((output_dim, input_dim))
        matrix[np.arange(keep), np.arange(keep)] = 1.0
        super().__init__(matrix)
        self.keep = keep
        self.name = f"zero_pad:{output_dim}"

    def _apply(self, batch):
        out = np.zeros((len(batch), self.output_dim))
        out[:, :self.keep] = batch[:, :self.keep]
        return out

    def to_json(self):
        return {'variant': 'zero_pad', 'params': {'input_dim': self.input_dim,
                                                  'output_dim': self.output_dim,
                                                  'keep': self.keep}}


class CylinderWrap(Encoder):
    """
    Wickelt die Ebene x3 = 0 auf einen Zylinder mit Radius 1/eps0:
    E(x) = (sin(eps0 x1)/eps0, x2, (1 - cos(eps0 x1))/eps0)
    """

    def __init__(self, eps0: float):
        if not eps0 > 0.0:
            raise ValueError(f"eps0 muss positiv sein, erhalten: {eps0}")
        super().__init__(3, 3)
        self.eps0 = float(eps0)
        self.name = f"cylinder:{self.eps0:g}"

    def _apply(self, batch):
        e = self.eps0
        angle = e * batch[:, 0]
        return np.column_stack([np.sin(angle) / e, batch[:, 1], (1.0 - np.cos(angle)) / e])

    def _jacobian(self, batch):
        angle = self.eps0 * batch[:, 0]
        jac = np.zeros((len(batch), 3, 3))
        jac[:, 0, 0] = np.cos(angle)
        jac[:, 1, 1] = 1.0
        jac[:, 2, 0] = np.sin(angle)
        return jac, np.zeros(len(batch), bool)

    def _curvature(self, point, weights):
        e = self.eps0
        angle = e * point[0]
        out = np.zeros((3, 3))
        out[0, 0] = e * (-weights[0] * np.sin(angle) + weights[2] * np.cos(angle))
        return out

    def taylor_bound_sq(self, h):
        # |E1''| und |E3''| sind durch eps0 beschränkt, nur x1 geht ein
        h = np.atleast_2d(h)
        return 2.0 * (0.5 * self.eps0 * h[:, 0] ** 2) ** 2

    def to_json(self):
        return {'variant': 'cylinder', 'params': {'eps0': self.eps0}}


class Composite(Encoder):
    """Hintereinanderausführung, erste Stufe zuerst"""

    def __init__(self, stages: List[Encoder]):
        if not stages:
            raise ValueError("Composite braucht mindestens eine Stufe")
        self.stages = list(stages)
        super().__init__(self.stages[0].input_dim, None)
        self.output_dim = self.stages[-1].output_dim
        self.smooth = all(s.smooth for s in self.stages)
        self.is_linear = all(s.is_linear for s in self.stages)
        self.name = "+".join(s.name for s in self.stages)

    def out_dim_for(self, dim: int) -> int:
        for stage in self.stages:
            dim = stage.out_dim_for(dim)
        return dim

    def _apply(self, batch):
        for stage in self.stages:
            batch = stage._apply(batch)
        return batch

    def _jacobian(self, batch):
        jac = None
        kink = np.zeros(len(batch), bool)
        for stage in self.stages:
            stage_jac, stage_kink = stage._jacobian(batch)
            kink |= stage_kink
            jac = stage_jac if jac is None else stage_jac @ jac
            batch = stage._apply(batch)
        return jac, kink

    def _curvature(self, point, weights):
        # Kettenregel rückwärts: M = J_f^T M_g J_f + M_f(J_g^T w)
        points = [point]
        for stage in self.stages[:-1]:
            points.append(stage._apply(points[-1][None, :])[0])
        jacs = []
        for stage, p in zip(self.stages, points):
            jacs.append(stage._jacobian(p[None, :])[0][0])
        total = np.zeros((point.shape[0], point.shape[0]))
        w = weights
        for i in reversed(range(len(self.stages))):
            prefix = np.eye(point.shape[0])
            for j in range(i):
                prefix = jacs[j] @ prefix
            total += prefix.T @ self.stages[i]._curvature(points[i], w) @ prefix
            w = jacs[i].T @ w
        return total

    def taylor_bound_sq(self, h):
        nonlinear = [i for i, s in enumerate(self.stages) if not s.is_linear]
        h = np.atleast_2d(h)
        if not nonlinear:
            return np.zeros(h.shape[0])
        if len(nonlinear) > 1:
            raise ValueError("Schranke nur für höchstens eine nichtlineare Stufe verfügbar")
        pivot = nonlinear[0]
        for stage in self.stages[:pivot]:
            h = stage._apply(h)
        bound = self.stages[pivot].taylor_bound_sq(h)
        for stage in self.stages[pivot + 1:]:
            matrix = getattr(stage, "matrix", None)
            if matrix is not None:
                bound = bound * np.linalg.norm(matrix, 2) ** 2
        return bound

    def to_json(self):
        return {'variant': 'composite', 'params': {'stages': [s.to_json() for s in self.stages]}}


# ---------------------------------------------------------------------------
# Parser und Serialisierung
# ---------------------------------------------------------------------------

def parse_encoder(spec: str, input_dim: int) -> Encoder:
    """
    Baut einen Encoder aus der CLI-Syntax, z.B. "leaky_relu:0.5" oder "zero_pad:64:2"

    Args:
        spec: Encoder-Spezifikation, Stufen mit '+' verkettet
        input_dim: Dimension der Eingabedaten

    Returns:
        Encoder-Instanz
    """
    stages = []
    dim = input_dim
    for part in spec.split('+'):
        name, *args = part.strip().split(':')
        try:
            if name == 'identity':
                stage = Identity(dim)
            elif name in ('relu', 'gelu', 'sigmoid', 'tanh'):
                stage = PointwiseActivation(name, dim=dim)
            elif name == 'leaky_relu':
                stage = PointwiseActivation('leaky_relu', float(args[0]) if args else 0.01, dim=dim)
            elif name == 'linear_diag':
                stage = LinearDiag(float(args[0]))
            elif name == 'zero_pad':
                keep = int(args[1]) if len(args) > 1 else None
                stage = ZeroPad(dim, int(args[0]), keep)
            elif name == 'cylinder':
                stage = CylinderWrap(float(args[0]))
            elif name == 'linear':
                with open(args[0], 'r', encoding='utf-8') as f:
                    stage = GeneralLinear(json.load(f)['params']['matrix'])
            else:
                raise ValueError(f"Unbekannter Encoder '{name}'")
        except (IndexError, TypeError) as e:
            raise ValueError(f"Encoder-Spezifikation '{part}' unvollständig: {e}")
        if stage.input_dim is not None and stage.input_dim != dim:
            raise DimensionError(f"Encoder '{stage.name}' erwartet D={stage.input_dim}, Daten haben {dim}")
        stages.append(stage)
        dim = stage.out_dim_for(dim)
    return stages[0] if len(stages) == 1 else Composite(stages)


def encoder_from_json(doc: dict) -> Encoder:
    variant, params = doc['variant'], doc.get('params', {})
    if variant == 'identity':
        return Identity(params.get('dim'))
    if variant == 'pointwise':
        return PointwiseActivation(params['kind'], params.get('alpha', 0.01))
    if variant == 'linear':
        return GeneralLinear(params['matrix'])
    if variant == 'linear_diag':
        return LinearDiag(params['delta0'])
    if variant == 'zero_pad':
        return ZeroPad(params['input_dim'], params['output_dim'], params.get('keep'))
    if variant == 'cylinder':
        return CylinderWrap(params['eps0'])
    if variant == 'composite':
        return Composite([encoder_from_json(s) for s in params['stages']])
    raise ValueError(f"Unbekannte Encoder-Variante '{variant}'")


# ---------------------------------------------------------------------------
# Operationen
# ---------------------------------------------------------------------------

def apply(e: Encoder, x) -> np.ndarray:
    return e.apply(x)


def jacobian(e: Encoder, x) -> np.ndarray:
    return e.jacobian(x)


def pushforward(e: Encoder, m: EmpiricalMeasure) -> EmpiricalMeasure:
    """Bildmaß E_# mu: Atome zeilenweise abbilden, Gewichte unverändert"""
    weights = None if m._uniform else m.weights
    return EmpiricalMeasure(e.apply(m.samples), weights, name=f"{e.name}({m.name})")


def pushforward_gaussian(e: Encoder, g: GaussianMeasure) -> GaussianMeasure:
    """Exaktes Bildmaß eines Gauß-Maßes unter einem linearen Encoder"""
    if not e.is_linear:
        raise ValueError(f"Encoder '{e.name}' ist nicht linear; Bildmaß nicht gaußsch")
    matrix = e.jacobian(np.zeros(g.dim))
    return g.transformed(matrix)


@dataclass
class BiLipschitzEstimate:
    c: float
    C: float
    ratio: float
    n_pairs: int


def _pair_indices(linear: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Lineare Indizes des oberen Dreiecks (i < j, zeilenweise) -> (i, j)"""
    total = n * (n - 1) // 2
    i = n - 2 - np.floor(np.sqrt(-8.0 * linear + 4.0 * n * (n - 1) - 7.0) / 2.0 - 0.5).astype(np.int64)
    j = linear + i + 1 - total + (n - i) * ((n - i) - 1) // 2
    return i, j


def bilipschitz_estimate(e: Encoder, samples, pair_budget: Optional[int] = None,
                         seed: int = 0) -> BiLipschitzEstimate:
    """
    Verzerrungsverhältnisse r_ij = ||E(x_i) - E(x_j)|| / ||x_i - x_j||

    Alle Paare, falls das Budget reicht, sonst Paare ohne Zurücklegen
    aus einem seeded Stream.

    Returns:
        BiLipschitzEstimate mit c = min r_ij, C = max r_ij, ratio = C / c
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n = X.shape[0]
    if n < 2:
        raise ValueError("bilipschitz_estimate braucht mindestens 2 Stichproben")
    Z = e.apply(X)
    total = n * (n - 1) // 2
    lo, hi, count = np.inf, -np.inf, 0

    if pair_budget is None or pair_budget >= total:
        step = max(1, _BILIP_BLOCK // n)
        for a in range(0, n, step):
            b = min(a + step, n)
            dx = cdist(X[a:b], X[a:])
            dz = cdist(Z[a:b], Z[a:])
            upper = np.arange(n - a)[None, :] > np.arange(b - a)[:, None]
            valid = upper & (dx >= 1e-12)
            if np.any(valid):
                ratios = dz[valid] / dx[valid]
                lo, hi, count = min(lo, ratios.min()), max(hi, ratios.max()), count + ratios.size
    else:
        rng = stream(seed, "pairs")
        linear = np.sort(rng.choice(total, size=int(pair_budget), replace=False))
        i, j = _pair_indices(linear, n)
        dx = np.linalg.norm(X[i] - X[j], axis=1)
        dz = np.linalg.norm(Z[i] - Z[j], axis=1)
        valid = dx >= 1e-12
        if np.any(valid):
            ratios = dz[valid] / dx[valid]
            lo, hi, count = ratios.min(), ratios.max(), ratios.size

    if count < 1:
        raise ValueError("Kein gültiges Paar (alle Abstände < 1e-12)")
    ratio = hi / lo if lo > 0.0 else np.inf
    return BiLipschitzEstimate(c=float(lo), C=float(hi), ratio=float(ratio), n_pairs=int(count))


def jacobian_bounds(e: Encoder, samples, tangent_basis=None) -> Tuple[float, float]:
    """Extreme Singulärwerte von J(x) B über alle Stichprobenpunkte"""
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    jac = e.jacobian(X)
    if tangent_basis is not None:
        jac = jac @ np.asarray(tangent_basis, dtype=np.float64)
    sv = np.linalg.svd(jac, compute_uv=False)
    return float(sv.min()), float(sv.max())


def activation_lipschitz_bounds(kind: str, radius: float, alpha: float = 0.01) -> Tuple[float, float]:
    """
    Analytische Schranken c <= |phi'| <= C auf [-radius, radius]

    Für ReLU ist c = 0, die obere FI-Schranke divergiert dann.
    """
    if kind == 'relu':
        return 0.0, 1.0
    if kind == 'leaky_relu':
        return min(alpha, 1.0), max(alpha, 1.0)
    grid = np.linspace(-radius, radius, 20001)
    slopes = np.abs(PointwiseActivation(kind).derivative(grid))
    return float(slopes.min()), float(slopes.max())


def isometry_defect(e: Encoder, x, tangent_basis) -> float:
    """||(J B)^T (J B) - I_m||_2 über die symmetrische Eigenzerlegung"""
    basis = np.atleast_2d(np.asarray(tangent_basis, dtype=np.float64))
    m = basis.shape[1]
    if np.max(np.abs(basis.T @ basis - np.eye(m))) > 1e-10:
        raise ValueError("Tangentialbasis ist nicht orthonormal")
    A = e.jacobian(np.asarray(x, dtype=np.float64).reshape(-1)) @ basis
    gram = A.T @ A - np.eye(m)
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (gram + gram.T)))))


def _support_check(base: BaseMeasure, x0: np.ndarray):
    if isinstance(base, SubspaceGaussian):
        proj = base.embedding @ (base.embedding.T @ x0)
        if np.linalg.norm(x0 - proj) > 1e-9:
            raise ValueError("x0 liegt nicht im Träger-Unterraum")


def taylor_residual(e: Encoder, base: BaseMeasure, x0, mc_samples: int = 100_000,
                    seed: int = 0, mode: str = "lagrange") -> float:
    """
    Monte-Carlo-Schätzung des Taylor-Residuums epsilon an x0

    Args:
        e: Encoder
        base: SubspaceGaussian oder EmpiricalMeasure (saubere Stichproben)
        x0: Entwicklungspunkt auf dem Träger
        mc_samples: Anzahl Stichproben
        seed: Seed für den Stichproben-Stream
        mode: "lagrange" (Schranke aus Hessian-Majoranten) oder
              "remainder" (tatsächliches Restglied erster Ordnung)

    Returns:
        Wurzel des mittleren quadratischen Residuums
    """
    point = np.asarray(x0, dtype=np.float64).reshape(-1)
    _support_check(base, point)
    x = base.sample(0.0, mc_samples, seed)
    h = x - point
    if mode == "lagrange":
        return float(np.sqrt(np.mean(e.taylor_bound_sq(h))))
    if mode == "remainder":
        linear = e.apply(point) + h @ e.jacobian(point).T
        residual = e.apply(x) - linear
        return float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
    raise ValueError(f"Unbekannter Modus '{mode}' (gültig: lagrange, remainder)")


def default_taylor_candidates(base: BaseMeasure, per_axis: int = 17) -> np.ndarray:
    """17 Punkte je intrinsischer Achse in [-2 sigma, 2 sigma]"""
    if isinstance(base, SubspaceGaussian):
        center = np.zeros(base.ambient_dim)
        sigmas = np.sqrt(np.diag(base.intrinsic_covariance))
        axes = base.embedding
    else:
        if isinstance(base, EmpiricalMeasure):
            center, cov = base.mean_and_covariance()
        elif isinstance(base, GaussianMeasure):
            center, cov = base.mean, base.covariance
        else:
            raise ValueError(f"Keine Standard-Kandidaten für {type(base).__name__}")
        eigvals, eigvecs = np.linalg.eigh(cov)
        keep = eigvals > 1e-12
        sigmas, axes = np.sqrt(eigvals[keep]), eigvecs[:, keep]
    points = [center + t * axes[:, j]
              for j, sigma in enumerate(sigmas)
              for t in np.linspace(-2.0 * sigma, 2.0 * sigma, per_axis)]
    return np.array(points)


def taylor_residual_min(e: Encoder, base: BaseMeasure, candidates=None,
                        mc_samples: int = 100_000, seed: int = 0,
                        mode: str = "lagrange") -> Tuple[float, np.ndarray]:
    """Minimum von taylor_residual über ein Kandidatengitter (gleiche Stichproben)"""
    grid = default_taylor_candidates(base) if candidates is None else np.atleast_2d(candidates)
    values = [taylor_residual(e, base, x0, mc_samples, seed, mode) for x0 in grid]
    best = int(np.argmin(values))
    return values[best], grid[best]


def curvature_injection_vp(e: Encoder, x, latent_score, v=None) -> np.ndarray:
    """
    Krümmungsinjektion M = sum_i [s_z]_i Hess(E_i)(x)

    Ohne v: Spaltennormen ||M e_j|| (Frobenius-Beitrag je Richtung).
    Mit v: das Produkt M v.
    """
    matrix = e.curvature(x, latent_score)
    if v is None:
        return np.linalg.norm(matrix, axis=0)
    return matrix @ np.asarray(v, dtype=np.float64)


def save_encoder(e: Encoder, path: str) -> Path:
    output_file = Path(path)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    with open(output_file, 'w', encoding='utf-8') as f:
        json.dump(e.to_json(), f, indent=2)
    return output_file
