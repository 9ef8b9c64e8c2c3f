"""
Toy-Diffusion - kleines Rauschvorhersage-MLP für 2-D Spielzeugdaten

Das trainierte Netz wird über ModelScoreOracle als ScoreOracle angeboten,
damit alle Schätzer unverändert auf gelernten Scores laufen.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
from torch import nn

from .measures import (BaseMeasure, EmpiricalMeasure, MissingCapabilityError, ScoreOracle,
                       as_batch, check_tau)
from .rng import stream

CHECKPOINT_FORMAT = "firdiag-checkpoint"
CHECKPOINT_VERSION = 1

# Skalen der Sinus-Einbettung: geometrisch zwischen 1 und 1e4
EMBED_SCALE_MIN = 1.0
EMBED_SCALE_MAX = 1.0e4


class TrainingDivergedError(RuntimeError):
    """Trainingsverlust ist NaN oder unendlich geworden"""

    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(
            f"Training divergiert in Epoche {epoch}, Schritt {step}: Verlust {loss}")
        self.epoch = epoch
        self.step = step
        self.loss = loss


class CheckpointError(ValueError):
    """Checkpoint-Datei ist beschädigt oder hat eine fremde Version"""


def _embed_scales(dim: int) -> np.ndarray:
    if dim < 2 or dim % 2:
        raise ValueError(f"Einbettungsdimension muss gerade und >= 2 sein: {dim}")
    return np.geomspace(EMBED_SCALE_MIN, EMBED_SCALE_MAX, dim // 2)


def sinusoidal_embed(v, dim: int) -> np.ndarray:
    """
    Sinus-Einbettung eines Skalars oder Vektors von Skalaren

    Args:
        v: Wert oder Array von Werten
        dim: gerade Einbettungsdimension

    Returns:
        Array der Form (..., dim) mit verschränkten (sin, cos)-Paaren
        für die Argumente v / s_j, s_j geometrisch in [1, 1e4]
    """
    scales = _embed_scales(dim)
    args = np.asarray(v, dtype=np.float64)[..., None] / scales
    return np.stack([np.sin(args), np.cos(args)], axis=-1).reshape(*args.shape[:-1], dim)


class MlpScoreNet(nn.Module):
    """
    MLP zur Rauschvorhersage: Einbettung -> hidden x layers (GELU) -> k

    Args:
        data_dim: Datendimension k
        input_embedding: 'sinusoidal' (pro Koordinate) oder 'identity'
        embed_dim: Dimension der Sinus-Einbettungen
        hidden: Breite der versteckten Schichten
        layers: Anzahl versteckter Schichten
        zero_final: letzte Schicht mit Nullen initialisieren
    """

    def __init__(self, data_dim: int, input_embedding: str = 'sinusoidal',
                 embed_dim: int = 128, hidden: int = 128, layers: int = 3,
                 zero_final: bool = True, dtype: torch.dtype = torch.float64):
        super().__init__()
        if input_embedding not in ('sinusoidal', 'identity'):
            raise ValueError(f"Unbekannte Eingabe-Einbettung: {input_embedding}")
        if layers < 1 or hidden < 1 or data_dim < 1:
            raise ValueError("data_dim, hidden und layers müssen positiv sein")
        self.data_dim = data_dim
        self.input_embedding = input_embedding
        self.embed_dim = embed_dim
        self.register_buffer(
            'scales', torch.tensor(_embed_scales(embed_dim), dtype=dtype))

        in_features = data_dim * embed_dim if input_embedding == 'sinusoidal' else data_dim
        widths = [in_features + embed_dim] + [hidden] * layers
        self.hidden_layers = nn.ModuleList(
            nn.Linear(a, b, dtype=dtype) for a, b in zip(widths[:-1], widths[1:]))
        self.activation = nn.GELU()
        self.output = nn.Linear(hidden, data_dim, dtype=dtype)
        if zero_final:
            nn.init.zeros_(self.output.weight)
            nn.init.zeros_(self.output.bias)

    def embed(self, values: torch.Tensor) -> torch.Tensor:
        args = values[:, None] / self.scales[None, :]
        return torch.stack([torch.sin(args), torch.cos(args)], dim=-1).reshape(
            values.shape[0], -1)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.data_dim:
            raise ValueError(f"Eingabe hat Dimension {x.shape[-1]}, Netz erwartet {self.data_dim}")
        if self.input_embedding == 'sinusoidal':
            parts = [self.embed(x[:, i]) for i in range(self.data_dim)]
        else:
            parts = [x]
        parts.append(self.embed(cond))
        h = torch.cat(parts, dim=1)
        for layer in self.hidden_layers:
            h = self.activation(layer(h))
        return self.output(h)


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Rauschplan: 've' (kontinuierlich, tau log-uniform) oder 'ddpm' (linearer beta-Plan)

    Für 'ddpm' gilt tau(t) = (1 - abar_t) / abar_t.
    """

    kind: str = 've'
    tau_min: float = 1e-4
    tau_max: float = 6400.0
    steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.05

    KINDS = ('ve', 'ddpm')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"Unbekannter Rauschplan '{self.kind}', erlaubt: {self.KINDS}")
        if self.kind == 've' and not 0.0 < self.tau_min < self.tau_max:
            raise ValueError(f"Ungültiger tau-Bereich [{self.tau_min}, {self.tau_max}]")
        if self.kind == 'ddpm':
            if self.steps < 2:
                raise ValueError(f"steps muss >= 2 sein: {self.steps}")
            if not 0.0 < self.beta_start < self.beta_end < 1.0:
                raise ValueError(
                    f"beta-Bereich muss 0 < beta_start < beta_end < 1 erfüllen: "
                    f"{self.beta_start}, {self.beta_end}")

    @classmethod
    def ve_continuous(cls, tau_min: float = 1e-4, tau_max: float = 6400.0) -> 'NoiseSchedule':
        return cls(kind='ve', tau_min=tau_min, tau_max=tau_max)

    @classmethod
    def ddpm_linear(cls, steps: int = 100, beta_start: float = 1e-4,
                    beta_end: float = 0.05) -> 'NoiseSchedule':
        return cls(kind='ddpm', steps=steps, beta_start=beta_start, beta_end=beta_end)

    @property
    def betas(self) -> np.ndarray:
        return np.linspace(self.beta_start, self.beta_end, self.steps)

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(1.0 - self.betas)

    @property
    def taus(self) -> np.ndarray:
        abar = self.alpha_bars
        return (1.0 - abar) / abar

    def tau_range(self) -> Tuple[float, float]:
        if self.kind == 've':
            return self.tau_min, self.tau_max
        taus = self.taus
        return float(taus[0]), float(taus[-1])

    def nearest_step(self, tau: float) -> int:
        """Schritt t (1-basiert), dessen tau(t) in log-Skala am nächsten liegt"""
        return int(np.argmin(np.abs(np.log(self.taus) - math.log(tau)))) + 1

    def check_tau(self, tau: float) -> float:
        tau = check_tau(tau)
        lo, hi = self.tau_range()
        # Rundungsspielraum an den Rändern
        if tau < lo * (1.0 - 1e-12) or tau > hi * (1.0 + 1e-12):
            raise ValueError(
                f"tau={tau} liegt außerhalb des Rauschplans, gültig ist [{lo:.6g}, {hi:.6g}]")
        return tau

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'tau_min': self.tau_min, 'tau_max': self.tau_max,
                'steps': self.steps, 'beta_start': self.beta_start,
                'beta_end': self.beta_end}


@dataclass
class TrainConfig:
    """Trainingsrezept des Spielzeugmodells"""

    dataset_size: int = 50000
    batch: int = 256
    epochs: int = 200
    lr: float = 5e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    hidden: int = 128
    layers: int = 3
    embed_dim: int = 128
    input_embedding: str = 'auto'
    prediction: str = 'epsilon'

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        for name in ('dataset_size', 'batch', 'epochs', 'hidden', 'layers', 'embed_dim'):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} muss positiv sein: {getattr(self, name)}")
        if not self.lr > 0.0 or not self.eps > 0.0 or self.weight_decay < 0.0:
            raise ValueError("lr und eps müssen positiv, weight_decay nichtnegativ sein")
        if self.input_embedding not in ('auto', 'sinusoidal', 'identity'):
            raise ValueError(f"Unbekannte Eingabe-Einbettung: {self.input_embedding}")
        if self.prediction not in ('epsilon', 'x0'):
            raise ValueError(f"prediction muss 'epsilon' oder 'x0' sein: {self.prediction}")

    def embedding_for(self, data_dim: int) -> str:
        if self.input_embedding != 'auto':
            return self.input_embedding
        return 'sinusoidal' if data_dim <= 2 else 'identity'


def build_net(config: TrainConfig, data_dim: int) -> MlpScoreNet:
    """Initialisiert das Netz deterministisch aus config.seed"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(_torch_seed(config.seed, "init"))
        return MlpScoreNet(data_dim, config.embedding_for(data_dim),
                           embed_dim=config.embed_dim, hidden=config.hidden,
                           layers=config.layers)


def _torch_seed(seed: int, key: str) -> int:
    return int(stream(seed, key).integers(0, 2 ** 62))


@dataclass
class TrainingBatch:
    """Ein Trainingsbatch: saubere Daten, Rauschniveau (tau oder Schritt t) und Rauschen"""

    x0: torch.Tensor
    level: torch.Tensor
    noise: torch.Tensor

    def __len__(self) -> int:
        return self.x0.shape[0]


def predict_noise(net: nn.Module, schedule: NoiseSchedule, x: torch.Tensor,
                  level: torch.Tensor, prediction: str = 'epsilon') -> torch.Tensor:
    """
    Rauschschätzung eps_hat für verrauschte Eingaben x

    Args:
        level: tau pro Zeile ('ve') bzw. Schritt t pro Zeile ('ddpm')
        prediction: Ausgabe des Netzes als Rauschen ('epsilon') oder als x0-Schätzung
    """
    if schedule.kind == 've':
        c_in = torch.rsqrt(1.0 + level)[:, None]
        out = net(x * c_in, torch.log(level))
        if prediction == 'x0':
            return (x - out) / torch.sqrt(level)[:, None]
        return out

    abar = torch.as_tensor(schedule.alpha_bars, dtype=x.dtype)[level.long() - 1][:, None]
    out = net(x, level)
    if prediction == 'x0':
        return (x - torch.sqrt(abar) * out) / torch.sqrt(1.0 - abar)
    return out


def noisy_input(schedule: NoiseSchedule, batch: TrainingBatch) -> torch.Tensor:
    if schedule.kind == 've':
        return batch.x0 + torch.sqrt(batch.level)[:, None] * batch.noise
    abar = torch.as_tensor(schedule.alpha_bars, dtype=batch.x0.dtype)[batch.level.long() - 1]
    return torch.sqrt(abar)[:, None] * batch.x0 + torch.sqrt(1.0 - abar)[:, None] * batch.noise


def loss_and_grads(net: nn.Module, batch: TrainingBatch, schedule: NoiseSchedule,
                   prediction: str = 'epsilon') -> Tuple[float, List[torch.Tensor]]:
    """
    Mittlerer Verlust E||eps_hat - n||^2 und seine Gradienten

    Returns:
        Tuple (Verlust, Liste der Gradienten in der Reihenfolge von net.parameters())
    """
    if len(batch) < 1:
        raise ValueError("Batch ist leer")
    net.zero_grad(set_to_none=True)
    x = noisy_input(schedule, batch)
    eps_hat = predict_noise(net, schedule, x, batch.level, prediction)
    loss = torch.mean(torch.sum((eps_hat - batch.noise) ** 2, dim=1))
    loss.backward()
    grads = [torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
             for p in net.parameters()]
    return float(loss.detach()), grads


def make_optimizer(net: nn.Module, config: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(net.parameters(), lr=config.lr, betas=config.betas,
                             eps=config.eps, weight_decay=config.weight_decay)


def adamw_step(optimizer: torch.optim.Optimizer, grads: List[torch.Tensor]) -> None:
    """Ein AdamW-Schritt mit den übergebenen Gradienten (entkoppelter Weight-Decay)"""
    params = [p for group in optimizer.param_groups for p in group['params']]
    if len(params) != len(grads):
        raise ValueError(f"{len(grads)} Gradienten für {len(params)} Parameter")
    for param, grad in zip(params, grads):
        param.grad = grad
    optimizer.step()


@dataclass
class Checkpoint:
    """Gewichte, Netzform, Rauschplan, Trainingskonfiguration und Verlaufswerte"""

    state: Dict[str, np.ndarray]
    net_config: dict
    schedule: NoiseSchedule
    config: TrainConfig
    final_loss: float
    loss_history: List[float] = field(default_factory=list)
    format_version: int = CHECKPOINT_VERSION

    @property
    def data_dim(self) -> int:
        return int(self.net_config['data_dim'])

    @classmethod
    def from_net(cls, net: MlpScoreNet, schedule: NoiseSchedule, config: TrainConfig,
                 final_loss: float, loss_history: Optional[List[float]] = None) -> 'Checkpoint':
        state = {name: tensor.detach().cpu().numpy().copy()
                 for name, tensor in net.state_dict().items()}
        net_config = {'data_dim': net.data_dim, 'input_embedding': net.input_embedding,
                      'embed_dim': net.embed_dim, 'hidden': config.hidden,
                      'layers': config.layers}
        return cls(state, net_config, schedule, config, float(final_loss),
                   list(loss_history or []))

    def build_net(self) -> MlpScoreNet:
        net = MlpScoreNet(self.data_dim, self.net_config['input_embedding'],
                          embed_dim=int(self.net_config['embed_dim']),
                          hidden=int(self.net_config['hidden']),
                          layers=int(self.net_config['layers']))
        net.load_state_dict({name: torch.from_numpy(np.array(arr, dtype=np.float64))
                             for name, arr in self.state.items()})
        net.eval()
        return net

    def _header(self) -> dict:
        config = asdict(self.config)
        config['betas'] = list(self.config.betas)
        return {'format': CHECKPOINT_FORMAT, 'version': self.format_version,
                'net_config': self.net_config, 'schedule': self.schedule.to_dict(),
                'schedule_taus': self.schedule.taus.tolist() if self.schedule.kind == 'ddpm' else [],
                'config': config, 'final_loss': self.final_loss,
                'loss_history': list(self.loss_history)}

    def save(self, path: str, fmt: str = 'binary') -> Path:
        """
        Speichert den Checkpoint

        Args:
            path: Zieldatei
            fmt: 'binary' (torch.save) oder 'json' (Gewichte als Listen, zeilenweise)

        Returns:
            Pfad der geschriebenen Datei
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = self._header()
        if fmt == 'json':
            header['weights'] = {name: {'shape': list(arr.shape),
                                        'values': arr.reshape(-1).tolist()}
                                 for name, arr in self.state.items()}
            path.write_text(json.dumps(header), encoding='utf-8')
        elif fmt == 'binary':
            payload = {'header': json.dumps(header),
                       'weights': {name: torch.from_numpy(arr.copy())
                                   for name, arr in self.state.items()}}
            torch.save(payload, path)
        else:
            raise ValueError(f"Unbekanntes Checkpoint-Format: {fmt}")
        return path

    @classmethod
    def load(cls, path: str) -> 'Checkpoint':
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"Checkpoint nicht gefunden: {path}")
        raw = path.read_bytes()
        try:
            if raw[:1] == b'{':
                header = json.loads(raw.decode('utf-8'))
                state = {name: np.array(entry['values'], dtype=np.float64).reshape(entry['shape'])
                         for name, entry in header.pop('weights').items()}
            else:
                payload = torch.load(path, weights_only=True)
                header = json.loads(payload['header'])
                state = {name: tensor.numpy().copy()
                         for name, tensor in payload['weights'].items()}
        except CheckpointError:
            raise
        except Exception as exc:
            raise CheckpointError(f"Checkpoint {path} ist beschädigt oder abgeschnitten: {exc}")

        if header.get('format') != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} ist kein Checkpoint dieses Programms")
        if header.get('version') != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"Checkpoint-Version {header.get('version')} wird nicht unterstützt "
                f"(erwartet {CHECKPOINT_VERSION})")
        try:
            config = TrainConfig(**header['config'])
            return cls(state, header['net_config'], NoiseSchedule(**header['schedule']),
                       config, float(header['final_loss']),
                       [float(v) for v in header['loss_history']], header['version'])
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"Checkpoint {path} hat einen unvollständigen Kopf: {exc}")


def training_set(data: BaseMeasure, config: TrainConfig) -> np.ndarray:
    """Trainingsdaten: Atome eines empirischen Maßes oder dataset_size Ziehungen"""
    if isinstance(data, EmpiricalMeasure) and np.all(data.weights == data.weights[0]):
        if data.n_atoms <= config.dataset_size:
            return data.samples
        rng = stream(config.seed, "dataset")
        return data.samples[np.sort(rng.permutation(data.n_atoms)[:config.dataset_size])]
    if not data.has_sampler:
        raise MissingCapabilityError(f"Maß '{data.name}' hat keinen Sampler")
    return data.sample(0.0, config.dataset_size, config.seed)


class ToyTrainer:
    """
    Trainiert MlpScoreNet mit AdamW auf einem Datensatz

    Args:
        config: Trainingskonfiguration
        schedule: Rauschplan
        progress_callback: optionale Funktion für Fortschrittsmeldungen
    """

    def __init__(self, config: Optional[TrainConfig] = None,
                 schedule: Optional[NoiseSchedule] = None,
                 progress_callback: Optional[Callable[[str], None]] = None):
        self.config = config or TrainConfig()
        self.schedule = schedule or NoiseSchedule()
        self.progress_callback = progress_callback

    def _report(self, message: str):
        if self.progress_callback:
            self.progress_callback(message)

    def _draw_levels(self, count: int, gen: torch.Generator) -> torch.Tensor:
        if self.schedule.kind == 've':
            lo, hi = math.log(self.schedule.tau_min), math.log(self.schedule.tau_max)
            u = torch.rand(count, generator=gen, dtype=torch.float64)
            return torch.exp(lo + (hi - lo) * u)
        steps = torch.randint(1, self.schedule.steps + 1, (count,), generator=gen)
        return steps.to(torch.float64)

    def train(self, data: BaseMeasure) -> Checkpoint:
        """
        Führt das komplette Training aus

        Returns:
            Checkpoint mit letztem Epochenverlust und Verlustverlauf

        Raises:
            TrainingDivergedError: sobald ein Batchverlust nicht endlich ist
        """
        cfg = self.config
        samples = torch.from_numpy(np.ascontiguousarray(training_set(data, cfg)))
        count, data_dim = samples.shape
        net = build_net(cfg, data_dim)
        optimizer = make_optimizer(net, cfg)
        gen = torch.Generator().manual_seed(_torch_seed(cfg.seed, "train"))

        self._report(f"Training: {count} Punkte, Dimension {data_dim}, "
                     f"{cfg.epochs} Epochen, Rauschplan {self.schedule.kind}")
        report_every = max(1, cfg.epochs // 10)
        history: List[float] = []
        step = 0
        for epoch in range(1, cfg.epochs + 1):
            order = torch.randperm(count, generator=gen)
            total, batches = 0.0, 0
            for start in range(0, count, cfg.batch):
                idx = order[start:start + cfg.batch]
                batch = TrainingBatch(
                    samples[idx], self._draw_levels(len(idx), gen),
                    torch.randn(len(idx), data_dim, generator=gen, dtype=torch.float64))
                loss, grads = loss_and_grads(net, batch, self.schedule, cfg.prediction)
                step += 1
                if not math.isfinite(loss):
                    raise TrainingDivergedError(epoch, step, loss)
                adamw_step(optimizer, grads)
                total += loss
                batches += 1
            history.append(total / batches)
            if epoch % report_every == 0 or epoch == cfg.epochs:
                self._report(f"Epoche {epoch}/{cfg.epochs}: Verlust {history[-1]:.4f}")

        net.eval()
        return Checkpoint.from_net(net, self.schedule, cfg, history[-1], history)


def train(config: TrainConfig, data: BaseMeasure, schedule: NoiseSchedule,
          progress_callback: Optional[Callable[[str], None]] = None) -> Checkpoint:
    return ToyTrainer(config, schedule, progress_callback).train(data)


class ModelScoreOracle(ScoreOracle):
    """
    Score eines trainierten Netzes: s_tau(x) = -eps_hat / sqrt(tau)

    Im 'ddpm'-Modus wird der nächstgelegene Schritt t verwendet und die
    Eingabe mit sqrt(abar_t) skaliert; tau ist dann tau(t).

    Args:
        checkpoint: trainierter Checkpoint
        data: optionales Datenmaß, liefert die Stichproben (x0, n)
        forward_mode: Hessian-Vektor-Produkte per torch.func.jvp statt Differenzen
        fd_step: relativer Schritt der Differenzen-Variante (mal sqrt(tau))
    """

    name = "model"
    has_hvp = True
    has_exact_hessian = False

    def __init__(self, checkpoint: Checkpoint, data: Optional[BaseMeasure] = None,
                 forward_mode: bool = True, fd_step: float = 1e-3):
        self.checkpoint = checkpoint
        self.schedule = checkpoint.schedule
        self.prediction = checkpoint.config.prediction
        self.net = checkpoint.build_net()
        for param in self.net.parameters():
            param.requires_grad_(False)
        if data is not None and data.dim != checkpoint.data_dim:
            raise ValueError(
                f"Datenmaß hat Dimension {data.dim}, Modell {checkpoint.data_dim}")
        self.data = data
        self.has_sampler = data is not None
        self.forward_mode = forward_mode
        self.fd_step = fd_step

    @property
    def dim(self) -> int:
        return self.checkpoint.data_dim

    def _query(self, tau: float) -> Tuple[float, float, Optional[int]]:
        """(tau_eff, Eingabeskalierung, Schritt) für eine Anfrage"""
        tau = self.schedule.check_tau(tau)
        if self.schedule.kind == 've':
            return tau, 1.0, None
        step = self.schedule.nearest_step(tau)
        return (float(self.schedule.taus[step - 1]),
                math.sqrt(float(self.schedule.alpha_bars[step - 1])), step)

    def _score_fn(self, tau: float) -> Callable[[torch.Tensor], torch.Tensor]:
        tau_eff, scale, step = self._query(tau)

        def score(x: torch.Tensor) -> torch.Tensor:
            if step is None:
                level = torch.full((x.shape[0],), tau_eff, dtype=x.dtype)
            else:
                level = torch.full((x.shape[0],), float(step), dtype=x.dtype)
            eps_hat = predict_noise(self.net, self.schedule, scale * x, level, self.prediction)
            return -eps_hat / math.sqrt(tau_eff)

        return score

    def score(self, x, tau: float) -> np.ndarray:
        batch, single = as_batch(x, self.dim)
        fn = self._score_fn(tau)
        with torch.no_grad():
            result = fn(torch.from_numpy(batch)).numpy()
        return result[0] if single else result

    def hessian_vp(self, x, tau: float, v) -> np.ndarray:
        batch, single = as_batch(x, self.dim)
        vecs = np.ascontiguousarray(
            np.broadcast_to(np.asarray(v, dtype=np.float64), batch.shape))
        if self.forward_mode:
            result = self._hvp_forward(batch, tau, vecs)
        else:
            result = self._hvp_finite_difference(batch, tau, vecs)
        return result[0] if single else result

    def _hvp_forward(self, batch: np.ndarray, tau: float, vecs: np.ndarray) -> np.ndarray:
        fn = self._score_fn(tau)
        _, tangent = torch.func.jvp(fn, (torch.from_numpy(batch),),
                                    (torch.from_numpy(vecs),))
        return tangent.detach().numpy()

    def _hvp_finite_difference(self, batch: np.ndarray, tau: float,
                               vecs: np.ndarray) -> np.ndarray:
        h = self.fd_step * math.sqrt(check_tau(tau))
        return (self.score(batch + h * vecs, tau) - self.score(batch - h * vecs, tau)) / (2.0 * h)

    def hessian_asymmetry(self, x, tau: float, n_pairs: int = 16, seed: int = 0) -> float:
        """
        Mittlere relative Asymmetrie |<Hv,w> - <Hw,v>| / (||Hv|| ||w||)

        Gelernte Scores sind nicht exakt konservativ; der Wert wird nur berichtet.
        """
        batch, _ = as_batch(x, self.dim)
        rng = stream(seed, "asymmetry")
        ratios = []
        for _ in range(n_pairs):
            v = rng.standard_normal(batch.shape)
            w = rng.standard_normal(batch.shape)
            hv = self.hessian_vp(batch, tau, v)
            hw = self.hessian_vp(batch, tau, w)
            gap = np.abs(np.sum(hv * w, axis=1) - np.sum(hw * v, axis=1))
            norm = np.linalg.norm(hv, axis=1) * np.linalg.norm(w, axis=1)
            ratios.append(gap / np.maximum(norm, 1e-300))
        return float(np.mean(ratios))

    def _require_data(self) -> BaseMeasure:
        if self.data is None:
            raise MissingCapabilityError(
                "Modell-Orakel ohne Datenmaß kann keine Stichproben ziehen "
                "(model:<ckpt>:<daten> verwenden)")
        return self.data

    def sample_pairs(self, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        return self._require_data().sample_pairs(count, seed)

    def sample(self, tau: float, count: int, seed: int) -> np.ndarray:
        return self._require_data().sample(tau, count, seed)


def checkpoint_oracle(ckpt: Checkpoint) -> ModelScoreOracle:
    """Ein Orakel pro Checkpoint; das Netz wird nur beim ersten Aufruf gebaut"""
    oracle = getattr(ckpt, '_score_oracle', None)
    if oracle is None:
        oracle = ModelScoreOracle(ckpt)
        ckpt._score_oracle = oracle
    return oracle


def model_score(ckpt: Checkpoint, x, tau: float) -> np.ndarray:
    return checkpoint_oracle(ckpt).score(x, tau)


def model_hessian_vp(ckpt: Checkpoint, x, tau: float, v) -> np.ndarray:
    return checkpoint_oracle(ckpt).hessian_vp(x, tau, v)


def sample_reverse(ckpt: Checkpoint, count: int, seed: int) -> np.ndarray:
    """
    Ancestrales Rückwärts-Sampling von t=T bis t=1 (nur 'ddpm'-Rauschplan)

    Returns:
        count x k Array der erzeugten Stichproben
    """
    schedule = ckpt.schedule
    if schedule.kind != 'ddpm':
        raise ValueError("Rückwärts-Sampling setzt einen 'ddpm'-Rauschplan voraus")
    if count < 1:
        raise ValueError(f"count muss >= 1 sein, erhalten: {count}")
    net = ckpt.build_net()
    betas = schedule.betas
    alpha_bars = schedule.alpha_bars
    gen = torch.Generator().manual_seed(_torch_seed(seed, "reverse"))
    x = torch.randn(count, ckpt.data_dim, generator=gen, dtype=torch.float64)
    with torch.no_grad():
        for t in range(schedule.steps, 0, -1):
            level = torch.full((count,), float(t), dtype=torch.float64)
            eps_hat = predict_noise(net, schedule, x, level, ckpt.config.prediction)
            beta = float(betas[t - 1])
            mean = (x - beta / math.sqrt(1.0 - float(alpha_bars[t - 1])) * eps_hat) \
                / math.sqrt(1.0 - beta)
            if t > 1:
                noise = torch.randn(count, ckpt.data_dim, generator=gen, dtype=torch.float64)
                x = mean + math.sqrt(beta) * noise
            else:
                x = mean
    return x.numpy()
