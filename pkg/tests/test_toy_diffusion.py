"""
Test: Toy-Diffusion
Testet Rauschplan, Einbettung, Checkpoints und das Modell-Orakel
"""
import math
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np
import torch
from torch import nn

# Füge das Projektverzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.estimators import estimate_fi, estimate_fir_jvp  # noqa: E402
from core.measures import MissingCapabilityError, builtin_measure  # noqa: E402
from core.toy_diffusion import (  # noqa: E402
    Checkpoint,
    CheckpointError,
    MlpScoreNet,
    ModelScoreOracle,
    NoiseSchedule,
    ToyTrainer,
    TrainConfig,
    TrainingBatch,
    TrainingDivergedError,
    adamw_step,
    build_net,
    loss_and_grads,
    model_hessian_vp,
    model_score,
    sample_reverse,
    sinusoidal_embed,
)

SMALL = dict(hidden=16, layers=1, embed_dim=8)


class ExactGaussianNoise(nn.Module):
    """E[n | x] für N(0, I) unter dem VE-Plan, in der Eingabekonvention des Netzes"""

    def forward(self, x_in, cond):
        tau = torch.exp(cond)[:, None]
        x = x_in * torch.sqrt(1.0 + tau)
        return torch.sqrt(tau) * x / (1.0 + tau)


def _small_checkpoint(schedule=None, seed=0):
    config = TrainConfig(seed=seed, **SMALL)
    net = build_net(config, 2)
    return Checkpoint.from_net(net, schedule or NoiseSchedule(), config, final_loss=1.0,
                               loss_history=[1.5, 1.0])


class TestNoiseSchedule(unittest.TestCase):

    def test_ddpm_reaches_large_tau(self):
        """
        Test: Linearer beta-Plan bis 0.05 erreicht tau(T) > 10, tau steigt streng
        """
        schedule = NoiseSchedule.ddpm_linear()
        taus = schedule.taus
        self.assertGreater(taus[-1], 10.0)
        self.assertTrue(np.all(np.diff(taus) > 0.0))
        self.assertAlmostEqual(taus[0], 1e-4 / (1 - 1e-4), places=12)

    def test_nearest_step(self):
        """
        Test: Nächster Schritt in log-Skala, 1-basiert
        """
        schedule = NoiseSchedule.ddpm_linear()
        self.assertEqual(schedule.nearest_step(float(schedule.taus[9])), 10)

    def test_tau_outside_schedule(self):
        """
        Test: tau außerhalb des Plans wird abgewiesen
        """
        schedule = NoiseSchedule.ve_continuous(1e-2, 10.0)
        self.assertEqual(schedule.check_tau(1.0), 1.0)
        with self.assertRaises(ValueError):
            schedule.check_tau(100.0)
        with self.assertRaises(ValueError):
            NoiseSchedule(kind='vp')
        with self.assertRaises(ValueError):
            NoiseSchedule.ddpm_linear(beta_start=0.1, beta_end=0.05)


class TestEmbedding(unittest.TestCase):

    def test_shape_and_values(self):
        """
        Test: Einbettung von 0 ist (0, 1, 0, 1, ...)
        """
        out = sinusoidal_embed(np.zeros(3), 8)
        self.assertEqual(out.shape, (3, 8))
        np.testing.assert_array_equal(out[0], [0, 1, 0, 1, 0, 1, 0, 1])
        self.assertEqual(sinusoidal_embed(0.5, 4).shape, (4,))

    def test_matches_network_embedding(self):
        """
        Test: numpy- und torch-Einbettung stimmen überein
        """
        net = MlpScoreNet(2, embed_dim=8, hidden=4, layers=1)
        values = np.array([0.3, -2.0, 150.0])
        torch_out = net.embed(torch.from_numpy(values)).numpy()
        np.testing.assert_allclose(torch_out, sinusoidal_embed(values, 8), atol=1e-12)

    def test_odd_dimension(self):
        """
        Test: Ungerade Dimension wird abgewiesen
        """
        with self.assertRaises(ValueError):
            sinusoidal_embed(1.0, 7)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        """Erstelle temporäre Test-Umgebung"""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Räume temporäre Test-Umgebung auf"""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_round_trip_both_formats(self):
        """
        Test: binary und json liefern bitgleiche Gewichte und Scores
        """
        ckpt = _small_checkpoint(NoiseSchedule.ddpm_linear())
        x = np.array([[0.1, -0.3], [1.0, 2.0]])
        reference = ModelScoreOracle(ckpt).score(x, 0.5)
        for fmt, name in (('binary', 'model.pt'), ('json', 'model.json')):
            path = ckpt.save(Path(self.test_dir) / name, fmt)
            loaded = Checkpoint.load(path)
            for key, arr in ckpt.state.items():
                np.testing.assert_array_equal(loaded.state[key], arr,
                                              err_msg=f"{fmt}: Gewicht {key} verändert")
            self.assertEqual(loaded.schedule, ckpt.schedule)
            self.assertEqual(loaded.loss_history, [1.5, 1.0])
            np.testing.assert_array_equal(ModelScoreOracle(loaded).score(x, 0.5), reference)

    def test_corrupted_file(self):
        """
        Test: Abgeschnittene oder fremde Dateien lösen CheckpointError aus
        """
        path = _small_checkpoint().save(Path(self.test_dir) / 'model.pt')
        truncated = Path(self.test_dir) / 'kaputt.pt'
        truncated.write_bytes(path.read_bytes()[:100])
        with self.assertRaises(CheckpointError):
            Checkpoint.load(truncated)
        foreign = Path(self.test_dir) / 'fremd.json'
        foreign.write_text('{"format": "anderes"}', encoding='utf-8')
        with self.assertRaises(CheckpointError):
            Checkpoint.load(foreign)
        with self.assertRaises(CheckpointError):
            Checkpoint.load(Path(self.test_dir) / 'fehlt.pt')

    def test_unknown_format(self):
        """
        Test: Unbekanntes Speicherformat wird abgewiesen
        """
        with self.assertRaises(ValueError):
            _small_checkpoint().save(Path(self.test_dir) / 'x.bin', 'pickle')


class TestTraining(unittest.TestCase):

    def test_gradients_match_finite_difference(self):
        """
        Test: Gradienten stimmen an 50 zufälligen Koordinaten mit zentralen Differenzen
        """
        torch.manual_seed(0)
        net = MlpScoreNet(2, 'sinusoidal', embed_dim=4, hidden=8, layers=2, zero_final=False)
        gen = torch.Generator().manual_seed(1)
        batch = TrainingBatch(torch.randn(16, 2, generator=gen, dtype=torch.float64),
                              torch.exp(torch.randn(16, generator=gen, dtype=torch.float64)),
                              torch.randn(16, 2, generator=gen, dtype=torch.float64))
        schedule = NoiseSchedule()
        _, grads = loss_and_grads(net, batch, schedule)
        params = list(net.parameters())
        sizes = [p.numel() for p in params]
        rng = np.random.default_rng(2)
        coords = rng.choice(sum(sizes), size=50, replace=False)
        offsets = np.cumsum([0] + sizes)

        h = 1e-5
        worst = 0.0
        for flat in coords:
            i = int(np.searchsorted(offsets, flat, side='right') - 1)
            j = int(flat - offsets[i])
            analytic = float(grads[i].reshape(-1)[j])
            with torch.no_grad():
                params[i].view(-1)[j] += h
            plus, _ = loss_and_grads(net, batch, schedule)
            with torch.no_grad():
                params[i].view(-1)[j] -= 2 * h
            minus, _ = loss_and_grads(net, batch, schedule)
            with torch.no_grad():
                params[i].view(-1)[j] += h
            numeric = (plus - minus) / (2 * h)
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-3))
        self.assertLess(worst, 1e-5, f"max. relativer Gradientenfehler {worst:.2e}")

    def test_small_run_is_deterministic(self):
        """
        Test: Kurzes Training ist endlich und bei gleichem Seed reproduzierbar
        """
        config = TrainConfig(dataset_size=256, batch=64, epochs=3, **SMALL)
        messages = []
        first = ToyTrainer(config, progress_callback=messages.append).train(builtin_measure('gauss2d'))
        second = ToyTrainer(config).train(builtin_measure('gauss2d'))
        self.assertEqual(len(first.loss_history), 3)
        self.assertTrue(math.isfinite(first.final_loss))
        self.assertEqual(first.final_loss, second.final_loss)
        self.assertTrue(any('Epoche 3/3' in m for m in messages))

    def test_config_validation(self):
        """
        Test: Ungültige Trainingsparameter werden abgewiesen
        """
        with self.assertRaises(ValueError):
            TrainConfig(epochs=0)
        with self.assertRaises(ValueError):
            TrainConfig(lr=0.0)
        with self.assertRaises(ValueError):
            TrainConfig(prediction='score')

    def test_reverse_sampling(self):
        """
        Test: Rückwärts-Sampling nur im ddpm-Plan, Ergebnis deterministisch
        """
        ckpt = _small_checkpoint(NoiseSchedule.ddpm_linear(steps=20))
        a = sample_reverse(ckpt, 50, seed=3)
        b = sample_reverse(ckpt, 50, seed=3)
        self.assertEqual(a.shape, (50, 2))
        np.testing.assert_array_equal(a, b)
        with self.assertRaises(ValueError):
            sample_reverse(_small_checkpoint(), 10, seed=0)

    @unittest.skipUnless(os.environ.get("FIRDIAG_SLOW"), "langsamer Test, FIRDIAG_SLOW=1 setzen")
    def test_default_recipe_learns_gaussian(self):
        """
        Test: Standardrezept lernt FI von N(0, I_2) bei tau = 1 auf 10 %
        """
        ckpt = ToyTrainer(TrainConfig()).train(builtin_measure('gauss2d'))
        oracle = ModelScoreOracle(ckpt, data=builtin_measure('gauss2d'))
        fi = estimate_fi(oracle, 1.0, n=2000, seed=0)
        self.assertAlmostEqual(fi.mean, 1.0, delta=0.1)


class TestModelScoreOracle(unittest.TestCase):

    def setUp(self):
        self.oracle = ModelScoreOracle(_small_checkpoint(), data=builtin_measure('gauss2d'))
        self.oracle.net = ExactGaussianNoise()

    def test_perfect_predictor_reproduces_gaussian(self):
        """
        Test: Exakter Rauschschätzer ergibt Score, FI und FIR von N(0, I_2)
        """
        g = builtin_measure('gauss2d')
        x = np.array([[0.5, -1.0], [2.0, 0.0]])
        np.testing.assert_allclose(self.oracle.score(x, 0.7), g.score(x, 0.7), atol=1e-12)
        fir = estimate_fir_jvp(self.oracle, 0.7, n=50, m_probes=3)
        self.assertAlmostEqual(fir.mean, g.fir_exact(0.7), places=10)
        fi = estimate_fi(self.oracle, 0.7, n=500, seed=1)
        self.assertAlmostEqual(fi.mean, estimate_fi(g, 0.7, n=500, seed=1).mean, places=10)

    def test_finite_difference_hvp(self):
        """
        Test: Differenzen-HVP stimmt mit torch.func.jvp überein
        """
        x = np.array([[0.5, -1.0]])
        v = np.array([[1.0, 2.0]])
        forward = self.oracle.hessian_vp(x, 0.3, v)
        self.oracle.forward_mode = False
        difference = self.oracle.hessian_vp(x, 0.3, v)
        np.testing.assert_allclose(difference, forward, rtol=1e-6)

    def test_tau_range_and_missing_data(self):
        """
        Test: tau außerhalb des Plans und fehlendes Datenmaß werden gemeldet
        """
        with self.assertRaises(ValueError):
            self.oracle.score(np.zeros(2), 1e5)
        bare = ModelScoreOracle(_small_checkpoint())
        self.assertFalse(bare.has_sampler)
        with self.assertRaises(MissingCapabilityError):
            bare.sample(1.0, 10, seed=0)




class ExactGaussianDenoiser(nn.Module):
    """E[x0 | x] für N(0, I) unter dem VE-Plan"""

    def forward(self, x_in, cond):
        tau = torch.exp(cond)[:, None]
        return x_in / torch.sqrt(1.0 + tau)


class TestParameterisations(unittest.TestCase):

    def test_x0_prediction_gives_same_score(self):
        """
        Test: Exakter Denoiser in der x0-Parametrisierung liefert den Gauß-Score
        """
        config = TrainConfig(prediction='x0', **SMALL)
        ckpt = Checkpoint.from_net(build_net(config, 2), NoiseSchedule(), config, 1.0)
        oracle = ModelScoreOracle(ckpt)
        oracle.net = ExactGaussianDenoiser()
        x = np.array([[0.5, -1.0], [2.0, 3.0]])
        expected = builtin_measure('gauss2d').score(x, 2.0)
        np.testing.assert_allclose(oracle.score(x, 2.0), expected, atol=1e-12)
        v = np.array([1.0, 0.0])
        np.testing.assert_allclose(oracle.hessian_vp(x, 2.0, v), np.tile(-v / 3.0, (2, 1)),
                                   atol=1e-12)

    def test_module_functions_match_oracle(self):
        """
        Test: model_score und model_hessian_vp entsprechen dem Orakel
        """
        ckpt = _small_checkpoint(seed=4)
        oracle = ModelScoreOracle(ckpt)
        x = np.array([[0.1, 0.2], [-1.0, 0.5]])
        v = np.array([[0.3, -0.7], [1.0, 1.0]])
        np.testing.assert_array_equal(model_score(ckpt, x, 0.5), oracle.score(x, 0.5))
        np.testing.assert_array_equal(model_hessian_vp(ckpt, x, 0.5, v),
                                      oracle.hessian_vp(x, 0.5, v))
        self.assertEqual(model_score(ckpt, x[0], 0.5).shape, (2,))

    def test_module_functions_build_net_once(self):
        """
        Test: Wiederholte Aufrufe auf einem Checkpoint bauen das Netz nur einmal
        """
        ckpt = _small_checkpoint(seed=5)
        x = np.array([[0.1, 0.2]])
        with mock.patch.object(Checkpoint, 'build_net', autospec=True,
                               side_effect=Checkpoint.build_net) as build:
            first = model_score(ckpt, x, 0.5)
            model_hessian_vp(ckpt, x, 0.5, np.ones((1, 2)))
            second = model_score(ckpt, x, 0.5)
        self.assertEqual(build.call_count, 1)
        np.testing.assert_array_equal(first, second)

    def test_asymmetry_of_exact_score_vanishes(self):
        """
        Test: Der exakte Gauß-Score hat eine symmetrische Jacobi-Matrix
        """
        oracle = ModelScoreOracle(_small_checkpoint())
        oracle.net = ExactGaussianNoise()
        asym = oracle.hessian_asymmetry(np.array([[0.5, 1.0], [-2.0, 0.0]]), 0.4, n_pairs=4)
        self.assertLess(asym, 1e-12)


class TestOptimizer(unittest.TestCase):

    def test_first_adamw_step(self):
        """
        Test: Erster AdamW-Schritt: Decay p(1 - lr wd), dann Schritt lr g / (|g| + eps)
        """
        param = nn.Parameter(torch.tensor([1.0, -2.0], dtype=torch.float64))
        optimizer = torch.optim.AdamW([param], lr=0.1, weight_decay=0.01, eps=1e-8)
        grad = torch.tensor([0.5, -4.0], dtype=torch.float64)
        adamw_step(optimizer, [grad])
        start = np.array([1.0, -2.0])
        g = grad.numpy()
        expected = start * (1.0 - 0.1 * 0.01) - 0.1 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(param.detach().numpy(), expected, rtol=1e-12)

    def test_gradient_count_mismatch(self):
        """
        Test: Falsche Anzahl Gradienten wird abgewiesen
        """
        param = nn.Parameter(torch.zeros(2, dtype=torch.float64))
        optimizer = torch.optim.AdamW([param], lr=0.1)
        with self.assertRaises(ValueError):
            adamw_step(optimizer, [])

    def test_divergence_is_reported(self):
        """
        Test: Nicht endlicher Verlust bricht mit Epoche und Schritt ab
        """
        config = TrainConfig(dataset_size=32, batch=16, epochs=2, **SMALL)
        with mock.patch('core.toy_diffusion.loss_and_grads', return_value=(float('nan'), [])):
            with self.assertRaises(TrainingDivergedError) as ctx:
                ToyTrainer(config).train(builtin_measure('gauss2d'))
        self.assertEqual((ctx.exception.epoch, ctx.exception.step), (1, 1))


if __name__ == '__main__':
    unittest.main()
