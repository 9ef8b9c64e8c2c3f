"""
Kommandozeile - Einstiegspunkt für alle Diagnosekommandos
"""

import argparse
import sys
import time
from datetime import datetime
from typing import List, Optional

import numpy as np
import pandas as pd

from core import __version__
from core.config import ConfigError, RunConfig, load_config
from core.curve_exporter import CurveExporter
from core.encoders import (bilipschitz_estimate, parse_encoder, pushforward, pushforward_gaussian)
from core.estimators import (analytic_curve, diagnostic_sweep, estimate_fi, estimate_fir_fd,
                             estimate_fir_jvp, estimate_fir_pathwise, fir_deviation,
                             fir_deviation_scaled)
from core.measures import (BaseMeasure, EmpiricalMeasure, GaussianMeasure, ScoreOracle,
                           measure_from_spec)
from core.report_exporter import ReportExporter, RunManifest, curve_figure, spectrum_figure
from core.spectra import spectrum_from_samples
from core.theory_bench import CHECKS, EXPERIMENTS, TheoryBench, coerce_param
from core.toy_diffusion import (Checkpoint, ModelScoreOracle, NoiseSchedule, TrainConfig,
                                ToyTrainer)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VERDICT = 2
EXIT_USAGE = 64


class UsageError(Exception):
    """Fehlerhafte Kommandozeile (unbekanntes oder fehlendes Flag)"""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser, der bei Fehlern Usage ausgibt und UsageError wirft statt zu beenden"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


class DiagnosticsApp:
    """Kommandozeilen-Anwendung für FI/FIR-Diagnosen"""

    def __init__(self, stdout=None, stderr=None):
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr
        self.quiet = False
        self.parser = self._build_parser()

    # -- Parser ------------------------------------------------------------

    def _common(self) -> argparse.ArgumentParser:
        common = _Parser(add_help=False)
        common.add_argument('--config', help='key=value Konfigurationsdatei')
        common.add_argument('--seed', type=int)
        common.add_argument('--n', type=int, help='Stichproben pro Schätzung')
        common.add_argument('--probes', type=int, help='Hutchinson-Proben pro Stichprobe')
        common.add_argument('--workers', type=int)
        common.add_argument('--budget', choices=['default', 'large-model'])
        common.add_argument('--out', help='Ausgabeverzeichnis (Standard: $FIRDIAG_OUT)')
        common.add_argument('--quiet', action='store_true', help='keine Fortschrittsmeldungen')
        return common

    def _build_parser(self) -> argparse.ArgumentParser:
        common = self._common()
        parser = _Parser(prog='firdiag', description='FI/FIR-Diagnosen für Diffusionsmodelle')
        parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
        sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

        oracle = _Parser(add_help=False)
        oracle.add_argument('--measure', help='builtin:, gaussian:, subspace:, empirical:, model:')
        oracle.add_argument('--encoder', help='Encoder-Spezifikation, z.B. leaky_relu:0.5')
        oracle.add_argument('--no-header', action='store_true', help='CSV ohne Kopfzeile')
        oracle.add_argument('--probe', choices=['rademacher', 'gaussian'])
        oracle.add_argument('--method', choices=['jvp', 'fd', 'auto', 'pathwise'])
        oracle.add_argument('--fd-step', dest='fd_step', type=float)

        p = sub.add_parser('fi', parents=[common, oracle], help='Fisher-Information bei einem tau')
        p.add_argument('--tau', type=float, required=True)

        p = sub.add_parser('fir', parents=[common, oracle], help='FI-Rate bei einem tau')
        p.add_argument('--tau', type=float, required=True)

        p = sub.add_parser('sweep', parents=[common, oracle], help='Kurve über ein tau-Gitter')
        p.add_argument('--grid', help='spacing:lo:hi:count')
        p.add_argument('--analytic', action='store_true', help='geschlossene Formeln verwenden')
        p.add_argument('--atoms', type=int, default=50000,
                       help='Atome für nichtlineare Encoder auf stetigen Maßen')

        p = sub.add_parser('deviation', parents=[common], help='FIR-Abweichung zweier Kurven')
        p.add_argument('--pixel', required=True, help='Kurven-CSV des Umgebungsraums')
        p.add_argument('--latent', required=True, help='Kurven-CSV des Latentraums')
        p.add_argument('--D', dest='D', type=int)
        p.add_argument('--d', dest='d', type=int)
        p.add_argument('--m', dest='m', type=int)

        p = sub.add_parser('train-toy', parents=[common], help='Spielzeug-Diffusionsmodell trainieren')
        p.add_argument('--data', default=None,
                       help='Trainingsdaten: CSV-Pfad oder Maß-Angabe, z.B. builtin:gauss2d')
        p.add_argument('--encoder', help='Encoder vor dem Training anwenden, z.B. tanh')
        p.add_argument('--schedule', choices=['ve', 'ddpm'])
        p.add_argument('--epochs', type=int)
        p.add_argument('--batch', type=int)
        p.add_argument('--dataset-size', dest='dataset_size', type=int)
        p.add_argument('--lr', type=float)
        p.add_argument('--weight-decay', dest='weight_decay', type=float)
        p.add_argument('--prediction', choices=['epsilon', 'x0'], default='epsilon')
        p.add_argument('--format', choices=['binary', 'json'], default='binary')
        p.add_argument('--no-header', action='store_true')

        p = sub.add_parser('bench', parents=[common], help='Experimente und Schrankenprüfungen')
        p.add_argument('action', choices=['run', 'verify-all'])
        p.add_argument('target', nargs='?', help=f"Experiment oder Prüfung: "
                       f"{', '.join(EXPERIMENTS + CHECKS)}")
        p.add_argument('--params', nargs='*', default=[], metavar='KEY=VALUE')
        p.add_argument('--quick', action='store_true', help='kleinere Budgets')
        p.add_argument('--with-training', action='store_true',
                       help='Experimente mit trainiertem Modell einschließen')

        p = sub.add_parser('spectra', parents=[common], help='Leistungsspektrum einer Stichprobe')
        p.add_argument('--input', required=True, help='CSV, eine Stichprobe pro Zeile')
        p.add_argument('--mode', choices=['1d', '2d'], default='1d')
        p.add_argument('--shape', help='C,H,W oder H,W für mode 2d')
        p.add_argument('--normalize', action='store_true')
        p.add_argument('--exclude-dc', action='store_true')
        p.add_argument('--no-header', action='store_true')

        p = sub.add_parser('bilip', parents=[common], help='Bi-Lipschitz-Konstanten eines Encoders')
        p.add_argument('--measure')
        p.add_argument('--encoder', required=True)
        p.add_argument('--pairs', type=int, help='Paarbudget (Standard: alle Paare)')
        p.add_argument('--no-header', action='store_true')
        return parser

    # -- Ausgabe -----------------------------------------------------------

    def _log(self, message: str):
        """Fortschrittsmeldung mit Zeitstempel auf stderr"""
        if self.quiet:
            return
        timestamp = datetime.now().strftime('%H:%M:%S')
        print(f"[{timestamp}] {message}", file=self.stderr, flush=True)

    def _error(self, message: str):
        """Fehler erscheinen auch mit --quiet"""
        timestamp = datetime.now().strftime('%H:%M:%S')
        print(f"[{timestamp}] FEHLER: {message}", file=self.stderr, flush=True)

    def _summary(self, message: str):
        print(message, file=self.stdout, flush=True)

    # -- Auflösung ---------------------------------------------------------

    @staticmethod
    def _overrides(args: argparse.Namespace) -> dict:
        keys = RunConfig.keys()
        values = {k: v for k, v in vars(args).items() if k in keys}
        if values.get('method') == 'pathwise':
            values.pop('method')
        return values

    def _resolve_measure(self, text: str, header: bool = True) -> ScoreOracle:
        """Maß-Angabe inklusive model:<checkpoint>[:<daten>]"""
        kind, _, rest = text.partition(':')
        if kind != 'model':
            return measure_from_spec(text, header)
        path, _, data_spec = rest.partition(':')
        data = measure_from_spec(data_spec, header) if data_spec else None
        return ModelScoreOracle(Checkpoint.load(path), data=data)

    def _resolve_oracle(self, cfg: RunConfig, header: bool, atoms: int = 50000) -> ScoreOracle:
        """Maß aus der Konfiguration, bei gesetztem Encoder dessen Bildmaß"""
        return self._encode(self._resolve_measure(cfg.measure, header), cfg, atoms)

    def _encode(self, oracle: ScoreOracle, cfg: RunConfig, atoms: int) -> ScoreOracle:
        """Bildmaß unter cfg.encoder; stetige Maße vorher als Atome bei nichtlinearem Encoder"""
        if cfg.encoder in (None, '', 'identity'):
            return oracle
        if not isinstance(oracle, BaseMeasure):
            raise ValueError("Encoder lassen sich nur auf Maße, nicht auf Modelle anwenden")
        encoder = parse_encoder(cfg.encoder, oracle.dim)
        if encoder.is_linear and isinstance(oracle, GaussianMeasure):
            return pushforward_gaussian(encoder, oracle)
        if not isinstance(oracle, EmpiricalMeasure):
            self._log(f"Ziehe {atoms} Atome aus '{oracle.name}' für den Encoder")
            oracle = EmpiricalMeasure(oracle.sample(0.0, atoms, cfg.seed), name=f"{oracle.name}-atoms")
        return pushforward(encoder, oracle)

    def _manifest(self, argv: List[str], cfg: RunConfig, extra: Optional[dict] = None) -> RunManifest:
        config = cfg.to_dict()
        config.update(extra or {})
        return RunManifest(command=['firdiag'] + list(argv), config=config, seed=cfg.seed)

    # -- Kommandos ---------------------------------------------------------

    def _cmd_fi(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        oracle = self._resolve_oracle(cfg, not args.no_header)
        est = estimate_fi(oracle, args.tau, cfg.n, cfg.seed, cfg.workers)
        self._finish_estimate('fi', args.tau, est, cfg, manifest)
        return EXIT_OK

    def _cmd_fir(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        oracle = self._resolve_oracle(cfg, not args.no_header)
        method = cfg.method
        if args.method == 'pathwise':
            est = estimate_fir_pathwise(oracle, args.tau, cfg.n, cfg.seed)
        else:
            if method == 'auto':
                method = 'jvp' if oracle.has_hvp else 'fd'
            if method == 'jvp':
                est = estimate_fir_jvp(oracle, args.tau, cfg.n, cfg.probes, cfg.seed, cfg.probe,
                                       cfg.workers)
            else:
                est = estimate_fir_fd(oracle, args.tau, cfg.n, cfg.probes, cfg.fd_step, cfg.seed,
                                      cfg.probe, cfg.workers)
        self._finish_estimate('fir', args.tau, est, cfg, manifest)
        return EXIT_OK

    def _finish_estimate(self, name: str, tau: float, est, cfg: RunConfig, manifest: RunManifest):
        out = cfg.out_dir()
        doc = {'quantity': name, 'tau': tau, 'measure': cfg.measure, 'encoder': cfg.encoder,
               **est.to_dict()}
        written = [CurveExporter.export_json(doc, out / f"{name}.json")]
        ReportExporter.finish(written, out, manifest)
        flags = f" [{', '.join(est.flags)}]" if est.flags else ''
        self._summary(f"{name.upper()}(tau={tau:g}) = {est.mean:.6g} ± {est.stderr:.2g} "
                      f"(n={est.n_samples}){flags}")

    def _cmd_sweep(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        oracle = self._resolve_oracle(cfg, not args.no_header, args.atoms)
        grid = cfg.tau_grid()
        if args.analytic:
            curve = analytic_curve(oracle, grid)
        else:
            self._log(f"Sweep über {len(grid)} tau-Werte, n={cfg.n}, Proben={cfg.probes}")
            method = 'auto' if cfg.method == 'auto' else cfg.method
            curve = diagnostic_sweep(oracle, grid, cfg.n, cfg.probes, cfg.seed, method, cfg.probe,
                                     cfg.workers, progress_callback=self._log)
        out = cfg.out_dir()
        written = [CurveExporter.export_curve(curve, out / 'curve.csv'),
                   ReportExporter.export_figure(curve_figure(curve), out / 'curve.svg')]
        ReportExporter.finish(written, out, manifest)
        unstable = sum(1 for e in curve.fir if 'unstable' in e.flags)
        self._summary(f"Kurve mit {len(grid)} Punkten nach {out / 'curve.csv'} geschrieben"
                      + (f" ({unstable} instabile FIR-Werte)" if unstable else ''))
        return EXIT_OK

    def _cmd_deviation(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        pixel = CurveExporter.read_table(args.pixel)
        latent = CurveExporter.read_table(args.latent)
        for frame, path in ((pixel, args.pixel), (latent, args.latent)):
            missing = {'tau', 'fir_mean'} - set(frame.columns)
            if missing:
                raise ValueError(f"{path}: Spalten fehlen: {', '.join(sorted(missing))}")
        if not np.array_equal(pixel['tau'].to_numpy(), latent['tau'].to_numpy()):
            raise ValueError("tau-Gitter der beiden Kurven stimmen nicht exakt überein")
        table = pd.DataFrame({'tau': pixel['tau'], 'fir_ambient': pixel['fir_mean'],
                              'fir_latent': latent['fir_mean']})
        table['deviation'] = fir_deviation(table['fir_ambient'].to_numpy(),
                                           table['fir_latent'].to_numpy())
        dims = (args.D, args.d, args.m)
        if any(v is not None for v in dims):
            if any(v is None for v in dims):
                raise ValueError("--D, --d und --m nur gemeinsam angeben")
            table['deviation_scaled'] = fir_deviation_scaled(
                table['fir_ambient'].to_numpy(), table['fir_latent'].to_numpy(), *dims)
        out = cfg.out_dir()
        written = [CurveExporter.export_table(table, out / 'deviation.csv')]
        ReportExporter.finish(written, out, manifest)
        column = 'deviation_scaled' if 'deviation_scaled' in table else 'deviation'
        self._summary(f"{column}: max {table[column].max():.6g} über {len(table)} tau-Werte")
        return EXIT_OK

    def _cmd_train_toy(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        data = self._resolve_measure(args.data or cfg.measure, not args.no_header)
        data = self._encode(data, cfg, cfg.dataset_size)
        schedule = NoiseSchedule.ddpm_linear() if cfg.schedule == 'ddpm' else NoiseSchedule.ve_continuous()
        config = TrainConfig(dataset_size=cfg.dataset_size, batch=cfg.batch, epochs=cfg.epochs,
                             lr=cfg.lr, weight_decay=cfg.weight_decay, seed=cfg.seed,
                             prediction=args.prediction)
        ckpt = ToyTrainer(config, schedule, progress_callback=self._log).train(data)
        out = cfg.out_dir()
        suffix = 'json' if args.format == 'json' else 'pt'
        written = [ckpt.save(out / f"checkpoint.{suffix}", args.format),
                   CurveExporter.export_table(
                       pd.DataFrame({'epoch': np.arange(1, len(ckpt.loss_history) + 1),
                                     'loss': ckpt.loss_history}), out / 'loss_history.csv')]
        ReportExporter.finish(written, out, manifest)
        self._summary(f"Training beendet: Verlust {ckpt.final_loss:.4f} "
                      f"(k={ckpt.data_dim}), Checkpoint {written[0]}")
        return EXIT_OK

    def _cmd_bench(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        bench = TheoryBench(seed=cfg.seed, n=cfg.n, probes=cfg.probes, workers=cfg.workers,
                            quick=args.quick, with_training=args.with_training,
                            progress_callback=self._log)
        if args.action == 'run':
            if not args.target:
                raise UsageError("bench run: Experiment oder Prüfung angeben")
            params = {}
            for item in args.params:
                key, sep, value = item.partition('=')
                if not sep:
                    raise UsageError(f"bench run: Parameter '{item}' hat nicht die Form key=value")
                params[key] = coerce_param(value)
            report = bench.run(args.target, **params)
        else:
            report = bench.verify_all()
        manifest.config.update(report.config)
        out = cfg.out_dir()
        ReportExporter.export_bench(report, out, manifest)
        passed = sum(1 for c in report.checks if c.passed)
        self._summary(f"{passed}/{len(report.checks)} Prüfungen bestanden, Ergebnisse in {out}")
        return EXIT_OK if report.passed else EXIT_VERDICT

    def _read_samples(self, path: str, header: bool) -> np.ndarray:
        return EmpiricalMeasure.load_csv(path, header).samples

    def _cmd_spectra(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        samples = self._read_samples(args.input, not args.no_header)
        shape = tuple(int(v) for v in args.shape.split(',')) if args.shape else None
        report = spectrum_from_samples(samples, args.mode, shape, args.normalize, args.exclude_dc)
        out = cfg.out_dir()
        written = [CurveExporter.export_table(report.to_frame(), out / 'spectrum.csv'),
                   ReportExporter.export_figure(spectrum_figure(report), out / 'spectrum.svg')]
        ReportExporter.finish(written, out, manifest)
        peak = report.frequencies[int(np.argmax(report.power))]
        self._summary(f"Spektrum ({report.mode}, {report.n_samples} Stichproben): "
                      f"Gesamtleistung {report.total_power():.6g}, Maximum bei f={peak:.4g}")
        return EXIT_OK

    def _cmd_bilip(self, args, cfg: RunConfig, manifest: RunManifest) -> int:
        measure = self._resolve_measure(cfg.measure, not args.no_header)
        if isinstance(measure, EmpiricalMeasure):
            samples = measure.samples
        else:
            samples = measure.sample(0.0, cfg.n, cfg.seed)
        encoder = parse_encoder(args.encoder, samples.shape[1])
        est = bilipschitz_estimate(encoder, samples, args.pairs, cfg.seed)
        out = cfg.out_dir()
        written = [CurveExporter.export_json(
            {'encoder': args.encoder, 'measure': cfg.measure, 'c': est.c, 'C': est.C,
             'ratio': est.ratio, 'n_pairs': est.n_pairs}, out / 'bilip.json')]
        ReportExporter.finish(written, out, manifest)
        self._summary(f"c = {est.c:.6g}, C = {est.C:.6g}, C/c = {est.ratio:.6g} ({est.n_pairs} Paare)")
        return EXIT_OK

    # -- Einstieg ----------------------------------------------------------

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Führt ein Kommando aus

        Returns:
            0 bei Erfolg, 2 bei fehlgeschlagener Prüfung, 1 bei Laufzeitfehlern,
            64 bei fehlerhafter Kommandozeile
        """
        argv = list(sys.argv[1:] if argv is None else argv)
        try:
            args = self.parser.parse_args(argv)
        except UsageError as e:
            print(str(e), file=self.stderr)
            return EXIT_USAGE
        except SystemExit as e:
            # --help und --version
            return int(e.code or 0)

        self.quiet = args.quiet
        handlers = {'fi': self._cmd_fi, 'fir': self._cmd_fir, 'sweep': self._cmd_sweep,
                    'deviation': self._cmd_deviation, 'train-toy': self._cmd_train_toy,
                    'bench': self._cmd_bench, 'spectra': self._cmd_spectra,
                    'bilip': self._cmd_bilip}
        started = time.perf_counter()
        try:
            cfg = load_config(args.config, self._overrides(args))
            manifest = self._manifest(argv, cfg)
            code = handlers[args.command](args, cfg, manifest)
        except UsageError as e:
            self.parser.print_usage(self.stderr)
            print(str(e), file=self.stderr)
            return EXIT_USAGE
        except ConfigError as e:
            self._error(f"Konfiguration: {e}")
            return EXIT_RUNTIME
        except Exception as e:
            self._error(f"{type(e).__name__}: {e}")
            return EXIT_RUNTIME
        self._log(f"Fertig nach {time.perf_counter() - started:.1f} s")
        return code


def main(argv: Optional[List[str]] = None) -> int:
    return DiagnosticsApp().run(argv)
