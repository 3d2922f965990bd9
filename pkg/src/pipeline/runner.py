from __future__ import annotations

import argparse
import asyncio
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from ..dicke_model import HP_RATIO_THRESHOLD, PhysicalParams, build_hamiltonian, critical_omega, initial_state
from ..dynamics import SOURCES, evolve, make_propagator
from ..entanglement import NOISE_FLOOR, entanglement_trajectory, returns_below
from ..errors import SimulationError, UnstableRegimeError
from ..exact_oracle import convergence_study, vacuum_entanglement_scan
from ..homodyne import ReadoutChannel, readout_input, readout_study
from ..result_writer import CurveResult, ResultWriter
from ..svg_plot import Curve, SvgPlotter
from ..symplectic import thermal_temperature_table
from .config import ExperimentConfig, load_config
from .events import PipelineEventSink
from .presets import PHASE_CURVES, PHASE_ORACLE, PHASE_READOUT, PRESETS, curve_checks, names, t_star_consistent

FORMATS = ("csv", "svg", "both")
EXIT_OK = 0
# window for the exact vacuum-fluctuation scan, units of 1/g
VACUUM_SCAN = (0.0, 0.05, 201)

_CONSOLE_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"


def setup_logging(out_dir: Optional[Path], verbose: bool = False, quiet: bool = False) -> Optional[int]:
    """Console sink plus a DEBUG file sink in the output directory; returns the file sink id."""
    logger.remove()
    level = "DEBUG" if verbose else ("WARNING" if quiet else "INFO")
    logger.add(sys.stderr, level=level, format=_CONSOLE_FORMAT)
    if out_dir is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    return logger.add(str(out_dir / "run.log"), level="DEBUG", rotation="10 MB")


def stability_report(cfg: ExperimentConfig) -> List[Tuple[str, Optional[str]]]:
    """(curve_id, error message or None) for every sweep point."""
    out = []
    for curve_id, params in cfg.curves():
        try:
            build_hamiltonian(params)
            out.append((curve_id, None))
        except UnstableRegimeError as e:
            out.append((curve_id, str(e)))
    return out


def curve_summary(curve: CurveResult, H_freqs: Sequence[float]) -> Dict[str, Any]:
    series = curve.series
    peak = series.first_peak()
    values = series.values
    hp = series.hp_report
    t_star = peak[0] if peak else None
    return {
        "curve_id": curve.curve_id,
        "params": curve.params.as_dict(),
        "critical_omega": critical_omega(curve.params),
        "normal_frequencies": [float(v) for v in H_freqs],
        "t_star": t_star,
        "peak_logneg": peak[1] if peak else None,
        "t_star_consistent": t_star_consistent(t_star),
        "max_logneg": float(values.max()),
        "onset_time": series.onset_time(),
        "returns_below": returns_below(series.times, values, NOISE_FLOOR),
        "hp_max_ratio": hp.overall_max if hp else None,
        "hp_exceeded": hp.exceeded if hp else None,
        "max_symplectic_residual": float(series.residuals.max()),
        "max_pairing_residual": max(r.pairing_residual for r in series.results),
    }


class ExperimentPipeline:
    def __init__(
        self,
        *,
        config: ExperimentConfig,
        out_dir: Path,
        output_format: str = "both",
        workers: int = 4,
        events: Optional[PipelineEventSink] = None,
        show_progress: bool = True,
    ):
        self.cfg = config
        self.output_format = output_format
        self.workers = max(1, int(workers))
        self.events = events if events is not None else PipelineEventSink()
        self.show_progress = show_progress
        self.writer = ResultWriter(out_dir)

    async def run(self, phases: Sequence[str]) -> None:
        """Runs the requested phases in fixed order; the caller owns the event sink."""
        self.events.emit(
            "run_started",
            name=self.cfg.name,
            phases=list(phases),
            config_path=self.cfg.source or "",
            seed=self.cfg.seed,
        )
        for phase in (PHASE_CURVES, PHASE_ORACLE, PHASE_READOUT):
            if phase not in phases:
                continue
            self.events.emit("phase_started", phase=phase)
            started = time.perf_counter()
            await getattr(self, f"phase_{phase}")()
            elapsed = time.perf_counter() - started
            logger.info(f"[{self.cfg.name}] phase {phase} finished in {elapsed:.2f}s")
            self.events.emit("phase_completed", phase=phase, seconds=elapsed)
        self.events.emit("run_completed", ok=True, files=[str(p) for p in self.writer.written])

    # ---- curves ----

    def _compute_curve(self, curve_id: str, params: PhysicalParams) -> Tuple[CurveResult, np.ndarray]:
        H = build_hamiltonian(params)
        series = entanglement_trajectory(H, initial_state(params), self.cfg.time.grid(), params, self.cfg.propagator)
        return CurveResult(curve_id=curve_id, params=params, series=series), H.normal_freqs

    async def phase_curves(self) -> None:
        specs = self.cfg.curves()
        # rejected before any work starts, so a bad sweep leaves no partial files
        for _, params in specs:
            build_hamiltonian(params)
        sem = asyncio.Semaphore(self.workers)
        bar = tqdm(total=len(specs), desc=f"{self.cfg.name} curves", disable=not self.show_progress)

        async def work(curve_id: str, params: PhysicalParams) -> Tuple[CurveResult, np.ndarray]:
            async with sem:
                result = await asyncio.to_thread(self._compute_curve, curve_id, params)
            bar.update(1)
            logger.info(f"[{self.cfg.name}] curve {curve_id} done")
            self.events.emit("curve_completed", curve_id=curve_id, max_logneg=float(result[0].series.values.max()))
            return result

        try:
            results = await asyncio.gather(*(work(cid, p) for cid, p in specs))
        finally:
            bar.close()

        curves = [r[0] for r in results]
        summaries = [curve_summary(c, freqs) for c, freqs in results]
        for s in summaries:
            if not s["t_star_consistent"]:
                logger.warning(f"[{self.cfg.name}] {s['curve_id']}: first peak t*={s['t_star']} outside the expected window")

        if self.output_format in ("csv", "both"):
            self.writer.write_timeseries(curves, self.cfg.outputs.csv)
        if self.output_format in ("svg", "both"):
            plot_curves = [Curve(self._legend(c), c.series.times, c.series.values) for c in curves]
            SvgPlotter(title=f"{self.cfg.name}: log negativity").write(plot_curves, self.writer.out_dir / self.cfg.outputs.svg)
            self.writer.written.append(self.writer.out_dir / self.cfg.outputs.svg)

        summary: Dict[str, Any] = {
            "name": self.cfg.name,
            "seed": self.cfg.seed,
            "propagator": self.cfg.propagator,
            "noise_floor": NOISE_FLOOR,
            "hp_threshold": HP_RATIO_THRESHOLD,
            "curves": summaries,
        }
        if self.cfg.sweep is not None:
            summary["sweep"] = {"parameter": self.cfg.sweep.parameter, "values": list(self.cfg.sweep.values)}
            summary["checks"] = curve_checks(self.cfg.sweep, summaries)
            if self.cfg.sweep.parameter.startswith("nbar"):
                summary["temperature_table"] = [
                    {"nbar": n, "kT_over_hbar_omega": kt} for n, kt in thermal_temperature_table(self.cfg.sweep.values)
                ]
        self.writer.write_json(summary, self.cfg.outputs.summary)

    def _legend(self, curve: CurveResult) -> str:
        if self.cfg.sweep is None:
            return curve.curve_id
        return curve.curve_id.rsplit("-", 1)[-1]

    # ---- oracle ----

    async def phase_oracle(self) -> None:
        opts = self.cfg.oracle
        reference = self.cfg.reference_params()
        build_hamiltonian(reference)
        bar = tqdm(total=len(opts.n_ladder), desc="oracle ladder", disable=not self.show_progress)

        def on_progress(done: int, total: int) -> None:
            bar.n = done
            bar.refresh()

        try:
            comparisons = await asyncio.to_thread(
                convergence_study,
                reference,
                opts.n_ladder,
                opts.t,
                opts.initial_cutoff,
                opts.max_cutoff,
                opts.tolerance,
                on_progress,
            )
        finally:
            bar.close()
        scan_times = np.linspace(*VACUUM_SCAN)
        times, values = await asyncio.to_thread(vacuum_entanglement_scan, reference, scan_times)
        _, rwa_values = await asyncio.to_thread(vacuum_entanglement_scan, reference, scan_times, rotating_wave=True)
        self.writer.write_oracle(comparisons, "oracle.csv")

        deviations = [c.max_abs_deviation for c in comparisons]
        monotone = all(b < a for a, b in zip(deviations, deviations[1:]))
        if not monotone:
            logger.warning(f"[oracle] deviation not monotone over N ladder: {deviations}")
        k = int(np.argmax(values))
        self.writer.write_json(
            {
                "name": self.cfg.name,
                "reference": reference.as_dict(),
                "t": opts.t,
                "ladder": [asdict(c) for c in comparisons],
                "deviation_monotone": monotone,
                "all_converged": all(c.converged for c in comparisons),
                "vacuum_scan": {
                    "n_spins": 1,
                    "max_logneg": float(values[k]),
                    "t_at_max": float(times[k]),
                    "entangled": bool(values[k] > 0.01),
                    "rotating_wave_max_logneg": float(rwa_values.max()),
                    "rotating_wave_entangled": bool(rwa_values.max() > 0.01),
                },
            },
            "oracle.json",
        )
        self.events.emit("curve_completed", curve_id=f"{self.cfg.name}-oracle", max_abs_deviation=deviations[-1])

    # ---- readout ----

    def _first_peak_state(self) -> Tuple[PhysicalParams, float, Any]:
        params = self.cfg.base_params()
        H = build_hamiltonian(params)
        state0 = initial_state(params)
        series = entanglement_trajectory(H, state0, self.cfg.time.grid(), params, self.cfg.propagator)
        peak = series.first_peak()
        if peak is None:
            raise SimulationError(f"no entanglement peak above {NOISE_FLOOR} on the configured time grid")
        state = evolve(state0, make_propagator(H, peak[0], self.cfg.propagator))
        return params, peak[0], readout_input(state, params)

    async def phase_readout(self) -> None:
        opts = self.cfg.readout
        params, t_star, state = await asyncio.to_thread(self._first_peak_state)
        logger.info(f"[readout] first-peak state at gt={t_star:.6g}")
        result = await asyncio.to_thread(
            readout_study,
            state,
            ReadoutChannel(opts.eta1, opts.eta2),
            opts.samples,
            opts.trials,
            self.cfg.seed,
        )
        self.writer.write_json({"name": self.cfg.name, "params": params.as_dict(), "t_star": t_star, **result}, "readout.json")
        self.events.emit("curve_completed", curve_id=f"{self.cfg.name}-readout", verified=result["verified"])


def build_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="", help="output directory (default: results/<name>)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--propagator", choices=SOURCES, default=None, help="override the propagator construction")
    common.add_argument("--format", dest="output_format", choices=FORMATS, default="both")
    common.add_argument("--workers", type=int, default=4, help="curves computed concurrently")
    common.add_argument(
        "--events-jsonl",
        default="",
        help="Write JSONL progress events to this path. Use '-' for stdout. Empty disables.",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="DEBUG on the console")
    verbosity.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    ap = argparse.ArgumentParser(prog="dicke-entanglement", description="Cavity-mediated ensemble entanglement experiments")
    sub = ap.add_subparsers(dest="verb", required=True)
    run_help = "run a config's curve sweep, plus the readout study when the config has a readout section"
    sub.add_parser("run", parents=[common], help=run_help).add_argument("config")
    sub.add_parser("preset", parents=[common], help="run a built-in experiment").add_argument("name", choices=names())
    sub.add_parser("validate", parents=[common], help="parse, validate and stability-check a config").add_argument("config")
    sub.add_parser("oracle", parents=[common], help="exact-oracle convergence study for a config").add_argument("config")
    return ap


def _resolve(args: argparse.Namespace) -> Tuple[ExperimentConfig, Tuple[str, ...]]:
    if args.verb == "preset":
        builder, phases = PRESETS[args.name]
        cfg = builder()
    else:
        cfg = load_config(Path(args.config))
        if args.verb == "oracle":
            phases = (PHASE_ORACLE,)
        else:
            phases = (PHASE_CURVES, PHASE_READOUT) if cfg.readout_requested else (PHASE_CURVES,)
    return cfg.with_overrides(seed=args.seed, propagator=args.propagator), phases


def _validate(cfg: ExperimentConfig) -> int:
    report = stability_report(cfg)
    bad = [(cid, msg) for cid, msg in report if msg]
    for cid, msg in bad:
        logger.error(f"[validate] {cid}: {msg}")
    if bad:
        return UnstableRegimeError.exit_code
    logger.info(f"[validate] {cfg.name}: {len(report)} curve(s) OK")
    return EXIT_OK


async def run_async(args: argparse.Namespace) -> int:
    events = PipelineEventSink.from_target(str(args.events_jsonl or ""))
    file_sink: Optional[int] = None
    try:
        setup_logging(None, args.verbose, args.quiet)
        cfg, phases = _resolve(args)
        if args.verb == "validate":
            return _validate(cfg)
        out_dir = Path(args.out_dir) if args.out_dir else Path("results") / cfg.name
        file_sink = setup_logging(out_dir, args.verbose, args.quiet)
        pipeline = ExperimentPipeline(
            config=cfg,
            out_dir=out_dir,
            output_format=args.output_format,
            workers=args.workers,
            events=events,
            show_progress=not args.quiet,
        )
        await pipeline.run(phases)
        return EXIT_OK
    except SimulationError as e:
        logger.error(f"[run] {type(e).__name__}: {e}")
        events.emit("run_failed", error=type(e).__name__, message=str(e), exit_code=e.exit_code)
        return e.exit_code
    except Exception as e:
        logger.exception(f"[run] unexpected failure: {e}")
        events.emit("run_failed", error=type(e).__name__, message=str(e), exit_code=SimulationError.exit_code)
        return SimulationError.exit_code
    finally:
        events.close()
        if file_sink is not None:
            logger.remove(file_sink)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    return asyncio.run(run_async(args))


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
