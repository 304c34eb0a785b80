"""
Command-line front end.

Subcommands:
    check           structural checks, JSON on stdout          exit 0 / 2
    rates           full StabilityReport with K_R               exit 0 / 2 / 3
    simulate        one trajectory CSV
    ensemble        n_traj trajectory CSVs + ensemble CSV
    exponent        fitted exponents vs. theoretical bounds
    reproduce-fig1  both two-level panels, CSVs + JSON verdict   exit 0 / 4

Exit codes: 0 success, 1 input or numeric error, 2 stability precondition failed,
3 certificate failure, 4 reproduction verdict failed.
"""

import argparse
import json
import os
import sys
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.models.model_schema import load_model
from src.models.operators import SubspaceSplit
from src.models.run_config import CliInvocation, PanelConfig, Settings, SimConfig
from src.processors.exponent_fit import ExponentFit, fit_exponent, fit_mean_flow
from src.processors.rate_comparison import compare_rates, qubit_model, qubit_reference
from src.processors.stability import SCHEMA_VERSION, analyze
from src.simulation.ensemble import Ensemble, ensemble
from src.simulation.trajectory import Trajectory, simulate
from src.storage.artifact_store import save_ensemble, save_json, save_trajectory
from src.utils.errors import (
    CertificateNotFoundError,
    QsmeError,
    StabilityPreconditionError,
)
from src.utils.logger import get_logger
from src.utils.settings import load_settings

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_STABILITY = 2
EXIT_CERTIFICATE = 3
EXIT_VERDICT = 4


def default_initial_state(split: SubspaceSplit) -> np.ndarray:
    """Maximally mixed state on H_R (V = 1); p0 = 0 for a two-level model."""
    U = split.U_R
    return U @ U.conj().T / split.d_R


def _emit(payload: Dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


class QsmeRunner:
    """Runs one CLI invocation against loaded settings."""

    def __init__(self, invocation: CliInvocation, settings: Optional[Settings] = None):
        self.inv = invocation
        self.settings = settings or load_settings()
        self.output_dir = invocation.output_dir
        self.start_time = time.monotonic()

    def log_stage(self, stage: str):
        elapsed = int(time.monotonic() - self.start_time)
        logger.info("=" * 60)
        logger.info(f"[{elapsed}s] STAGE: {stage}")
        logger.info("=" * 60)

    def _settings(self) -> Settings:
        return self.settings.model_copy(
            update={"optimizer": self.inv.optimizer_config(self.settings.optimizer)}
        )

    def _load(self):
        return load_model(self.inv.model_path, self.settings.tolerances)

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    # =========================================================================
    # ANALYSIS
    # =========================================================================

    def cmd_check(self) -> int:
        model, split = self._load()
        self.log_stage("CHECK - invariance, GAS, SP, ND")
        report = analyze(model, split, self._settings(), certificate=False)
        _emit(report.check_summary())
        return EXIT_OK if report.invariant and report.gas else EXIT_STABILITY

    def cmd_rates(self) -> int:
        model, split = self._load()
        self.log_stage("RATES - alpha0, alpha0', alpha1, beta0, K_R")
        report = analyze(model, split, self._settings(), epsilon=self.inv.epsilon)
        payload = report.to_dict()
        save_json(payload, self._path("rates.json"))

        summary = {k: payload[k] for k in ("invariant", "gas", "alpha0", "alpha0_prime", "alpha1", "beta0")}
        if report.certificate is not None:
            summary["certificate_residual"] = report.certificate.residual
        _emit(summary)

        if not (report.invariant and report.gas):
            return EXIT_STABILITY
        if report.certificate is None:
            return EXIT_CERTIFICATE
        return EXIT_OK

    # =========================================================================
    # SIMULATION
    # =========================================================================

    def _sim_config(self) -> SimConfig:
        return self.inv.sim_config(self.settings.simulation)

    def cmd_simulate(self) -> int:
        model, split = self._load()
        cfg = self._sim_config()
        self.log_stage(f"SIMULATE - T={cfg.t_final}, dt={cfg.dt}, seed={cfg.seed}")
        traj = simulate(model, split, default_initial_state(split), cfg)
        save_trajectory(traj, self._path("trajectory.csv"))
        _emit(traj.summary())
        return EXIT_OK

    def cmd_ensemble(self) -> int:
        model, split = self._load()
        cfg = self._sim_config()
        self.log_stage(f"ENSEMBLE - {cfg.n_traj} trajectories, T={cfg.t_final}, dt={cfg.dt}")
        ens = ensemble(model, split, default_initial_state(split), cfg, max_workers=self.settings.threads)

        for traj in ens.trajectories:
            save_trajectory(traj, self._path(f"trajectory_{traj.index:03d}.csv"))
        save_ensemble(ens, self._path("ensemble.csv"))
        _emit(
            {
                "n": ens.n,
                "final_mean_V": float(ens.mean_v[-1]),
                "final_stderr_V": float(ens.stderr_v[-1]),
                "absorbed": ens.absorbed,
                "jumps": sum(t.jump_count for t in ens.trajectories),
            }
        )
        return EXIT_OK

    def cmd_exponent(self) -> int:
        model, split = self._load()
        cfg = self._sim_config()
        settings = self._settings()
        analysis = settings.analysis
        rho0 = default_initial_state(split)

        self.log_stage("EXPONENT - stability report")
        report = analyze(model, split, settings, epsilon=self.inv.epsilon, certificate=False)
        if not report.gas:
            _emit(report.check_summary())
            return EXIT_STABILITY

        self.log_stage(f"EXPONENT - {cfg.n_traj} trajectories, T={cfg.t_final}")
        ens = ensemble(
            model, split, rho0, cfg,
            reducer=self._fit_reducer(cfg),
            keep_trajectories=False,
            max_workers=settings.threads,
        )
        mean_fit = self._mean_fit(ens.times, ens.mean_v, cfg)
        flow_fit = fit_mean_flow(
            model, split, rho0, max(cfg.t_final, cfg.dt),
            n_points=analysis.mean_flow_points, v_floor=cfg.v_floor, skip_fraction=analysis.skip_fraction,
        )
        comparison = compare_rates(
            report, ens.reductions, mean_fit, slack_fraction=analysis.slack_fraction, seeds=ens.seeds
        )

        payload = comparison.to_dict()
        payload["mean_flow_fit"] = flow_fit.to_dict()
        payload["ensemble_mean_fit"] = mean_fit.to_dict() if mean_fit else None
        save_json(payload, self._path("exponent.json"))
        _emit({"status": comparison.status, "median_slope": comparison.median_slope,
               "mean_slope": comparison.mean_slope, "mean_flow_slope": flow_fit.slope,
               "alpha0": report.alpha0, "beta0": report.beta0})
        return EXIT_OK

    def _fit_reducer(self, cfg: SimConfig):
        analysis = self.settings.analysis

        def reduce(traj: Trajectory) -> Optional[ExponentFit]:
            try:
                return fit_exponent(
                    traj.times, traj.ln_v_series, v_floor=cfg.v_floor,
                    skip_fraction=analysis.skip_fraction, min_points=analysis.min_points,
                )
            except QsmeError as e:
                logger.debug(f"trajectory {traj.index}: no fit ({e})")
                return None

        return reduce

    def _mean_fit(self, times, mean_v, cfg: SimConfig) -> Optional[ExponentFit]:
        analysis = self.settings.analysis
        with np.errstate(divide="ignore"):
            ln_mean = np.log(np.maximum(mean_v, 0.0))
        try:
            return fit_exponent(
                times, ln_mean, v_floor=cfg.v_floor,
                skip_fraction=analysis.skip_fraction, min_points=analysis.min_points,
            )
        except QsmeError as e:
            logger.warning(f"ensemble mean: no fit ({e})")
            return None

    # =========================================================================
    # FIGURE 1
    # =========================================================================

    def _panel(self, name: str, panel: PanelConfig) -> Tuple[Dict, Ensemble]:
        fig = self.settings.fig1
        analysis = self.settings.analysis
        model, split = qubit_model(fig.l_P, panel.l_S, panel.l_R)
        ref = qubit_reference(fig.l_P, panel.l_S, panel.l_R)

        base = self.settings.simulation.model_copy(
            update={
                "dt": fig.dt,
                "t_final": panel.t_final,
                "seed": fig.seed,
                "n_traj": fig.n_traj,
                "record_stride": fig.record_stride,
                "batch_size": fig.n_traj,
            }
        )
        overrides = self.inv.model_copy(update={"t_final": None})
        cfg = overrides.sim_config(base)

        self.log_stage(f"FIGURE 1 {name.upper()} - alpha0={ref.alpha0:g}, alpha1={ref.alpha1:g}, T={cfg.t_final}")
        report = analyze(model, split, self._settings(), certificate=False)
        ens = ensemble(
            model, split, default_initial_state(split), cfg,
            reducer=self._fit_reducer(cfg), keep_trajectories=True, max_workers=self.settings.threads,
        )
        mean_fit = self._mean_fit(ens.times, ens.mean_v, cfg)
        comparison = compare_rates(
            report, ens.reductions, mean_fit,
            slack_fraction=analysis.slack_fraction, qubit=ref, band=fig.band, seeds=ens.seeds,
        )

        slopes = [f.slope for f in ens.reductions if f is not None]
        within_30 = (
            float(np.mean([abs(s - ref.as_exponent) <= 0.3 * abs(ref.as_exponent) for s in slopes]))
            if slopes else 0.0
        )
        mean_pass = (
            mean_fit is not None and abs(mean_fit.slope + ref.alpha0) <= fig.mean_band * ref.alpha0
        )
        passed = bool(comparison.qubit_match)
        logger.info(
            f"{'✅' if passed else '❌'} {name}: median slope {comparison.median_slope} "
            f"vs {ref.as_exponent:g} (band ±{fig.band:.0%})"
        )
        payload = {
            "pass": passed,
            "expected_exponent": ref.as_exponent,
            "reference": ref.to_dict(),
            "median_slope": comparison.median_slope,
            "iqr": list(comparison.iqr) if comparison.iqr else None,
            "fraction_within_30pct": within_30,
            "mean_slope": mean_fit.slope if mean_fit else None,
            "mean_pass": bool(mean_pass),
            "comparison": comparison.to_dict(),
        }
        return payload, ens

    def _save_panel(self, name: str, ens: Ensemble):
        panel_dir = os.path.join(self.output_dir, f"fig1_{name}")
        save_ensemble(ens, os.path.join(panel_dir, "ensemble.csv"))
        for traj in ens.trajectories[: self.settings.fig1.sample_trajectories]:
            save_trajectory(traj, os.path.join(panel_dir, f"trajectory_{traj.index:03d}.csv"))

    def cmd_reproduce_fig1(self) -> int:
        fig = self.settings.fig1
        left, left_ens = self._panel("left", fig.left)
        right, right_ens = self._panel("right", fig.right)

        # nothing is written until both panels are computed
        self._save_panel("left", left_ens)
        self._save_panel("right", right_ens)
        verdict = {"schema_version": SCHEMA_VERSION, "left": left, "right": right}
        save_json(verdict, self._path("fig1_verdict.json"))
        _emit({side: {"pass": verdict[side]["pass"], "median_slope": verdict[side]["median_slope"]}
               for side in ("left", "right")})
        return EXIT_OK if verdict["left"]["pass"] and verdict["right"]["pass"] else EXIT_VERDICT

    def run(self) -> int:
        dispatch = {
            "check": self.cmd_check,
            "rates": self.cmd_rates,
            "simulate": self.cmd_simulate,
            "ensemble": self.cmd_ensemble,
            "exponent": self.cmd_exponent,
            "reproduce-fig1": self.cmd_reproduce_fig1,
        }
        return dispatch[self.inv.subcommand]()


# =============================================================================
# CLI INTERFACE
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Stochastic master equation stability toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python run_qsme.py check --model config/models/qubit_fig1_left.json
  python run_qsme.py rates --model config/models/three_level_driven.json --out outputs/rates
  python run_qsme.py ensemble --model config/models/qubit_fig1_left.json --n-traj 8 --t-final 10
  python run_qsme.py reproduce-fig1 --out outputs/fig1
        """,
    )
    parser.add_argument("subcommand", help="check | rates | simulate | ensemble | exponent | reproduce-fig1")
    parser.add_argument("--model", dest="model_path", default=None, help="Model JSON file")
    parser.add_argument("--out", dest="output_dir", default="outputs", help="Output directory (default: outputs)")
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--t-final", dest="t_final", type=float, default=None)
    parser.add_argument("--n-traj", dest="n_traj", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None, help="Certificate margin (default alpha0/2)")
    parser.add_argument("--starts", type=int, default=None, help="alpha_1 optimizer starts")
    parser.add_argument("--settings", default=None, help="Alternate settings.yaml")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(args).items() if k != "settings" and v is not None}

    try:
        invocation = CliInvocation(**fields)
        settings = load_settings(args.settings)
        return QsmeRunner(invocation, settings).run()
    except ValidationError as e:
        print(f"❌ Invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except StabilityPreconditionError as e:
        print(f"❌ Stability precondition failed: {e}", file=sys.stderr)
        return EXIT_STABILITY
    except CertificateNotFoundError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except (QsmeError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INPUT
