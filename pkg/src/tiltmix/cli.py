"""Command-line front end: fit estimators, variance reports, simulation runs.

Three commands share one datafow: ``fit`` estimates a model on a CSV dataset
and emits JSON; ``avar`` computes a limiting-variance report either from a
known scenario (oracle Monte Carlo) or from a dataset plus a previous fit
(empirical plug-in); ``simulate`` runs the replication engine over a
scenario config and emits the summary CSV.

Exit codes: 0 success, 1 usage or config error, 2 estimation failure
(a structured ``{"error": ..., "message": ...}`` JSON object goes to stderr),
3 I/O error. All randomness flows from explicit seed values; outputs are
byte-identical across reruns with the same inputs.
"""

from __future__ import annotations

import json
import os
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import errors
from .avar import (
    IntegrationMode,
    IntegrationSpec,
    VarianceReport,
    compute_s_blocks,
    config_from_scenario,
    psd_check,
    u_case,
    v_constant,
)
from .errors import EstimationError, InputOutputError, NotApplicable
from .etm_oss import fit_m3, fit_m4
from .etm_rs import fit_m1, fit_m2
from .harness import render_summary_csv, run_scenario
from .model import (
    Case,
    ConditionalParams,
    Design,
    EtmEstimate,
    TiltParams,
    load_dataset,
)
from .numerics import SolveDiagnostics, SolverSettings, sym_eig_desc
from .simgen import GaussianPair, Scenario
from .supervised import fit_logistic, sandwich_avar

_CASE_DESIGNS = {
    Case.M1: Design.RANDOM_SAMPLING,
    Case.M2: Design.RANDOM_SAMPLING,
    Case.M3: Design.OUTCOME_STRATIFIED,
    Case.M4: Design.OUTCOME_STRATIFIED,
}

_EQUALITY_REL_TOL = 0.01
_PSD_REL_TOL = 1e-4


def _settings_from(grad_tol: float | None) -> SolverSettings | None:
    if grad_tol is None:
        return None
    if not grad_tol > 0.0:
        raise errors.UsageError(f"--grad-tol must be positive, got {grad_tol}")
    return SolverSettings(grad_tol=grad_tol)


def _resolve_design(case: Case, design_name: str | None) -> Design:
    inferred = _CASE_DESIGNS.get(case)
    if design_name is None:
        if inferred is None:
            raise errors.UsageError(
                "--design is required with --case logistic (rs or oss)"
            )
        return inferred
    design = Design(design_name)
    if inferred is not None and design is not inferred:
        raise errors.UsageError(
            f"case {case.value} runs under the {inferred.value} design, "
            f"but --design {design.value} was given"
        )
    return design


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot write {out}: {exc}") from exc


def _json_document(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _load_toml(path_or_name: str) -> dict:
    path = Path(path_or_name)
    if path.is_file():
        raw = path.read_bytes()
    else:
        name = path_or_name if path_or_name.endswith(".toml") else path_or_name + ".toml"
        bundled = resources.files("tiltmix").joinpath("configs", name)
        if "/" not in path_or_name and bundled.is_file():
            raw = bundled.read_bytes()
        else:
            raise InputOutputError(f"config file not found: {path_or_name}")
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise errors.UsageError(f"config does not parse as TOML: {exc}") from exc


def _scenario_from_config(
    cfg: dict, rho_u_star: float, seed_base: int | None, replications: int | None = None
) -> Scenario:
    try:
        pair = GaussianPair(
            mu0=np.asarray(cfg["mu0"], dtype=float),
            mu1=np.asarray(cfg["mu1"], dtype=float),
            sigma_diag=np.asarray(cfg["sigma_diag"], dtype=float),
        )
        design = Design(cfg["design"])
        kwargs = {}
        if design is Design.OUTCOME_STRATIFIED:
            kwargs["n1"] = int(cfg["n1"])
        else:
            kwargs["rho_l_star"] = float(cfg["rho_l_star"])
        return Scenario(
            pair=pair,
            design=design,
            n=int(cfg["n"]),
            n2=int(cfg["n2"]),
            rho_u_star=float(rho_u_star),
            replications=int(replications if replications is not None else cfg["replications"]),
            seed_base=int(seed_base if seed_base is not None else cfg["seed_base"]),
            **kwargs,
        )
    except KeyError as exc:
        raise errors.UsageError(f"config is missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError, EstimationError) as exc:
        raise errors.UsageError(f"invalid scenario config: {exc}") from exc


def _rho_u_grid(cfg: dict) -> list[float]:
    try:
        grid = [float(v) for v in cfg["rho_u_grid"]]
    except KeyError as exc:
        raise errors.UsageError("config is missing key 'rho_u_grid'") from exc
    except (TypeError, ValueError) as exc:
        raise errors.UsageError(f"rho_u_grid must be a list of reals: {exc}") from exc
    if not grid:
        raise errors.UsageError("rho_u_grid must be non-empty")
    return grid


def _estimate_from_json(payload: dict) -> EtmEstimate:
    doc = payload.get("estimate", payload)
    try:
        diag = doc.get("diagnostics", {})
        return EtmEstimate(
            case=Case(doc["case"]),
            tilt=TiltParams(float(doc["beta0"]), np.asarray(doc["beta1"], dtype=float)),
            conditional=ConditionalParams(
                float(doc["beta0c"]), np.asarray(doc["beta1c"], dtype=float)
            ),
            rho_ell=None if doc.get("rho_ell") is None else float(doc["rho_ell"]),
            rho_u=None if doc.get("rho_u") is None else float(doc["rho_u"]),
            alpha=None if doc.get("alpha") is None else float(doc["alpha"]),
            diagnostics=SolveDiagnostics(
                iterations=int(diag.get("iterations", 0)),
                final_grad_norm=float(diag.get("final_grad_norm", 0.0)),
                converged=bool(diag.get("converged", True)),
                objective_value=float(diag.get("objective_value", 0.0)),
            ),
            warning=doc.get("warning"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.UsageError(f"fit JSON lacks a valid estimate: {exc}") from exc


def _spectral_norm(m: np.ndarray) -> float:
    eigs = sym_eig_desc(m)
    return float(np.max(np.abs(eigs)))


def _verdict(report: VarianceReport) -> str:
    """Classify the baseline-vs-case comparison.

    "equality" when the scaled difference is negligible against the scaled
    baseline (1% relative Frobenius), "psd-ordered" when it is positive
    semidefinite within 1e-4 of the scaled baseline's spectral norm, else
    "violated".
    """
    base_scaled = report.U_baseline / report.n
    diff = report.scaled_diff
    base_frob = float(np.linalg.norm(base_scaled))
    if float(np.linalg.norm(diff)) <= _EQUALITY_REL_TOL * base_frob:
        return "equality"
    if psd_check(diff, _PSD_REL_TOL * _spectral_norm(base_scaled)):
        return "psd-ordered"
    return "violated"


@click.group(name="tiltmix")
def cli() -> None:
    """Semi-supervised estimation under exponential tilt mixtures."""


@cli.command(name="fit")
@click.argument("data", type=str)
@click.option(
    "--case",
    "case_name",
    required=True,
    type=click.Choice([c.value for c in Case]),
    help="Estimator: logistic baseline or one of the tilt-mixture cases.",
)
@click.option(
    "--design",
    "design_name",
    type=click.Choice([d.value for d in Design]),
    default=None,
    help="Sampling design; inferred from the case when unambiguous.",
)
@click.option("--rho-u", type=float, default=None, help="Known unlabeled proportion (case m4).")
@click.option("--with-avar", is_flag=True, help="Attach an empirical variance report.")
@click.option("--out", type=str, default=None, help="Write JSON here instead of stdout.")
@click.option("--grad-tol", type=float, default=None, help="Solver gradient tolerance.")
def cmd_fit(
    data: str,
    case_name: str,
    design_name: str | None,
    rho_u: float | None,
    with_avar: bool,
    out: str | None,
    grad_tol: float | None,
) -> None:
    """Fit one estimator on a dataset CSV and emit the estimate as JSON."""
    case = Case(case_name)
    design = _resolve_design(case, design_name)
    if case is Case.M4 and rho_u is None:
        raise errors.UsageError("case m4 needs --rho-u (the known unlabeled proportion)")
    if case is not Case.M4 and rho_u is not None:
        raise errors.UsageError("--rho-u applies to case m4 only")
    settings = _settings_from(grad_tol)

    if not Path(data).is_file():
        raise InputOutputError(f"dataset file not found: {data}")
    ds = load_dataset(data, design)

    if case is Case.LOGISTIC:
        est = fit_logistic(ds, settings)
    elif case is Case.M1:
        est = fit_m1(ds, settings)
    elif case is Case.M2:
        est = fit_m2(ds, settings)
    elif case is Case.M3:
        est = fit_m3(ds, settings)
    else:
        est = fit_m4(ds, rho_u_known=rho_u, settings=settings)

    payload: dict = {"estimate": est.as_dict()}
    if with_avar:
        if case is Case.LOGISTIC:
            if design is not Design.RANDOM_SAMPLING:
                raise errors.UsageError(
                    "the labeled-only variance report is defined under the "
                    "random-sampling design"
                )
            blocks = sandwich_avar(ds, est)
            payload["avar"] = {
                "H": blocks.H.tolist(),
                "G": blocks.G.tolist(),
                "U0": blocks.U0.tolist(),
            }
        else:
            spec = IntegrationSpec(mode=IntegrationMode.EMPIRICAL_PLUGIN)
            s_blocks = compute_s_blocks(ds, est, spec)
            report = u_case(est.case, s_blocks)
            payload["avar"] = report.as_dict()
    _emit(_json_document(payload), out)


@cli.command(name="simulate")
@click.argument("config", type=str)
@click.option("--workers", type=int, default=None, help="Process count (default: all cores).")
@click.option("--seed", type=int, default=None, help="Override the config's seed_base.")
@click.option("--out", type=str, default=None, help="Write CSV here instead of stdout.")
@click.option("--grad-tol", type=float, default=None, help="Solver gradient tolerance.")
def cmd_simulate(
    config: str,
    workers: int | None,
    seed: int | None,
    out: str | None,
    grad_tol: float | None,
) -> None:
    """Run the replication grid from a scenario config; emit the summary CSV."""
    cfg = _load_toml(config)
    settings = _settings_from(grad_tol)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise errors.UsageError(f"--workers must be >= 1, got {workers}")

    try:
        cases = [Case(c) for c in cfg.get("cases", [])]
    except ValueError as exc:
        raise errors.UsageError(f"invalid case in config: {exc}") from exc
    if not cases:
        raise errors.UsageError("config must list at least one case in 'cases'")
    for case in cases:
        if case not in _CASE_DESIGNS:
            raise errors.UsageError(
                "simulate compares tilt-mixture cases against the logistic "
                f"baseline; {case.value!r} is not one of m1, m2, m3, m4"
            )

    summaries = []
    for rho_u_star in _rho_u_grid(cfg):
        scenario = _scenario_from_config(cfg, rho_u_star, seed)
        for case in cases:
            if _CASE_DESIGNS[case] is not scenario.design:
                raise errors.UsageError(
                    f"case {case.value} needs the {_CASE_DESIGNS[case].value} "
                    f"design, but the config says {scenario.design.value}"
                )
            summaries.append(run_scenario(scenario, case, settings, workers=workers))
    _emit(render_summary_csv(summaries), out)


@cli.command(name="avar")
@click.option(
    "--case",
    "case_name",
    required=True,
    type=click.Choice([c.value for c in Case if c is not Case.LOGISTIC]),
    help="Tilt-mixture case for the report.",
)
@click.option("--config", "config_path", type=str, default=None, help="Scenario config (oracle mode).")
@click.option("--rho-u", type=float, default=None, help="Unlabeled proportion (oracle mode).")
@click.option("--draws", type=int, default=1_000_000, help="Monte Carlo draws (oracle mode).")
@click.option("--seed", type=int, default=0, help="Monte Carlo seed (oracle mode).")
@click.option("--data", "data_path", type=str, default=None, help="Dataset CSV (plug-in mode).")
@click.option("--fit", "fit_path", type=str, default=None, help="Fit JSON (plug-in mode).")
@click.option("--out", type=str, default=None, help="Write JSON here instead of stdout.")
def cmd_avar(
    case_name: str,
    config_path: str | None,
    rho_u: float | None,
    draws: int,
    seed: int,
    data_path: str | None,
    fit_path: str | None,
    out: str | None,
) -> None:
    """Limiting-variance report: oracle (known scenario) or plug-in (data + fit)."""
    case = Case(case_name)

    if config_path is not None and data_path is not None:
        raise errors.UsageError("pass either --config (oracle) or --data (plug-in), not both")

    if config_path is not None:
        cfg = _load_toml(config_path)
        if rho_u is None:
            grid = _rho_u_grid(cfg)
            if len(grid) != 1:
                raise errors.UsageError(
                    "--rho-u is required when the config's rho_u_grid has "
                    f"{len(grid)} entries"
                )
            rho_u = grid[0]
        scenario = _scenario_from_config(cfg, rho_u, None, replications=1)
        if _CASE_DESIGNS[case] is not scenario.design:
            raise errors.UsageError(
                f"case {case.value} needs the {_CASE_DESIGNS[case].value} design, "
                f"but the config says {scenario.design.value}"
            )
        spec = IntegrationSpec(mode=IntegrationMode.ORACLE_MONTE_CARLO, mc_draws=draws, seed=seed)
        blocks = compute_s_blocks(scenario, None, spec)
        counts = config_from_scenario(scenario)
    elif data_path is not None:
        if fit_path is None:
            raise errors.UsageError("plug-in mode needs --fit (JSON from a previous fit)")
        if not Path(fit_path).is_file():
            raise errors.UsageError(f"fit JSON not found: {fit_path}")
        if not Path(data_path).is_file():
            raise InputOutputError(f"dataset file not found: {data_path}")
        try:
            fit_doc = json.loads(Path(fit_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.UsageError(f"cannot parse fit JSON: {exc}") from exc
        est = _estimate_from_json(fit_doc)
        if est.case is Case.LOGISTIC:
            raise errors.UsageError("plug-in variance reports need a tilt-mixture fit")
        ds = load_dataset(data_path, _CASE_DESIGNS[est.case])
        spec = IntegrationSpec(mode=IntegrationMode.EMPIRICAL_PLUGIN)
        blocks = compute_s_blocks(ds, est, spec)
        counts = blocks.config
    else:
        raise errors.UsageError("pass --config (oracle mode) or --data with --fit (plug-in mode)")

    report = u_case(case, blocks, counts)
    try:
        v = v_constant(blocks, counts)
    except NotApplicable:
        v = None
    payload = {"report": report.as_dict(), "v": v, "psd_verdict": _verdict(report)}
    _emit(_json_document(payload), out)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the exit code instead of raising SystemExit."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except errors.UsageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except InputOutputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except EstimationError as exc:
        click.echo(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            err=True,
        )
        return 2
    return int(rv) if isinstance(rv, int) else 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
