"""Command-line surface: analyze, synthesize, simulate and demo."""

import argparse
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from src.api.fixtures import DemoFixture, fixture_names, get_fixture
from src.api.model_file import encode_matrix, parse_model, parse_target_file, write_model
from src.api.report_file import (
    analysis_section,
    build_report,
    encode_spectrum,
    report_text,
    synthesis_section,
    verification_section,
    write_report,
)
from src.core.analysis import is_attractive, spectrum, steady_states
from src.core.config import ExitCode, SimulationConfig, StabilizerConfig, SynthesisConfig, ToleranceConfig
from src.core.exceptions import DomainError, NumericalError, PreconditionError, StabilizerError
from src.core.matrix_core import principal_angles
from src.core.model import fme_reduce
from src.core.simulate import convergence_rate, monte_carlo_verify
from src.core.stabilizer import Stabilizer
from src.data.analysis_report import AnalysisReport
from src.data.lindblad_model import FeedbackModel, LindbladModel
from src.data.parsed_model import ModelOptions, ParsedModel
from src.data.synthesis_result import SynthesisResult
from src.data.target import TargetSpec
from src.utils.logger import logger

CSV_COLUMNS = ["t", "V", "fidelity", "purity", "trajectory_id"]


def verdict_exit_code(report: AnalysisReport) -> ExitCode:
    """0 attractive, 2 invariant but not (provably) attractive, 3 not invariant."""
    if not report.invariant:
        return ExitCode.NOT_INVARIANT
    if report.attractive:
        return ExitCode.SUCCESS
    return ExitCode.INVARIANT_ONLY


def synthesis_exit_code(result: SynthesisResult) -> ExitCode:
    if not result.feasible:
        return ExitCode.INFEASIBLE
    if result.verified_attractive:
        return ExitCode.SUCCESS
    return ExitCode.INVARIANT_ONLY


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, help="JSON model file")
    parser.add_argument("--target", help="JSON file with a {kind, payload} object overriding the model's target")
    parser.add_argument("--tol", type=float, help="rank tolerance relative to the operator scale")
    parser.add_argument("--coupling-scale", type=float, help="magnitude of synthesized couplings")
    parser.add_argument("--seed", type=int, help="seed for random draws")
    parser.add_argument("--strict-initfree", action="store_true", help="also require vanishing P-blocks")
    parser.add_argument("--out-report", help="write the JSON report here instead of stdout")


def _add_simulation_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--T", type=float, dest="horizon", help="final time; defaults to 50/rate or 100")
    parser.add_argument("--steps", type=int, default=200, help="sampling intervals on [0, T]")
    parser.add_argument("--ensemble", type=int, default=20, help="number of seeded initial states")
    parser.add_argument("--eps", type=float, default=1e-6, help="verification threshold on the final deficit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabilizer", description="Analyze and synthesize stabilizing controls for Lindblad dynamics."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", help="invariance and attractivity verdicts")
    _add_common_arguments(analyze)

    synthesize = commands.add_parser("synthesize", help="design feedback and Hamiltonian corrections")
    _add_common_arguments(synthesize)
    synthesize.add_argument("--out-model", help="write the closed-loop model file here")

    simulate = commands.add_parser("simulate", help="propagate a seeded ensemble and verify convergence")
    _add_common_arguments(simulate)
    _add_simulation_arguments(simulate)
    simulate.add_argument("--out-csv", help="write the t, V, fidelity, purity series here")

    demo = commands.add_parser("demo", help="run a bundled example end to end")
    demo.add_argument("name", choices=fixture_names())
    demo.add_argument("--coupling-scale", type=float, help="magnitude of synthesized couplings")
    demo.add_argument("--seed", type=int, help="seed for random draws")
    demo.add_argument("--out-report", help="write the JSON report here")
    _add_simulation_arguments(demo)
    return parser


def _config(args: argparse.Namespace, options: ModelOptions, horizon: Optional[float] = None) -> StabilizerConfig:
    """Flags override the model file's options."""

    def pick(name: str, fallback: Any) -> Any:
        value = getattr(args, name, None)
        return fallback if value is None else value

    seed = pick("seed", options.seed)
    try:
        return StabilizerConfig(
            tolerances=ToleranceConfig(tol=pick("tol", options.tol)),
            synthesis=SynthesisConfig(
                coupling_scale=pick("coupling_scale", options.coupling_scale),
                seed=seed,
                strict_initfree=getattr(args, "strict_initfree", False),
            ),
            simulation=SimulationConfig(
                horizon=pick("horizon", horizon),
                steps=getattr(args, "steps", 200),
                ensemble=getattr(args, "ensemble", 20),
                eps=getattr(args, "eps", 1e-6),
                seed=seed,
            ),
        )
    except ValueError as e:
        raise DomainError(str(e)) from e


def _load(args: argparse.Namespace) -> ParsedModel:
    parsed = parse_model(args.model)
    if args.target:
        parsed.target = parse_target_file(args.target, parsed.model.dim)
    return parsed


def _emit(document: Dict[str, Any], path: Optional[str]) -> None:
    if path:
        write_report(path, document)
    else:
        sys.stdout.write(report_text(document))


def _steady_section(model: LindbladModel, tol: float) -> Optional[Dict[str, Any]]:
    try:
        basis, fixed = steady_states(model, tol)
    except NumericalError as e:
        logger.warning("Steady states unavailable: %s", e)
        return None
    return {"dimension": len(basis), "fixed_state": encode_matrix(fixed.rho)}


def _rate(model: LindbladModel, target: TargetSpec, tol: float) -> Optional[float]:
    """Spectral gap, or None when the target is not attractive or nothing decays."""
    try:
        rate = convergence_rate(model, target.subspace, tol)
    except PreconditionError:
        return None
    return rate if np.isfinite(rate) else None


def _analysis_document(
    command: str,
    stabilizer: Stabilizer,
    parsed: ParsedModel,
    model: LindbladModel,
    report: AnalysisReport,
    synthesis: Optional[SynthesisResult] = None,
    **extra: Any,
) -> Dict[str, Any]:
    return build_report(
        command,
        parsed.digest,
        analysis=analysis_section(report),
        synthesis=None if synthesis is None else synthesis_section(synthesis),
        spectrum=encode_spectrum(spectrum(model)),
        steady_states=_steady_section(model, stabilizer.tol),
        convergence_rate=_rate(model, parsed.target, stabilizer.tol),
        **extra,
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    parsed = _load(args)
    stabilizer = Stabilizer(_config(args, parsed.options))
    model, synthesis = stabilizer.closed_loop(parsed.model, parsed.target)
    report = stabilizer.analyze(model, parsed.target)
    _emit(_analysis_document("analyze", stabilizer, parsed, model, report, synthesis), args.out_report)
    return verdict_exit_code(report)


def cmd_synthesize(args: argparse.Namespace) -> int:
    parsed = _load(args)
    config = _config(args, parsed.options)
    stabilizer = Stabilizer(config)
    result = stabilizer.synthesize(parsed.model, parsed.target)
    if not result.feasible:
        logger.error("Synthesis infeasible: %s", result.infeasibility_reason)
        _emit(build_report("synthesize", parsed.digest, synthesis=synthesis_section(result)), args.out_report)
        return synthesis_exit_code(result)

    report = stabilizer.analyze(result.closed_loop, parsed.target)
    _emit(_analysis_document("synthesize", stabilizer, parsed, result.closed_loop, report, result), args.out_report)
    if args.out_model:
        options = ModelOptions(config.tolerances.tol, config.synthesis.coupling_scale, config.synthesis.seed)
        write_model(args.out_model, result.closed_loop, parsed.target, options)
    return synthesis_exit_code(result)


def _simulation_exit_code(verification_passed: Optional[bool], verdict: ExitCode) -> ExitCode:
    if verification_passed is None or verification_passed:
        return ExitCode.SUCCESS
    return verdict if verdict is not ExitCode.SUCCESS else ExitCode.INVARIANT_ONLY


def cmd_simulate(args: argparse.Namespace) -> int:
    parsed = _load(args)
    stabilizer = Stabilizer(_config(args, parsed.options))
    model, synthesis = stabilizer.closed_loop(parsed.model, parsed.target)
    run = stabilizer.simulate(model, parsed.target)
    if args.out_csv:
        run.frame[CSV_COLUMNS].to_csv(args.out_csv, index=False)
        logger.info("Wrote %d metric rows to %s", len(run.frame), args.out_csv)

    report = stabilizer.analyze(model, parsed.target)
    final = run.frame[run.frame["t"] == run.frame["t"].max()]
    summary = {
        "horizon": run.horizon,
        "steps": 0 if run.horizon == 0 else stabilizer.config.simulation.steps,
        "final_fidelity_min": float(final["fidelity"].min()),
        "final_V_max": float(final["V"].max()),
    }
    document = _analysis_document(
        "simulate",
        stabilizer,
        parsed,
        model,
        report,
        synthesis,
        metrics=summary,
        verification=None if run.verification is None else verification_section(run.verification),
    )
    _emit(document, args.out_report)
    passed = None if run.verification is None else run.verification.passed
    return _simulation_exit_code(passed, verdict_exit_code(report))


def _format(matrix: np.ndarray) -> str:
    return np.array2string(np.asarray(matrix), precision=4, suppress_small=True, max_line_width=120)


def _published_residuals(fixture: DemoFixture, result: SynthesisResult) -> Dict[str, float]:
    synthesized = {
        "feedback": result.feedback,
        "hamiltonian_correction": result.hamiltonian_correction,
        "noise": result.closed_loop.absorbed_noise[0] if result.closed_loop.noise else None,
    }
    residuals = {}
    for name, published in fixture.published.items():
        ours = synthesized.get(name)
        if ours is None:
            continue
        residuals[name] = float(np.max(np.abs(ours - published)))
        print(f"{name} (synthesized):\n{_format(ours)}")
        print(f"{name} (published):\n{_format(published)}")
        print(f"{name} max elementwise residual: {residuals[name]:.3e}")
    return residuals


def _published_loop_attractive(fixture: DemoFixture, parsed: ParsedModel, tol: float) -> Optional[bool]:
    """Whether the published feedback and correction stabilize the target on their own."""
    if not isinstance(parsed.model, FeedbackModel) or "feedback" not in fixture.published:
        return None
    correction = fixture.published.get("hamiltonian_correction", np.zeros_like(parsed.model.hamiltonian))
    loop = fme_reduce(
        FeedbackModel(parsed.model.hamiltonian + correction, parsed.model.measurement, fixture.published["feedback"])
    )
    return bool(is_attractive(loop, parsed.target.subspace, tol).attractive)


def cmd_demo(args: argparse.Namespace) -> int:
    fixture = get_fixture(args.name)
    parsed = fixture.load()
    stabilizer = Stabilizer(_config(args, parsed.options, horizon=fixture.horizon))
    print(f"{fixture.name}: {fixture.description}")
    result = stabilizer.synthesize(parsed.model, parsed.target, free_blocks=fixture.free_blocks)
    if not result.feasible:
        print(f"synthesis infeasible: {result.infeasibility_reason}")
        return synthesis_exit_code(result)

    seeded = fixture.free_blocks is not None
    if seeded:
        print("free diagonal feedback blocks are seeded from the published feedback; the residuals check the rest")
    residuals = _published_residuals(fixture, result)
    report = stabilizer.analyze(result.closed_loop, parsed.target)
    angle = None
    if fixture.published_hr_prime is not None and report.hr_prime.dim == fixture.published_hr_prime.dim:
        angle = float(np.max(principal_angles(report.hr_prime, fixture.published_hr_prime)))
        print(f"H_R' largest principal angle to the published subspace: {angle:.3e}")
    published_attractive = _published_loop_attractive(fixture, parsed, stabilizer.tol)
    if published_attractive is not None:
        print(f"published controls render the target attractive: {published_attractive}")
    for note in fixture.notes + tuple(result.notes):
        print(f"note: {note}")

    settings = stabilizer.config.simulation
    verification = monte_carlo_verify(
        result.closed_loop, parsed.target, settings.ensemble, settings.horizon, settings.eps, settings.seed
    )
    verdict = "passed" if verification.passed else "FAILED"
    print(
        f"verification over {settings.ensemble} states at T={settings.horizon:g}: "
        f"worst deficit {verification.worst_deficit:.3e} ({verdict})"
    )

    if args.out_report:
        document = _analysis_document(
            "demo",
            stabilizer,
            parsed,
            result.closed_loop,
            report,
            result,
            verification=verification_section(verification),
            published_residuals=residuals,
            free_blocks_from_published=seeded,
            hr_prime_angle=angle,
        )
        write_report(args.out_report, document)
    return _simulation_exit_code(verification.passed, verdict_exit_code(report))


_COMMANDS = {
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "demo": cmd_demo,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    :param argv: Arguments without the program name; defaults to ``sys.argv[1:]``.
    :return: Process exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(ExitCode.SUCCESS if e.code == 0 else ExitCode.INPUT_ERROR)
    try:
        return int(_COMMANDS[args.command](args))
    except StabilizerError as e:
        logger.error("%s failed: %s", args.command, e)
        return int(ExitCode.INPUT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
