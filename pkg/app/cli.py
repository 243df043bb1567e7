"""
Command-line surface.

Exit codes: 0 success, 1 usage error, 2 validation-type failure,
3 cap or node budget exceeded. Logs go to stderr; data goes to stdout or
the --out / --summary files.
"""
import functools
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
import typer
from loguru import logger

from app import config
from app.algebraic import classify, parse_coefficients
from app.ek_complex import (
    calibrate_solver,
    cover_enumerate_complex,
    ek_trace_complex,
    ekc_constants,
    phi_predictor,
)
from app.ek_real import cover_enumerate, ek_constants, ek_trace, select_basis, theta_estimate
from app.errors import DegenerateTrace, SelfSimError
from app.fourier import decay_fit, mu_hat, psi_bound
from app.ifs import validate
from app.ifs_file import load_ifs
from app.output import cover_rows, json_line, open_sink, write_csv, write_json_lines
from app.separation import (
    density_experiment,
    es_check,
    separation_sweep,
    sim_dimensions,
    split_report,
    verify_split,
)

cli = typer.Typer(
    name="selfsim",
    help="Fourier decay experiments for homogeneous self-similar measures.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

IfsPath = typer.Argument(..., help="YAML IFS definition")
AllowInvalid = typer.Option(False, "--allow-invalid", help="Load IFS files that fail validation")
Out = typer.Option("-", "--out", help="Output file, '-' for stdout")
Summary = typer.Option("-", "--summary", help="JSON-line summary file, '-' for stdout")
Workers = typer.Option(config.WORKERS, "--workers", min=1)
NodeCap = typer.Option(config.NODE_CAP, "--node-cap", min=1)


def guarded(command):
    """Turn domain errors into their exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SelfSimError as error:
            logger.error(f"{type(error).__name__}: {error}")
            raise typer.Exit(code=error.exit_code)

    return wrapper


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated numbers, got {text!r}")


def _complexes(text: str) -> list[complex]:
    """'re,im;re,im' -> [complex, ...]"""
    values = []
    for pair in filter(None, (p.strip() for p in text.split(";"))):
        parts = _floats(pair)
        if len(parts) != 2:
            raise typer.BadParameter(f"expected 're,im' pairs, got {pair!r}")
        values.append(complex(*parts))
    return values


def _paired(odd: list[complex]) -> list[complex]:
    out = []
    for z in odd:
        out += [z, z.conjugate()]
    return out


@cli.callback()
def setup(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    config.configure_logging(sys.stderr, "DEBUG" if verbose else config.LOG_LEVEL)


@cli.command("validate")
@guarded
def validate_command(ifs_file: Path = IfsPath,
                     distinct_angles: bool = typer.Option(False, "--distinct-angles")):
    """Check IFS invariants. Output: JSON-line ValidationReport; exit 2 when any fails."""
    ifs = load_ifs(ifs_file, allow_invalid=True)
    report = validate(ifs, distinct_angles=distinct_angles)
    typer.echo(json_line(report))
    if not report.ok:
        logger.error(f"failed invariants: {', '.join(report.failures)}")
        raise typer.Exit(code=2)


@cli.command("transform")
@guarded
def transform_command(ifs_file: Path = IfsPath,
                      xi: str = typer.Option(..., "--xi", help="Frequency, comma-separated"),
                      tol: float = typer.Option(1e-10, "--tol", min=0.0),
                      psi: bool = typer.Option(False, "--psi", help="Also report the Ψ bound"),
                      allow_invalid: bool = AllowInvalid):
    """Evaluate μ̂(ξ). Output: JSON-line {xi, value, tail_bound, truncation_depth[, psi]}."""
    ifs = load_ifs(ifs_file, allow_invalid)
    frequency = _floats(xi)
    result = mu_hat(ifs, frequency, tol)
    record = {"xi": frequency, **result.model_dump()}
    if psi:
        record["psi"] = psi_bound(ifs, frequency)
    typer.echo(json_line(record))


@cli.command("decay-fit")
@guarded
def decay_fit_command(ifs_file: Path = IfsPath,
                      shells: int = typer.Option(12, "--shells", min=3),
                      directions: int = typer.Option(config.DIRECTIONS_PER_SHELL, "--directions", min=1),
                      seed: int = typer.Option(..., "--seed"),
                      tol: float = typer.Option(1e-10, "--tol"),
                      k0: int = typer.Option(1, "--k0"),
                      cone_block: Optional[int] = typer.Option(None, "--cone-block"),
                      workers: int = Workers,
                      out: str = Out,
                      summary: str = Summary,
                      allow_invalid: bool = AllowInvalid):
    """
    Fit the power-decay exponent over shells.
    Output: CSV shell_radius, sup_abs, dir_0..dir_{d-1}; JSON-line {gamma, intercept, r2}.
    """
    ifs = load_ifs(ifs_file, allow_invalid)
    fit = decay_fit(ifs, shells, directions, seed, tol, k0, cone_block, workers)
    header = ["shell_radius", "sup_abs"] + [f"dir_{i}" for i in range(ifs.dim)]
    rows = [[r, s, *u] for (r, s), u in zip(fit.shells, fit.argmax_directions)]
    with open_sink(out) as sink:
        write_csv(header, rows, sink)
    with open_sink(summary) as sink:
        write_json_lines([{"gamma": fit.gamma, "intercept": fit.intercept, "r2": fit.r2}], sink)


@cli.command("ek-trace")
@guarded
def ek_trace_command(ifs_file: Path = IfsPath,
                     eta: str = typer.Option("1", "--eta"),
                     N: int = typer.Option(20, "--N", min=1),
                     out: str = Out,
                     allow_invalid: bool = AllowInvalid):
    """Nearest-integer trace. Output: CSV n, K_i, eps_i, L_i, estimate."""
    ifs = load_ifs(ifs_file, allow_invalid)
    theta, O, T_D = select_basis(ifs)
    trace = ek_trace(theta, O, T_D, _floats(eta), N)
    d = len(T_D)
    header = (["n"] + [f"K_{i}" for i in range(d)] + [f"eps_{i}" for i in range(d)]
              + [f"L_{i}" for i in range(d)] + ["estimate"])
    rows = []
    for n in range(N + 1):
        try:
            estimate = theta_estimate(trace, n) if n < N else ""
        except DegenerateTrace:
            estimate = ""
        rows.append([n, *trace.K[n].tolist(), *trace.eps[n].tolist(), *trace.L[n].tolist(), estimate])
    logger.info(f"trace condition number {trace.condition:.3g}")
    with open_sink(out) as sink:
        write_csv(header, rows, sink)


@cli.command("ek-cover")
@guarded
def ek_cover_command(ifs_file: Optional[Path] = typer.Option(None, "--ifs", help="Digits and rotation; default d=1, a1=1"),
                     B1: float = typer.Option(..., "--B1"),
                     B2: float = typer.Option(..., "--B2"),
                     N: int = typer.Option(..., "--N", min=1),
                     delta: float = typer.Option(..., "--delta", min=0.0, max=0.5),
                     rho: Optional[float] = typer.Option(None, "--rho"),
                     mode: str = typer.Option("analytic", "--mode"),
                     seed: int = typer.Option(0, "--seed"),
                     theta_step: float = typer.Option(config.SEED_THETA_STEP, "--theta-step"),
                     eta_step: float = typer.Option(config.ETA_GRID_STEP, "--eta-step"),
                     node_cap: int = NodeCap,
                     workers: int = Workers,
                     out: str = Out,
                     summary: str = Summary):
    """
    Disk cover of the exceptional set on [B1, B2].
    Output: CSV center, radius, branch_count, seq_hash; JSON-line stats.
    """
    if B1 <= 1 or B2 <= B1:
        raise typer.BadParameter("need 1 < B1 < B2")
    if ifs_file is None:
        O, T_D = np.eye(1), np.eye(1)
    else:
        _, O, T_D = select_basis(load_ifs(ifs_file))
    constants = ek_constants(O, T_D, B1, B2, mode=mode, seed=seed)
    result = cover_enumerate(O, T_D, B1, B2, N, delta, rho, node_cap, workers,
                             constants, theta_step, eta_step)
    header, rows = cover_rows(result.disks)
    with open_sink(out) as sink:
        write_csv(header, rows, sink)
    with open_sink(summary) as sink:
        write_json_lines([result.stats], sink)


@cli.command("ekc-cover")
@guarded
def ekc_cover_command(vartheta: float = typer.Option(..., "--vartheta"),
                      b1: float = typer.Option(..., "--b1"),
                      b2: float = typer.Option(..., "--b2"),
                      N: int = typer.Option(..., "--N", min=1),
                      delta: float = typer.Option(..., "--delta", min=0.0, max=0.5),
                      prefix: str = typer.Option("", "--prefix", help="Known θ_1, θ_3, ... as 're,im;...'"),
                      rho: Optional[float] = typer.Option(None, "--rho"),
                      phi_min: Optional[float] = typer.Option(None, "--phi-min"),
                      phi_max: Optional[float] = typer.Option(None, "--phi-max"),
                      angle_step: float = typer.Option(1e-3, "--angle-step"),
                      samples: int = typer.Option(config.SOLVER_SAMPLES, "--samples"),
                      seed: int = typer.Option(0, "--seed"),
                      node_cap: int = NodeCap,
                      workers: int = Workers,
                      out: str = Out,
                      summary: str = Summary):
    """
    Disk cover of the exceptional θ on the arc ϑ·𝕋⁺.
    Output: CSV center_re, center_im, radius, branch_count, seq_hash; JSON-line stats.
    """
    theta_prefix = _paired(_complexes(prefix))
    d = len(theta_prefix) + 2
    solver = calibrate_solver(vartheta, b1, d, samples, seed)
    constants = ekc_constants(vartheta, b1, b2, d, solver, theta_prefix=theta_prefix)
    phi_range = None
    if phi_min is not None or phi_max is not None:
        phi_range = (phi_min if phi_min is not None else 0.0,
                     phi_max if phi_max is not None else np.pi)
    result = cover_enumerate_complex(theta_prefix, vartheta, b1, b2, N, delta, rho, node_cap,
                                     workers, constants, solver, phi_range, angle_step)
    header, rows = cover_rows(result.disks)
    with open_sink(out) as sink:
        write_csv(header, rows, sink)
    with open_sink(summary) as sink:
        write_json_lines([result.stats], sink)


@cli.command("ekc-trace")
@guarded
def ekc_trace_command(theta: str = typer.Option(..., "--theta", help="θ_1, θ_3, ... as 're,im;...'"),
                      tau: str = typer.Option(..., "--tau", help="τ_1, τ_3, ... as 're,im;...'"),
                      N: int = typer.Option(20, "--N", min=1),
                      b1: Optional[float] = typer.Option(None, "--b1"),
                      out: str = Out):
    """Complex trace with Φ estimates. Output: CSV n, K, eps, A, B_re, B_im, phi_re, phi_im."""
    thetas = _paired(_complexes(theta))
    trace = ek_trace_complex(thetas, _paired(_complexes(tau)), N, b1)
    d = len(thetas)
    A = trace.A_table[-1].real
    vartheta = abs(thetas[-1])
    b1 = trace.theta_list[-2].imag / 2 if b1 is None else b1
    rows = []
    for n in range(N + 1):
        B = trace.B[n - 3] if 3 <= n < len(trace.B) + 3 else complex("nan")
        phi = complex("nan")
        if n + d + 2 <= N:
            try:
                phi = phi_predictor(trace.K[n:n + d + 3], thetas[:d - 2], vartheta, b1)
            except SelfSimError:
                pass
        rows.append([n, int(trace.K[n]), float(trace.eps[n]), float(A[n]) if n < len(A) else "",
                     B.real, B.imag, phi.real, phi.imag])
    with open_sink(out) as sink:
        write_csv(["n", "K", "eps", "A", "B_re", "B_im", "phi_re", "phi_im"], rows, sink)


@cli.command("es-check")
@guarded
def es_check_command(ifs_file: Path = IfsPath,
                     N: int = typer.Option(..., "--N", min=0),
                     method: str = typer.Option("auto", "--method"),
                     allow_invalid: bool = AllowInvalid):
    """Exponential-separation distance at level N. Output: JSON-line SeparationReport."""
    if method not in ("auto", "brute", "mitm"):
        raise typer.BadParameter("method must be auto, brute or mitm")
    report = es_check(load_ifs(ifs_file, allow_invalid), N, method)
    typer.echo(json_line(report))


@cli.command("es-sweep")
@guarded
def es_sweep_command(ifs_file: Path = IfsPath,
                     N_max: int = typer.Option(..., "--N-max", min=0),
                     out: str = Out,
                     allow_invalid: bool = AllowInvalid):
    """Separation for N = 0..N_max. Output: CSV N, min_distance, eps_star."""
    reports = separation_sweep(load_ifs(ifs_file, allow_invalid), N_max)
    with open_sink(out) as sink:
        write_csv(["N", "min_distance", "eps_star"],
                  [[r.N, r.min_distance, r.epsilon_star] for r in reports], sink)


@cli.command("classify-poly")
@guarded
def classify_poly_command(coeffs: str = typer.Argument(..., help="Coefficients high to low, e.g. '1,-1,-1'"),
                          tol: float = typer.Option(1e-9, "--tol")):
    """Pisot / Salem / Garsia flags. Output: JSON-line AlgebraicClass."""
    try:
        poly = parse_coefficients(coeffs)
    except ValueError as error:
        raise typer.BadParameter(str(error))
    typer.echo(json_line(classify(poly, tol)))


@cli.command("dims")
@guarded
def dims_command(ifs_file: Path = IfsPath,
                 q: float = typer.Option(2.0, "--q"),
                 allow_invalid: bool = AllowInvalid):
    """Similarity dimensions. Output: JSON-line DimensionReport."""
    typer.echo(json_line(sim_dimensions(load_ifs(ifs_file, allow_invalid), q)))


@cli.command("split")
@guarded
def split_command(ifs_file: Path = IfsPath,
                  k: int = typer.Option(2, "--k", min=2),
                  q: float = typer.Option(2.0, "--q"),
                  verify_level: Optional[int] = typer.Option(None, "--verify-N", min=0),
                  allow_invalid: bool = AllowInvalid):
    """k-skipping split μ = μ_k ∗ μ̃_k. Output: JSON-line SplitReport[, discrepancy]."""
    ifs = load_ifs(ifs_file, allow_invalid)
    record = split_report(ifs, k, q).model_dump()
    if verify_level is not None:
        record["discrepancy"] = verify_split(ifs, k, verify_level)
    typer.echo(json_line(record))


@cli.command("density")
@guarded
def density_command(ifs_file: Path = IfsPath,
                    resolution: int = typer.Option(64, "--resolution", min=2),
                    samples: int = typer.Option(100_000, "--samples", min=2),
                    seed: int = typer.Option(..., "--seed"),
                    workers: int = Workers,
                    allow_invalid: bool = AllowInvalid):
    """Heuristic voxel density trend. Output: JSON-line DensityReport."""
    ifs = load_ifs(ifs_file, allow_invalid)
    typer.echo(json_line(density_experiment(ifs, resolution, samples, seed, workers)))


def run(argv: Optional[list[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    command = typer.main.get_command(cli)
    try:
        result = command.main(args=argv, prog_name="selfsim", standalone_mode=False)
    except click.UsageError as error:
        if error.ctx is not None:
            click.echo(error.ctx.get_usage(), err=True)
        click.echo(f"Error: {error.format_message()}", err=True)
        return 1
    except click.Abort:
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
