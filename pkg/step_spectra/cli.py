"""
CLI for the step-spectra toolkit.

Provides command-line interface for:
- Sampling band functions of the step fiber operator
- Band minima, step constants and their verification flags
- The de Gennes function of the Robin half-line model
- Ground-state moments and the approximate-eigenpair coefficients
- Curvature-weighted expansion fits
- Ginzburg-Landau critical fields
- The acceptance suite

Usage:
    step-spectra band-curve --a=-0.5 --xi=-8:2:0.25
    step-spectra minimize --a=-1,-0.5
    step-spectra weighted-sweep --a=-0.5 --kappa=1 --h=4e-3,1e-3,2.5e-4
    step-spectra verify --quick
"""

import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Literal, Optional, Tuple

import click
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from step_spectra import __version__
from step_spectra.bandmin import minimize_band
from step_spectra.config import ToolkitConfig
from step_spectra.curvature import expansion_fit
from step_spectra.errors import NumericalError, ParameterError
from step_spectra.glfields import critical_fields, regime_table
from step_spectra.moments import build_approx_eigenpair, ground_state_bundle, moment_identities, moment_summary
from step_spectra.robin import de_gennes, theta0
from step_spectra.specdisc import Discretization
from step_spectra.stepband import StepParams, band_curve
from step_spectra.utils.tables import OutputFormat, ResultTable, config_hash, write_table
from step_spectra.verify import CheckStatus, run_verification

console = Console()
logger = logging.getLogger(__name__)

NOT_ATTAINED_BANNER = "infimum not attained"
RUN_KEYS = ("a", "xi", "gamma", "h", "kappa", "delta", "length", "format", "output", "workers")


def setup_logging(verbose: bool, level: str = "INFO"):
    """Configure logging based on verbosity."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _as_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (int, float)):
        return [value]
    return value


class RunConfig(BaseModel):
    """Validated parameters of one command run. All computations are deterministic."""
    model_config = ConfigDict(extra="forbid")

    command: Literal["band-curve", "minimize", "degennes", "moments", "weighted-sweep", "critical-fields"]
    a: List[float] = []
    gamma: List[float] = []
    xi_range: Optional[Tuple[float, float, float]] = None
    h_list: List[float] = []
    kappa: float = 1.0
    delta: float = 0.005
    length: Optional[float] = None
    format: OutputFormat = OutputFormat.CSV
    output: Optional[str] = None
    workers: int = 1
    seed_free: Literal[True] = True

    @field_validator("a", "gamma", "h_list", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _as_list(value)

    @field_validator("xi_range", mode="before")
    @classmethod
    def split_range(cls, value: Any) -> Any:
        if isinstance(value, str):
            parts = value.split(":")
            if len(parts) != 3:
                raise ValueError("expected LO:HI:STEP")
            return tuple(float(p) for p in parts)
        return value

    @field_validator("a")
    @classmethod
    def check_a(cls, value: List[float]) -> List[float]:
        for a in value:
            if not -1.0 <= a < 1.0 or a == 0.0:
                raise ValueError(f"a={a} outside [-1, 1) minus {{0}}")
        return value

    @field_validator("xi_range")
    @classmethod
    def check_range(cls, value: Optional[Tuple[float, float, float]]) -> Optional[Tuple[float, float, float]]:
        if value is not None:
            lo, hi, step = value
            if not step > 0 or hi < lo:
                raise ValueError("need LO <= HI and STEP > 0")
        return value

    @field_validator("h_list")
    @classmethod
    def check_h(cls, value: List[float]) -> List[float]:
        if any(not 0.0 < h <= 0.1 for h in value):
            raise ValueError("h values must lie in (0, 0.1]")
        return value

    @field_validator("delta")
    @classmethod
    def check_delta(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("delta must be positive")
        return value

    @field_validator("length")
    @classmethod
    def check_length(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("length must be positive")
        return value

    @field_validator("workers")
    @classmethod
    def check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be at least 1")
        return value

    @model_validator(mode="after")
    def check_command_inputs(self) -> "RunConfig":
        required = {
            "band-curve": ("a", "xi_range"),
            "minimize": ("a",),
            "degennes": ("gamma",),
            "moments": ("a",),
            "weighted-sweep": ("a", "h_list"),
            "critical-fields": ("a",),
        }[self.command]
        for key in required:
            if not getattr(self, key):
                raise ValueError(f"{key} is required for {self.command}")
        if self.command == "band-curve" and len(self.a) != 1:
            raise ValueError("band-curve takes a single a")
        if self.command in ("minimize", "moments", "weighted-sweep", "critical-fields"):
            if any(a > 0 for a in self.a):
                raise ValueError(f"{self.command} needs a in [-1, 0)")
        if self.command == "weighted-sweep" and (len(self.a) != 1 or not -1.0 < self.a[0] < 0.0):
            raise ValueError("weighted-sweep takes a single a in (-1, 0)")
        return self

    def xi_values(self) -> List[float]:
        lo, hi, step = self.xi_range
        count = int(round((hi - lo) / step)) + 1
        return [lo + i * step for i in range(count)]


def _build_run_config(ctx: click.Context, command: str, **flags: Any) -> RunConfig:
    """Merge the config file's run mapping, then command-line flags, and validate."""
    config: ToolkitConfig = ctx.obj["config"]
    merged: Dict[str, Any] = {
        "delta": config.delta,
        "length": config.length,
        "format": config.output_format,
        "workers": config.workers,
    }
    unknown = set(config.run) - set(RUN_KEYS)
    if unknown:
        raise ParameterError(f"unknown run keys in config: {sorted(unknown)}", key=sorted(unknown)[0])
    merged.update(config.run)
    merged.update({k: v for k, v in flags.items() if v is not None})
    renames = {"xi": "xi_range", "h": "h_list"}
    data = {renames.get(k, k): v for k, v in merged.items() if renames.get(k, k) in RunConfig.model_fields}
    return RunConfig(command=command, **data)


def _discretization(ctx: click.Context, run: RunConfig) -> Discretization:
    config: ToolkitConfig = ctx.obj["config"]
    return Discretization(
        delta=run.delta,
        margin=config.margin,
        length=run.length,
        tol=config.tol,
        max_inverse_iterations=config.max_inverse_iterations,
    )


def _metadata(ctx: click.Context, run: RunConfig, disc: Discretization, **extra: Any) -> Dict[str, Any]:
    config: ToolkitConfig = ctx.obj["config"]
    run_dict = run.model_dump(mode="json", exclude={"output"})
    metadata = {
        "toolkit_version": __version__,
        "command": run.command,
        "grid": disc.to_dict(),
        "tolerances": {"xtol": config.xtol, "fd_step": config.fd_step, "eig_tol": disc.tol},
        "search": {"scan_lo": config.scan_lo, "scan_hi": config.scan_hi, "scan_step": config.scan_step},
        "run": run_dict,
        "config_hash": config_hash(run_dict),
    }
    metadata.update(extra)
    return metadata


def _output_path(ctx: click.Context, run: RunConfig) -> Path:
    if run.output:
        return Path(run.output)
    config: ToolkitConfig = ctx.obj["config"]
    return Path(config.output_directory) / f"{run.command}.{run.format.value}"


def _flatten(record: Dict[str, Any]) -> Dict[str, Any]:
    """Inline nested check flags as check_<name> columns."""
    row = {k: v for k, v in record.items() if not isinstance(v, dict)}
    for key, value in record.items():
        if isinstance(value, dict):
            row.update({f"check_{name}": flag for name, flag in value.items()})
    return row


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Print toolkit errors and exit with 1 (validation, I/O) or 2 (numerics)."""
    try:
        yield
    except ValidationError as e:
        for err in e.errors():
            key = ".".join(str(part) for part in err["loc"]) or "run"
            console.print(f"[red]✗ Error:[/red] {key}: {err['msg']}")
        sys.exit(1)
    except ParameterError as e:
        key = f" [{e.key}]" if e.key else ""
        console.print(f"[red]✗ Error{key}:[/red] {e}")
        sys.exit(1)
    except NumericalError as e:
        console.print(f"[red]✗ Numerical failure:[/red] {e}")
        sys.exit(2)
    except OSError as e:
        console.print(f"[red]✗ Error:[/red] cannot write {e.filename or ''}: {e.strerror or e}")
        sys.exit(1)


def _emit(ctx: click.Context, run: RunConfig, table: ResultTable, title: str, columns: List[str]):
    path = write_table(table, _output_path(ctx, run), run.format)
    console.print(f"[green]✓[/green] Wrote {len(table.rows)} rows to {path}")
    _show_rows(title, table.rows, columns)


@click.group()
@click.version_option(version=__version__, prog_name="step-spectra")
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output")
@click.option("--config", "config_path", type=click.Path(), help="YAML configuration file")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, config_path: Optional[str]):
    """step-spectra - Spectral toolkit for Schrödinger operators with magnetic step fields."""
    try:
        config = ToolkitConfig(config_path)
    except (OSError, yaml.YAMLError) as e:
        console.print(f"[red]✗ Error:[/red] {e}")
        sys.exit(1)
    setup_logging(verbose, config.log_level)
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


def _common_options(func):
    func = click.option("--delta", type=float, help="Grid spacing")(func)
    func = click.option("--length", type=float, help="Override the truncation length")(func)
    func = click.option("-o", "--output", type=click.Path(), help="Output file")(func)
    func = click.option("-f", "--format", "output_format", type=click.Choice(["csv", "json"]), help="Output format")(func)
    return func


@cli.command("band-curve")
@click.option("--a", "a_value", help="Field ratio a in [-1, 1) without 0")
@click.option("--xi", "xi_range", help="Sample range LO:HI:STEP")
@click.option("-w", "--workers", type=int, help="Number of parallel workers")
@_common_options
@click.pass_context
def band_curve_cmd(ctx, a_value, xi_range, workers, delta, length, output, output_format):
    """Sample the band function μₐ(ξ)."""
    with _reported_errors():
        run = _build_run_config(ctx, "band-curve", a=a_value, xi=xi_range, workers=workers,
                                delta=delta, length=length, output=output, format=output_format)
        disc = _discretization(ctx, run)
        a = run.a[0]
        attained = a < 0
        if not attained:
            console.print(Panel(
                f"[yellow]a={a} lies in (0, 1): {NOT_ATTAINED_BANNER}.[/yellow]\n"
                f"The band decreases to a as ξ → +∞; the curve below never reaches it.",
                title="Warning",
            ))
            logger.warning(f"band-curve for a={a}: {NOT_ATTAINED_BANNER}")
        xi_values = run.xi_values()
        with console.status(f"[bold green]Sampling {len(xi_values)} band points..."):
            curve = band_curve(StepParams(a), xi_values, disc, workers=run.workers)
        if curve.failures:
            console.print(f"[yellow]Warning: {len(curve.failures)} points failed and were skipped[/yellow]")
        frame = curve.to_frame()
        table = ResultTable(
            metadata=_metadata(ctx, run, disc, a=a, attained=attained,
                               failures=[xi for xi, _ in curve.failures]),
            rows=frame.to_dict(orient="records"),
        )
        _emit(ctx, run, table, f"Band curve a={a}", ["xi", "mu", "phi0", "gamma"])


@cli.command()
@click.option("--a", "a_value", help="Field ratio(s) in [-1, 0), comma separated")
@_common_options
@click.pass_context
def minimize(ctx, a_value, delta, length, output, output_format):
    """Band minimum ζₐ, step constant βₐ and verification flags."""
    config: ToolkitConfig = ctx.obj["config"]
    with _reported_errors():
        run = _build_run_config(ctx, "minimize", a=a_value, delta=delta, length=length,
                                output=output, format=output_format)
        disc = _discretization(ctx, run)
        rows = []
        with console.status("[bold green]Minimizing band functions..."):
            theta = theta0(disc)
            for a in run.a:
                m = minimize_band(a, disc, theta0=theta, scan_lo=config.scan_lo, scan_hi=config.scan_hi,
                                  scan_step=config.scan_step, xtol=config.xtol, fd_step=config.fd_step)
                row = _flatten(m.to_dict())
                row["passed"] = m.passed
                rows.append(row)
        table = ResultTable(metadata=_metadata(ctx, run, disc, theta0=theta), rows=rows)
        _emit(ctx, run, table, "Band minima", ["a", "zeta", "beta", "gamma_min", "passed"])


@cli.command()
@click.option("--gamma", "gamma_value", help="Robin parameter(s), comma separated")
@_common_options
@click.pass_context
def degennes(ctx, gamma_value, delta, length, output, output_format):
    """de Gennes function Θ(γ) and its minimizer ξ(γ)."""
    config: ToolkitConfig = ctx.obj["config"]
    with _reported_errors():
        run = _build_run_config(ctx, "degennes", gamma=gamma_value, delta=delta, length=length,
                                output=output, format=output_format)
        disc = _discretization(ctx, run)
        with console.status("[bold green]Minimizing Robin eigenvalues..."):
            rows = [de_gennes(g, disc, xtol=config.xtol, fd_step=config.fd_step).to_dict() for g in run.gamma]
        table = ResultTable(metadata=_metadata(ctx, run, disc), rows=rows)
        _emit(ctx, run, table, "de Gennes function", ["gamma", "theta", "xi_min", "identity_residual"])


@cli.command()
@click.option("--a", "a_value", help="Field ratio(s) in [-1, 0), comma separated")
@click.option("--kappa", type=float, help="Curvature for the approximate-eigenpair coefficients")
@_common_options
@click.pass_context
def moments(ctx, a_value, kappa, delta, length, output, output_format):
    """Moments M₁..M₃ with closed forms and the eigenpair coefficients c₂, c₃."""
    with _reported_errors():
        run = _build_run_config(ctx, "moments", a=a_value, kappa=kappa, delta=delta, length=length,
                                output=output, format=output_format)
        disc = _discretization(ctx, run)
        rows = []
        with console.status("[bold green]Computing moments..."):
            theta = theta0(disc)
            for a in run.a:
                bundle = ground_state_bundle(a, disc, minimize_band(a, disc, theta0=theta))
                summary = moment_summary(bundle)
                identities = moment_identities(bundle)
                pair = build_approx_eigenpair(bundle, run.kappa, m3=summary["m3"])
                rows.append({
                    "a": a,
                    "zeta": bundle.zeta,
                    "beta": bundle.beta,
                    **summary,
                    "m1_trace": identities.m1_trace,
                    "m3_trace": identities.m3_trace,
                    "c2": pair.c2,
                    "c3": pair.c3,
                    "half_mu2": 0.5 * bundle.mu2,
                })
        table = ResultTable(metadata=_metadata(ctx, run, disc), rows=rows)
        _emit(ctx, run, table, "Moments", ["a", "m1", "m2", "m3", "c2"])


@cli.command("weighted-sweep")
@click.option("--a", "a_value", help="Field ratio in (-1, 0)")
@click.option("--kappa", type=float, help="Edge curvature")
@click.option("--h", "h_values", help="Semiclassical parameters, comma separated, decreasing")
@_common_options
@click.pass_context
def weighted_sweep(ctx, a_value, kappa, h_values, delta, length, output, output_format):
    """Fit β_{a,𝔨,h} - βₐ against h^{1/2} and compare the slope with 𝔨·M₃."""
    config: ToolkitConfig = ctx.obj["config"]
    with _reported_errors():
        run = _build_run_config(ctx, "weighted-sweep", a=a_value, kappa=kappa, h=h_values,
                                delta=delta, length=length, output=output, format=output_format)
        disc = _discretization(ctx, run)
        with console.status("[bold green]Solving weighted models..."):
            fit = expansion_fit(run.a[0], run.kappa, run.h_list, disc, config.delta_exp, config.length_cap,
                                curvature_cap=config.curvature_cap)
        summary = {k: v for k, v in fit.to_dict().items() if not isinstance(v, list)}
        table = ResultTable(
            metadata=_metadata(ctx, run, disc, delta_exp=config.delta_exp, length_cap=config.length_cap, fit=summary),
            rows=fit.rows(),
        )
        _emit(ctx, run, table, "Weighted expansion", ["h", "difference", "remainder"])
        _show_fit_summary(fit)


@cli.command("critical-fields")
@click.option("--a", "a_value", help="Field ratio(s) in [-1, 0), comma separated")
@_common_options
@click.pass_context
def critical_fields_cmd(ctx, a_value, delta, length, output, output_format):
    """Critical ratios bc1 ≤ bc2 ≤ bc3."""
    with _reported_errors():
        run = _build_run_config(ctx, "critical-fields", a=a_value, delta=delta, length=length,
                                output=output, format=output_format)
        disc = _discretization(ctx, run)
        rows = []
        fields_list = []
        with console.status("[bold green]Computing critical fields..."):
            theta = theta0(disc)
            for a in run.a:
                beta = minimize_band(a, disc, theta0=theta).beta
                fields = critical_fields(a, theta, beta)
                fields_list.append(fields)
                rows.append(fields.to_dict())
        table = ResultTable(metadata=_metadata(ctx, run, disc, theta0=theta), rows=rows)
        _emit(ctx, run, table, "Critical fields", ["a", "bc1", "bc2", "bc3"])
        for fields in fields_list:
            regimes = regime_table(fields).to_dict(orient="records")
            _show_rows(f"Regimes for a = {fields.a:g}", regimes, ["b", "regime"])


@cli.command()
@click.option("--quick", is_flag=True, help="Skip the curvature and residual studies")
@click.option("--delta", type=float, help="Grid spacing")
@click.option("-o", "--output", type=click.Path(), help="Report file (.md or .json)")
@click.pass_context
def verify(ctx, quick: bool, delta: Optional[float], output: Optional[str]):
    """Run the acceptance suite."""
    config: ToolkitConfig = ctx.obj["config"]
    with _reported_errors():
        disc = config.discretization()
        if delta is not None:
            disc = Discretization(delta=delta, margin=disc.margin, length=disc.length, tol=disc.tol,
                                  max_inverse_iterations=disc.max_inverse_iterations)
        with console.status("[bold green]Running acceptance criteria...") as status:
            report = run_verification(
                config, quick=quick, disc=disc,
                progress=lambda name: status.update(f"[bold green]{name}..."),
            )
        if output:
            path = Path(output)
            path.parent.mkdir(parents=True, exist_ok=True)
            if path.suffix.lower() == ".json":
                path.write_text(json.dumps(report.to_dict(), indent=2, default=str) + "\n")
            else:
                path.write_text(report.to_markdown())
            console.print(f"[green]✓[/green] Report saved to {path}")
    _show_verification(report)
    if not report.passed:
        sys.exit(2)


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _show_rows(title: str, rows: List[Dict[str, Any]], columns: List[str]):
    """Display the leading columns of a result table."""
    table = Table(title=title)
    for column in columns:
        table.add_column(column, style="cyan" if column == columns[0] else None, justify="right")
    shown = rows if len(rows) <= 20 else rows[:10] + rows[-10:]
    for row in shown:
        table.add_row(*(_format_cell(row.get(c)) for c in columns))
    console.print(table)
    if len(rows) > len(shown):
        console.print(f"[dim]... {len(rows) - len(shown)} rows omitted[/dim]")


def _show_fit_summary(fit):
    """Display expansion fit summary."""
    checks = "\n".join(
        f"{'[green]✓[/green]' if ok else '[red]✗[/red]'} {name}" for name, ok in fit.checks.items()
    )
    console.print(Panel(
        f"[bold]Slope:[/bold] {fit.slope:.6g}\n"
        f"[bold]κ·M₃:[/bold] {fit.expected_slope:.6g}\n"
        f"[cyan]Relative error:[/cyan] {fit.relative_error:.2%}\n"
        f"{checks}",
        title="Expansion Fit",
    ))


def _show_verification(report):
    """Display acceptance results."""
    styles = {
        CheckStatus.PASS: "[green]PASS[/green]",
        CheckStatus.FAIL: "[red]FAIL[/red]",
        CheckStatus.ERROR: "[red]ERROR[/red]",
        CheckStatus.SKIPPED: "[yellow]SKIPPED[/yellow]",
    }
    table = Table(title="Acceptance Criteria")
    table.add_column("#", justify="right")
    table.add_column("Criterion", style="cyan")
    table.add_column("Status")
    table.add_column("Detail")
    for r in report.results:
        table.add_row(str(r.number), r.name, styles[r.status], r.detail)
    console.print(table)


def main():
    """Entry point for CLI."""
    cli()


if __name__ == "__main__":
    main()
