"""
Command-line front end: problem ingestion, solver dispatch and report output
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from nsflow.core.exceptions import InvalidArgumentError, ProblemValidationError
from nsflow.core.expressions import CompiledExpression
from nsflow.core.logging import setup_logging
from nsflow.models.coefficient import Coefficient, EssentialHull
from nsflow.models.family import EpsFamily, MollifiedField
from nsflow.models.measure import MeasureState, ProductKind, TestFunctionBank
from nsflow.schemas.problem import MollifierSpec, ProblemFile
from nsflow.schemas.reports import CheckSummary
from nsflow.services.caratheodory_solver import CaratheodorySolver
from nsflow.services.condition_checker import ConditionChecker
from nsflow.services.energy_service import EnergySolver, garding_probe, garding_probe_log
from nsflow.services.filippov_solver import FilippovSolver
from nsflow.services.flow_service import build_flow
from nsflow.services.microlocal_service import wavefront_estimate
from nsflow.services.regularized_solver import RegularizedSolver
from nsflow.services.transport_service import MeasureTransport, weak_residual
from nsflow.utils.csvio import write_trajectory_csv
from nsflow.utils.jsonio import read_json, write_json

app = typer.Typer(help="Nonsmooth flows, measure transport and microlocal diagnostics", no_args_is_help=True)
console = Console()


class Method(str, Enum):
    FILIPPOV = "filippov"
    CARATHEODORY = "caratheodory"
    REGULARIZED = "regularized"


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


# Parsing helpers


def load_problem(path: Path) -> ProblemFile:
    """
    Read and validate a problem document

    Raises:
        ProblemValidationError: The file is missing or not valid JSON
        pydantic.ValidationError: The document does not match the schema
    """
    if not path.exists():
        raise ProblemValidationError("problem file not found", path=str(path))
    try:
        payload = read_json(path)
    except ValueError as e:
        raise ProblemValidationError(f"problem file is not valid JSON: {e}", path=str(path)) from e
    return ProblemFile.model_validate(payload)


def parse_window(text: Optional[str]) -> Optional[Tuple[float, float]]:
    """'a:b' -> (a, b)"""
    if text is None:
        return None
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise InvalidArgumentError("window must look like a:b", window=text) from e
    if not hi > lo:
        raise InvalidArgumentError("window end must follow its start", window=text)
    return lo, hi


def parse_point(text: str) -> List[float]:
    """'0.5' or '0.5,1' -> list of coordinates"""
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as e:
        raise InvalidArgumentError("point must be comma-separated numbers", point=text) from e


def parse_starts(text: str) -> np.ndarray:
    """'a:b:n' grid or ';'-separated points"""
    parts = text.split(":")
    if len(parts) == 3:
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as e:
            raise InvalidArgumentError("starts must look like a:b:n", starts=text) from e
        return np.linspace(lo, hi, count)[:, None]
    return np.array([parse_point(p) for p in text.split(";")])


def parse_grid(text: str) -> Tuple[int, int]:
    """'NXxNT' -> (nodes, steps)"""
    try:
        nx, nt = (int(v) for v in text.lower().split("x"))
    except ValueError as e:
        raise InvalidArgumentError("grid must look like 1024x1024", grid=text) from e
    return nx, nt


def parse_exponents(text: str) -> List[float]:
    """'a:b' -> eps = 2^-i for i = a..b"""
    try:
        first, last = (int(v) for v in text.split(":"))
    except ValueError as e:
        raise InvalidArgumentError("eps exponents must look like a:b", eps_exponents=text) from e
    if last < first or first < 0:
        raise InvalidArgumentError("eps exponents must be increasing and non-negative", eps_exponents=text)
    return [2.0**-i for i in range(first, last + 1)]


def initial_measure(spec: str, problem: ProblemFile, coefficient: Coefficient) -> MeasureState:
    """'lebesgue', 'dirac:p' or 'problem'"""
    if spec == "lebesgue":
        lo, hi = coefficient.x_box[0]
        return MeasureState.lebesgue(float(lo), float(hi))
    if spec.startswith("dirac"):
        position = float(spec.split(":", 1)[1]) if ":" in spec else 0.0
        return MeasureState.dirac(position)
    if spec == "problem":
        if problem.initial is None or isinstance(problem.initial, list):
            raise InvalidArgumentError("the problem file declares no initial measure")
        return MeasureState.from_spec(problem.initial)
    raise InvalidArgumentError("unknown initial measure", u0=spec)


def _scalar_coefficient(problem: ProblemFile) -> Coefficient:
    coefficient = Coefficient.from_spec(problem.coefficient)
    if coefficient.dim != 1:
        raise InvalidArgumentError("this command needs a scalar coefficient", dim=coefficient.dim)
    return coefficient


def _emit(path: Path, payload) -> None:
    write_json(path, payload)
    console.print(f"wrote {path}")


# Commands


@app.callback()
def main_options(
    log_level: Optional[str] = typer.Option(None, help="Log level (overrides NSFLOW_LOG_LEVEL)"),
    log_format: Optional[str] = typer.Option(None, help="text or json"),
):
    """nsflow command line"""
    setup_logging(log_level, log_format)


@app.command()
def solve(
    problem: Path = typer.Option(..., help="Problem JSON file"),
    method: Optional[Method] = typer.Option(None, help="Solver (defaults to the problem options)"),
    x0: Optional[str] = typer.Option(None, help="Initial state, comma separated"),
    t0: Optional[float] = typer.Option(None, help="Initial time"),
    window: Optional[str] = typer.Option(None, help="Time window a:b"),
    out: Path = typer.Option(Path("traj.csv"), help="Trajectory CSV"),
):
    """Solve one initial value problem and write the trajectory table"""
    spec = load_problem(problem)
    coefficient = Coefficient.from_spec(spec.coefficient)
    chosen = method.value if method else spec.options.method
    start = spec.t0 if t0 is None else t0
    if x0 is not None:
        state = np.asarray(parse_point(x0))
    elif isinstance(spec.initial, list):
        state = np.asarray(spec.initial, dtype=float)
    else:
        raise InvalidArgumentError("no initial state: pass --x0 or declare a point in the problem")
    span = parse_window(window) or spec.window or (start, coefficient.t_range[1])

    if chosen == "filippov":
        solver = FilippovSolver(EssentialHull(coefficient))
        trajectory = solver.solve(start, state, span, override=spec.options.override)
    elif chosen == "caratheodory":
        solver = CaratheodorySolver(coefficient, k0=spec.options.k0)
        trajectory = solver.solve(start, state, span, override=spec.options.override)
    else:
        _, shadow = RegularizedSolver(coefficient, spec.mollifier or MollifierSpec()).solve(start, state, span)
        trajectory = shadow.limit
        _emit(out.with_suffix(".json"), shadow.model_dump(mode="json", exclude={"limit"}))
    write_trajectory_csv(out, trajectory, spec.options.samples)
    console.print(f"wrote {out} ({chosen}, {len(trajectory.events)} events)")


@app.command()
def flow(
    problem: Path = typer.Option(..., help="Problem JSON file"),
    direction: Direction = typer.Option(Direction.FORWARD, help="forward or backward"),
    anchor: float = typer.Option(0.0, help="Anchor time t"),
    horizon: Optional[float] = typer.Option(None, help="Final time (defaults to the domain end)"),
    starts: str = typer.Option("-2:2:9", help="Start grid a:b:n or points p1;p2"),
    samples: int = typer.Option(11, help="Output times per trajectory"),
    override: bool = typer.Option(False, help="Build even when the one-sided Lipschitz check fails"),
    out: Path = typer.Option(Path("flow.json"), help="Flow JSON"),
):
    """Flow map values on a start grid with its uniqueness and semigroup reports"""
    spec = load_problem(problem)
    coefficient = Coefficient.from_spec(spec.coefficient)
    grid = parse_starts(starts)
    flow_map = build_flow(coefficient, direction.value, anchor, horizon, starts=grid, override=override)
    times = np.linspace(flow_map.anchor, flow_map.horizon, samples)
    values = [[flow_map.eval(float(s), x).tolist() for x in grid] for s in times]
    _emit(
        out,
        {
            "direction": direction.value,
            "anchor": flow_map.anchor,
            "horizon": flow_map.horizon,
            "starts": grid.tolist(),
            "times": times.tolist(),
            "values": values,
            "reports": {k: v.model_dump(mode="json") for k, v in flow_map.reports.items()},
        },
    )


@app.command()
def pushforward(
    problem: Path = typer.Option(..., help="Problem JSON file"),
    u0: str = typer.Option("lebesgue", help="lebesgue, dirac:p or problem"),
    t: float = typer.Option(..., help="Target time"),
    out: Path = typer.Option(Path("measure.json"), help="MeasureState JSON"),
):
    """Image measure of u0 under the forward flow"""
    spec = load_problem(problem)
    coefficient = _scalar_coefficient(spec)
    initial = initial_measure(u0, spec, coefficient)
    flow_map = build_flow(coefficient, "forward", spec.t0, t, semigroup=False)
    state = MeasureTransport(coefficient, flow_map).pushforward(initial, t)
    _emit(out, state.to_spec())
    for position, mass in state.atoms:
        console.print(f"atom at {position:.6g}: mass {mass:.6g}")


@app.command()
def residual(
    problem: Path = typer.Option(..., help="Problem JSON file"),
    product: ProductKind = typer.Option(ProductKind.POUPAUD_RASCLE, help="Product defining a o u"),
    u0: str = typer.Option("lebesgue", help="lebesgue, dirac:p or problem"),
    bank_size: int = typer.Option(10, help="Number of test functions"),
    out: Path = typer.Option(Path("residual.json"), help="Residual JSON"),
):
    """Weak residual of the transport equation along the flow solution"""
    spec = load_problem(problem)
    coefficient = _scalar_coefficient(spec)
    initial = initial_measure(u0, spec, coefficient)
    t_lo, t_hi = spec.window or (spec.t0, coefficient.t_range[1])
    bank = TestFunctionBank.default((t_lo, t_hi), tuple(coefficient.x_box[0]), bank_size)
    flow_map = build_flow(coefficient, "forward", t_lo, t_hi, semigroup=False)
    transport = MeasureTransport(coefficient, flow_map)
    report = weak_residual(transport.path(initial), coefficient, product, bank, flow=flow_map, u0=initial)
    _emit(out, report)
    console.print(f"max residual {report.max_residual:.3e} ({product.value})")


@app.command()
def energy(
    problem: Optional[Path] = typer.Option(None, help="Problem JSON file with a, reaction c and source f"),
    u0: str = typer.Option("exp(-20*x^2)", help="Initial data formula in x"),
    grid: str = typer.Option("1024x1024", help="Nodes x steps"),
    window: str = typer.Option("0:1", help="Time window a:b"),
    garding: Optional[float] = typer.Option(None, help="Run the Garding probe at this exponent instead"),
    garding_log: bool = typer.Option(False, help="Run the log-scale Garding probe instead"),
    out: Path = typer.Option(Path("energy.json"), help="Report JSON"),
):
    """Upwind solve with the energy-estimate check, or the Garding probe"""
    if garding is not None:
        _emit(out, garding_probe(garding))
        return
    if garding_log:
        _emit(out, garding_probe_log())
        return
    if problem is None:
        raise InvalidArgumentError("pass --problem or one of --garding / --garding-log")
    spec = load_problem(problem)
    a = _scalar_coefficient(spec)
    c = Coefficient.from_spec(spec.reaction) if spec.reaction else None
    f = Coefficient.from_spec(spec.source) if spec.source else None
    initial = CompiledExpression.from_text(u0, 1, with_time=False)
    solver = EnergySolver(a, c, f)
    sol = solver.solve(initial, parse_window(window), parse_grid(grid))
    report = solver.check(sol)
    _emit(out, {"solution": sol.summary(), "report": report.model_dump(mode="json")})
    console.print(f"energy estimate: {report.verdict} (worst LHS/RHS {report.worst_ratio:.3f})")


@app.command()
def wf(
    formula: Optional[str] = typer.Option(None, help="Family formula over x, y and eps"),
    dim: int = typer.Option(2, help="Dimension of the family"),
    eps_exponents: str = typer.Option("7:9", help="eps = 2^-i for i in a:b"),
    problem: Optional[Path] = typer.Option(None, help="Use the mollified scalar coefficient of a problem instead"),
    t: float = typer.Option(0.0, help="Time slice for --problem"),
    bases: Optional[str] = typer.Option(None, help="Base points p1;p2 (default: a 3^n grid)"),
    threshold: Optional[float] = typer.Option(None, help="Decay slope threshold"),
    out: Path = typer.Option(Path("wf.json"), help="WavefrontEstimate JSON"),
):
    """Wavefront estimate of an eps-family"""
    eps_grid = parse_exponents(eps_exponents)
    if problem is not None:
        spec = load_problem(problem)
        coefficient = _scalar_coefficient(spec)
        field = MollifiedField(coefficient, spec.mollifier or MollifierSpec(eps=eps_grid))
        family = EpsFamily.mollified(field, t, eps_grid)
    elif formula is not None:
        family = EpsFamily.from_expressions(formula, dim_in=dim, eps_grid=eps_grid)
    else:
        raise InvalidArgumentError("pass --formula or --problem")
    points = None if bases is None else parse_starts(bases)
    estimate = wavefront_estimate(family, bases=points, decay_threshold=threshold)
    _emit(out, estimate)
    for point in estimate.points:
        if point.irregular:
            console.print(f"{point.base}: {len(point.irregular)} irregular directions")


@app.command()
def check(
    problem: Path = typer.Option(..., help="Problem JSON file"),
    out: Path = typer.Option(Path("check.json"), help="Report JSON"),
):
    """Condition and theory applicability reports"""
    spec = load_problem(problem)
    coefficient = Coefficient.from_spec(spec.coefficient)
    reaction = Coefficient.from_spec(spec.reaction) if spec.reaction else None
    checker = ConditionChecker(coefficient, spec.sampling)
    reports = [
        checker.check_caratheodory(),
        checker.check_filippov(),
        checker.check_one_sided_lipschitz("forward"),
        checker.check_one_sided_lipschitz("backward"),
    ]
    if coefficient.dim == 1:
        reports.extend(checker.classify_theories(reaction))
    summary = CheckSummary(problem=spec.name, reports=reports)
    _emit(out, summary)

    table = Table(title=f"Conditions for {spec.name}")
    table.add_column("Theory", style="cyan")
    table.add_column("Verdict", style="green")
    table.add_column("Witnesses", style="yellow")
    for report in reports:
        table.add_row(report.theory, report.verdict, str(len(report.witnesses)))
    console.print(table)
