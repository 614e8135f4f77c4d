"""geokit command line.

Machine output (bodies, values, reports) goes to stdout, and the last stdout
line of every command is a one-line JSON summary. Logs and tables go to
stderr.

Exit codes: 0 success, 1 degenerate input, 2 invalid input or unknown rule,
3 violations found by `verify`.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from geokit import CENTROID_TOL, DB_PATH, DEFAULT_RESOLUTION
from geokit.bodies import (
    FourierSeries,
    SmoothBody,
    body_from_spec,
    centroid,
    fourier_support_body,
    make_ball,
    make_ellipsoid,
    radial_function,
    random_smooth_body,
    spec_from_body,
)
from geokit.config import DEFAULT_CONFIG, load_run_config
from geokit.errors import ArityError, DegenerateBodyError, GeokitError, UnsupportedError
from geokit.functionals import (
    asp_i,
    body_volume,
    classical_mixed_volume_2d,
    classical_mixed_volume_nd,
    dual_mixed_volume,
    mixed_p_affine,
    p_curvature_image,
    p_mixed_volume,
    p_mixed_volume_multi,
    p_surface_area,
    polar_volume,
    volume_radial,
)
from geokit.geominimal import (
    GeoEstimate,
    closed_form_G,
    estimate_asp1,
    estimate_G,
    estimate_G_i,
    estimate_G_tilde,
    vpn_test,
)
from geokit.harness.catalogue import CATALOGUE, rule_group
from geokit.harness.suite import fuzz_suite
from geokit.models import BodySpec, FunctionalValue, SearchConfig, SuiteReport
from geokit.report import generate_report
from geokit.sphere import grid_for
from geokit.store import get_connection, insert_suite

logger = logging.getLogger(__name__)

console = Console(stderr=True)

VERDICT_COLUMNS = [
    "case_index", "rule_id", "part", "p", "i", "alpha",
    "lhs", "lhs_kind", "lhs_err", "rhs", "rhs_kind", "rhs_err",
    "slack", "verdict", "verifiability", "error",
]
VALUE_COLUMNS = ["functional", "value", "kind", "err", "p", "i", "resolution"]


def _summary(**fields: Any) -> None:
    click.echo(json.dumps(fields, sort_keys=True, default=str))


def _fail(command: str, code: int, exc: Exception) -> None:
    logger.error("%s: %s", command, exc)
    _summary(command=command, status="error", error=f"{type(exc).__name__}: {exc}")
    raise SystemExit(code)


def handled(command: str) -> Callable:
    """Map library exceptions to the exit-code contract."""
    def decorate(fn: Callable) -> Callable:
        @functools.wraps(fn)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return fn(*args, **kwargs)
            except DegenerateBodyError as e:
                _fail(command, 1, e)
            except (GeokitError, ValidationError, OSError, ValueError) as e:
                _fail(command, 2, e)
        return wrapper
    return decorate


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        logger.info("Wrote %s", out)
    else:
        click.echo(text.rstrip("\n"))


def _csv(columns: Sequence[str], rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def _floats(ctx: click.Context, param: click.Parameter, value: str | None) -> list[float] | None:
    if value is None:
        return None
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers: {e}") from None


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def cli(verbose: bool) -> None:
    """Numerical L_p Brunn-Minkowski functionals and geominimal surface areas."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


main = cli


# --- body ------------------------------------------------------------------------


@cli.group()
def body() -> None:
    """Construct and inspect body JSON records."""


_COEFF = re.compile(r"^\s*([ab])(\d+)\s*=\s*(\S+)\s*$")


def _parse_coeffs(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """'a2=0.1,b3=-0.05' to cos/sin coefficient tuples (index k-1 holds degree k)."""
    found: dict[tuple[str, int], float] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        m = _COEFF.match(item)
        if m is None or int(m.group(2)) < 1:
            raise click.BadParameter(f"bad coefficient {item!r}; expected aK=x or bK=x, K ≥ 1")
        found[(m.group(1), int(m.group(2)))] = float(m.group(3))
    k_max = max((k for _, k in found), default=0)
    a = tuple(found.get(("a", k), 0.0) for k in range(1, k_max + 1))
    b = tuple(found.get(("b", k), 0.0) for k in range(1, k_max + 1))
    return a, b


@body.command("make")
@click.argument("kind", type=click.Choice(["ball", "ellipsoid", "fourier", "random"]))
@click.option("--dim", default=2, show_default=True, help="Ambient dimension")
@click.option("--r", "radius", default=1.0, show_default=True, help="Ball radius")
@click.option("--A", "matrix", default=None, callback=_floats,
              help="Ellipsoid matrix, row-major comma list (h(u) = |A^T u|)")
@click.option("--c0", default=1.0, show_default=True, help="Fourier constant term")
@click.option("--coeffs", default="", help="Fourier terms, e.g. 'a2=0.1,b3=-0.05'")
@click.option("--seed", default=0, show_default=True, help="Seed for random bodies")
@click.option("--k-max", default=6, show_default=True, help="Highest random Fourier degree")
@click.option("--resolution", default=DEFAULT_RESOLUTION, show_default=True)
@click.option("--out", default=None, help="Write the body JSON here instead of stdout")
@handled("body make")
def body_make(
    kind: str,
    dim: int,
    radius: float,
    matrix: list[float] | None,
    c0: float,
    coeffs: str,
    seed: int,
    k_max: int,
    resolution: int,
    out: str | None,
) -> None:
    """Build a ball, ellipsoid, Fourier-support or random planar body."""
    grid = grid_for(dim, resolution, seed)
    if kind == "ball":
        made = make_ball(grid, radius)
    elif kind == "ellipsoid":
        if matrix is None:
            raise ArityError("ellipsoid needs --A")
        made = make_ellipsoid(grid, np.reshape(matrix, (dim, dim)))
    elif kind == "fourier":
        a, b = _parse_coeffs(coeffs)
        made = fourier_support_body(grid, FourierSeries(c0, a, b))
    else:
        made = random_smooth_body(grid, seed, k_max=k_max)
    spec = spec_from_body(made)
    _write(spec.model_dump_json() + "\n", out)
    _summary(command="body make", status="ok", kind=spec.kind, dim=spec.dim, out=out)


def _read_spec(path: str) -> BodySpec:
    return BodySpec.model_validate_json(Path(path).read_text())


def _load_bodies(paths: Sequence[str], resolution: int, seed: int) -> list:
    specs = [_read_spec(p) for p in paths]
    dims = {s.dim for s in specs}
    if len(dims) != 1:
        raise ArityError(f"bodies of mixed dimension {sorted(dims)}")
    grid = grid_for(specs[0].dim, resolution, seed)
    return [body_from_spec(s, grid) for s in specs]


@body.command("show")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p", default=1.0, show_default=True, help="Exponent for the V_p test")
@click.option("--resolution", default=DEFAULT_RESOLUTION, show_default=True)
@click.option("--seed", default=0, show_default=True)
@handled("body show")
def body_show(path: str, p: float, resolution: int, seed: int) -> None:
    """Summarise a body: samples, volume, centering and V_p membership."""
    (shown,) = _load_bodies([path], resolution, seed)
    spec = _read_spec(path)
    support = shown.support if isinstance(shown, SmoothBody) else shown
    rho = radial_function(support).rho
    info: dict[str, Any] = {
        "kind": spec.kind,
        "dim": spec.dim,
        "h_min": float(support.h.min()),
        "h_max": float(support.h.max()),
        "rho_min": float(rho.min()),
        "rho_max": float(rho.max()),
        "polar_volume": polar_volume(support).value,
        "smooth": isinstance(shown, SmoothBody),
    }
    if isinstance(shown, SmoothBody):
        c = centroid(shown)
        info.update({
            "f_min": float(shown.f.min()),
            "f_max": float(shown.f.max()),
            "volume": body_volume(shown).value,
            "centroid_norm": float(np.linalg.norm(c)),
            "centered": bool(np.linalg.norm(c) < CENTROID_TOL),
            "vpn": p != 0 and vpn_test([shown] * shown.dim, p) is not None,
        })

    table = Table(title=path)
    table.add_column("Property")
    table.add_column("Value", justify="right")
    for key, value in info.items():
        table.add_row(key, f"{value:.10g}" if isinstance(value, float) else str(value))
    console.print(table)
    _summary(command="body show", status="ok", **info)


# --- compute ---------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    arity: Callable[[int], int]
    run: Callable[..., FunctionalValue | GeoEstimate]
    needs_p: bool = True
    smooth: bool = True


def _n(n: int) -> int:
    return n


def _mixed_volume(bodies):
    if bodies[0].dim == 2:
        return classical_mixed_volume_2d(*bodies)
    return classical_mixed_volume_nd(bodies)


def _closed_form(bodies, p, alpha, **_):
    value = closed_form_G(alpha, bodies, p)
    if value is None:
        raise UnsupportedError(f"no closed form for alpha={alpha} at p={p} on these inputs")
    return value


def _curvature_image(bodies, p, **_):
    image = p_curvature_image(bodies[0], p)
    fv = volume_radial(image)
    return fv.model_copy(update={"meta": {**fv.meta, "functional": "p_curvature_image",
                                          "rho_min": float(image.rho.min()),
                                          "rho_max": float(image.rho.max())}})


FUNCTIONALS: dict[str, Functional] = {
    "volume": Functional(lambda n: 1, lambda b, **_: body_volume(b[0]), needs_p=False),
    "polar_volume": Functional(lambda n: 1, lambda b, **_: polar_volume(b[0]), needs_p=False,
                               smooth=False),
    "mixed_volume": Functional(_n, lambda b, **_: _mixed_volume(b), needs_p=False),
    "dual_mixed_volume": Functional(
        _n, lambda b, **_: dual_mixed_volume([radial_function(k.support) for k in b]),
        needs_p=False),
    "p_surface_area": Functional(lambda n: 1, lambda b, p, **_: p_surface_area(b[0], p)),
    "p_mixed_volume": Functional(lambda n: 2, lambda b, p, **_: p_mixed_volume(b[0], b[1], p)),
    "p_mixed_volume_multi": Functional(
        lambda n: 2 * n,
        lambda b, p, **_: p_mixed_volume_multi(b[: len(b) // 2], b[len(b) // 2:], p)),
    "mixed_p_affine": Functional(_n, lambda b, p, **_: mixed_p_affine(b, p)),
    "asp_i": Functional(lambda n: 2, lambda b, p, i, **_: asp_i(b[0], b[1], p, i)),
    "p_curvature_image": Functional(lambda n: 1, _curvature_image),
    "closed_form_G": Functional(_n, _closed_form),
    "estimate_G": Functional(
        _n, lambda b, p, alpha, cfg, **_: estimate_G(alpha, b, p, cfg)),
    "estimate_G_tilde": Functional(
        lambda n: 1, lambda b, p, cfg, **_: estimate_G_tilde(b[0], p, cfg)),
    "estimate_G_i": Functional(
        lambda n: 2, lambda b, p, i, alpha, cfg, **_: estimate_G_i(alpha, b[0], b[1], p, i, cfg)),
    "estimate_asp1": Functional(
        _n, lambda b, p, cfg, **_: estimate_asp1(b, p, cfg.model_copy(update={"family": None}))),
}


@cli.command()
@click.argument("functional", type=click.Choice(sorted(FUNCTIONALS)))
@click.argument("bodies", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p", default=None, type=float, help="Exponent p (≠ -n)")
@click.option("--i", "i", default=None, type=float, help="Index i of the i-th functionals")
@click.option("--alpha", default=1, show_default=True, type=click.IntRange(1, 3))
@click.option("--family", default=None,
              type=click.Choice(["ellipsoid", "fourier-support", "radial-grid"]))
@click.option("--starts", default=None, type=int, help="Multi-start count")
@click.option("--max-iters", default=None, type=int, help="Iteration budget per start")
@click.option("--resolution", default=DEFAULT_RESOLUTION, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]),
              help="csv columns: " + ",".join(VALUE_COLUMNS))
@click.option("--out", default=None, help="Write the value here instead of stdout")
@click.option("--trace", is_flag=True, help="Include the estimator's per-start trace")
@handled("compute")
def compute(
    functional: str,
    bodies: tuple[str, ...],
    p: float | None,
    i: float | None,
    alpha: int,
    family: str | None,
    starts: int | None,
    max_iters: int | None,
    resolution: int,
    seed: int,
    fmt: str,
    out: str | None,
    trace: bool,
) -> None:
    """Evaluate a functional or estimator on body JSON files."""
    spec = FUNCTIONALS[functional]
    loaded = _load_bodies(bodies, resolution, seed)
    n = loaded[0].dim
    if len(loaded) != spec.arity(n):
        raise ArityError(f"{functional} takes {spec.arity(n)} bodies in dimension {n}, "
                         f"got {len(loaded)}")
    if spec.smooth and not all(isinstance(b, SmoothBody) for b in loaded):
        raise ArityError(f"{functional} needs bodies with curvature samples")
    if spec.needs_p and p is None:
        raise ArityError(f"{functional} needs --p")
    if functional in ("asp_i", "estimate_G_i") and i is None:
        raise ArityError(f"{functional} needs --i")

    search = {"seed": seed, "family": family, "starts": starts, "max_iters": max_iters}
    cfg = SearchConfig(**{k: v for k, v in search.items() if v is not None})
    result = spec.run(loaded, p=p, i=i, alpha=alpha, cfg=cfg)
    estimate = result if isinstance(result, GeoEstimate) else None
    value = estimate.value if estimate else result

    record = value.model_dump()
    if estimate and trace:
        record["trace"] = estimate.trace
        record["witness"] = estimate.to_record()["witness"]
    if fmt == "csv":
        row = {"functional": value.meta.get("functional", functional), "value": value.value,
               "kind": value.kind, "err": value.err, "p": p, "i": i,
               "resolution": value.meta.get("resolution", resolution)}
        _write(_csv(VALUE_COLUMNS, [row]), out)
    else:
        _write(json.dumps(record, default=float) + "\n", out)
    exhausted = bool(estimate and estimate.budget_exhausted)
    if exhausted:
        logger.warning("%s: best start exhausted its iteration budget", functional)
    _summary(command="compute", status="ok", functional=functional, value=value.value,
             kind=value.kind, err=value.err, budget_exhausted=exhausted)


# --- verify / rules / report ---------------------------------------------------------


def _verdict_rows(report: SuiteReport) -> list[dict[str, Any]]:
    rows = []
    for r in report.cases:
        rows.append({
            "case_index": r.case_index,
            "rule_id": r.rule_id,
            "part": r.part,
            "p": r.inputs.get("p"),
            "i": r.inputs.get("i"),
            "alpha": r.inputs.get("alpha"),
            "lhs": r.lhs.value if r.lhs else None,
            "lhs_kind": r.lhs.kind if r.lhs else None,
            "lhs_err": r.lhs.err if r.lhs else None,
            "rhs": r.rhs.value if r.rhs else None,
            "rhs_kind": r.rhs.kind if r.rhs else None,
            "rhs_err": r.rhs.err if r.rhs else None,
            "slack": r.slack,
            "verdict": r.verdict,
            "verifiability": r.verifiability,
            "error": r.error,
        })
    return rows


@cli.command()
@click.argument("rules", nargs=-1, required=True)
@click.option("--count", default=None, type=int, help="Cases per rule")
@click.option("--seed", default=None, type=int)
@click.option("--resolution", default=None, type=int)
@click.option("--p", "p_values", default=None, callback=_floats, help="Comma list of p")
@click.option("--i", "i_values", default=None, callback=_floats, help="Comma list of i")
@click.option("--dims", default=None, help="Comma list of dimensions")
@click.option("--family", default=None,
              type=click.Choice(["ellipsoid", "fourier-support", "radial-grid"]))
@click.option("--starts", default=None, type=int)
@click.option("--max-iters", default=None, type=int)
@click.option("--report-only", is_flag=True, default=None,
              help="Also run checks that are logged without a verdict")
@click.option("--out", default=None, help="Write the report here instead of stdout")
@click.option("--format", "fmt", default=None, type=click.Choice(["json", "csv"]),
              help="csv columns: " + ",".join(VERDICT_COLUMNS))
@click.option("--db", default=None, help=f"Archive the run in this DuckDB file (e.g. {DB_PATH})")
@click.option("--config", "config_path", default=None,
              help=f"YAML run config (e.g. {DEFAULT_CONFIG})")
@handled("verify")
def verify(rules: tuple[str, ...], config_path: str | None, fmt: str | None, **flags: Any) -> None:
    """Run fuzzed suites for rule ids or the groups all, two-sided, one-sided, structural."""
    config = load_run_config(config_path, format=fmt, **flags)
    report = fuzz_suite(
        list(rules),
        count=config.count,
        seed=config.seed,
        dims=config.dims,
        p_values=config.p_values,
        i_values=config.i_values,
        resolution=config.resolution,
        cfg=config.search,
        report_only=config.report_only,
    )

    if config.format == "csv":
        _write(_csv(VERDICT_COLUMNS, _verdict_rows(report)), config.out)
    else:
        _write(report.model_dump_json(by_alias=True, indent=2) + "\n", config.out)

    run_id = None
    if config.db:
        conn = get_connection(config.db)
        run_id = insert_suite(conn, report)
        conn.close()

    totals = {key: sum(getattr(t, key) for t in report.tallies.values())
              for key in ("verified", "inconclusive", "violated", "reported", "skipped", "errors")}
    _summary(command="verify", status="violated" if report.violated else "ok",
             suite=report.suite, seed=report.seed, cases=len(report.cases),
             run_id=run_id, **totals)
    if report.violated:
        raise SystemExit(3)


@cli.command("rules")
def list_rules() -> None:
    """List the rule catalogue."""
    table = Table(title="geokit rules")
    table.add_column("ID", style="bold")
    table.add_column("Group")
    table.add_column("Parts")
    table.add_column("Title")
    for rule in CATALOGUE.values():
        parts = ", ".join(f"{p.name} ({p.verifiability})" for p in rule.parts)
        table.add_row(rule.id, rule_group(rule), parts, rule.title)
    console.print(table)
    _summary(command="rules", status="ok", rules=list(CATALOGUE))


@cli.command()
@click.option("--db", default=DB_PATH, show_default=True, help="DuckDB archive")
@click.option("--run", "run_id", default=None, type=int, help="Run id (latest by default)")
@click.option("--out", default=None, help="Write the Markdown here instead of stdout")
@handled("report")
def report(db: str, run_id: int | None, out: str | None) -> None:
    """Render an archived suite run as Markdown."""
    conn = get_connection(db)
    try:
        text = generate_report(conn, run_id)
    finally:
        conn.close()
    _write(text + "\n", out)
    _summary(command="report", status="ok", db=db, run_id=run_id)
