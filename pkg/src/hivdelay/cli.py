"""Command-line front end: ``hivdelay {simulate,fit,analyze,sweep,si}``.

Values come from built-in defaults, then ``--params``, then individual flags.
Tables are written to ``--out`` (or ``$HIVDELAY_OUT``, or the working
directory) with 15 significant digits.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibria as eq
from . import stability as st
from .dde import IntegrationError, SolverConfig, export_samples, simulate, simulate_si
from .estimation import (
    FIT_HEADER,
    FREE_NAMES,
    DEFAULT_GUESS,
    UGANDA_INITIAL,
    DataError,
    FitProblem,
    NelderMeadConfig,
    builtin_uganda,
    fit_grid,
    load_dataset,
)
from .io import FORMATS, write_table
from .params import UGANDA_FITTED, ModelParams, ParameterError

log = logging.getLogger("hivdelay")

OUT_ENV = "HIVDELAY_OUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_OPTIMIZER = 5


class ConfigError(ValueError, argparse.ArgumentTypeError):
    pass


class OptimizerFailure(RuntimeError):
    pass


# -- argument parsing -----------------------------------------------------


def parse_tspan(text: str) -> tuple[float, float, float]:
    try:
        t0, t1, dt = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--tspan expects t0:t1:dt, got {text!r}") from None
    if not (t1 > t0 and dt > 0):
        raise ConfigError(f"--tspan needs t1 > t0 and dt > 0, got {text!r}")
    return t0, t1, dt


def parse_tau_grid(text: str) -> np.ndarray:
    spec, _, scale = text.partition(",")
    scale = scale or "log"
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"--tau-grid expects lo:hi:n[,log|lin], got {text!r}") from None
    if scale not in ("log", "lin") or not (0 < lo < hi) or n < 2:
        raise ConfigError(f"invalid --tau-grid {text!r}")
    return np.geomspace(lo, hi, n) if scale == "log" else np.linspace(lo, hi, n)


def parse_beta0_scan(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"--beta0-scan expects lo:hi:n, got {text!r}") from None
    if not (0 < lo < hi) or n < 2:
        raise ConfigError(f"invalid --beta0-scan {text!r}")
    return np.linspace(lo, hi, n)


def parse_floats(text: str, count: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"expected {count} values, got {len(values)}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="parameter file with 'name = value' lines")
    common.add_argument("--delay", type=float, help="delay u in years")
    common.add_argument("--beta0", type=float, help="override beta0 (beta1, beta2 unchanged)")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or .)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--rtol", type=float, default=1e-6)
    common.add_argument("--atol", type=float, default=1e-9)
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hivdelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="full-model trajectory")
    p.add_argument("--tspan", default="0:15:0.1", type=parse_tspan)
    p.add_argument("--data", help="dataset file or 'builtin'; adds an overlay table")
    p.add_argument("--initial", help="S0,S1,S2,Z,I,R at t0 (default: 1992 Uganda state)")

    p = sub.add_parser("fit", parents=[common], help="estimate beta0, eta, gamma0, q")
    p.add_argument("--data", default="builtin", help="dataset file or 'builtin'")
    p.add_argument("--delays", help="comma-separated delays to fit (overrides --delay)")
    p.add_argument("--x0", default=",".join(map(str, DEFAULT_GUESS)), help="beta0,eta,gamma0,q start")
    p.add_argument("--Z0", type=float, default=UGANDA_INITIAL[3], help="initial information level")
    p.add_argument("--max-iter", type=int, default=2000)

    sub.add_parser("analyze", parents=[common], help="equilibria, stability and persistence report")

    p = sub.add_parser("sweep", parents=[common], help="tau sweep, G curve and beta0 scan")
    p.add_argument("--tau-grid", default="0.1:1000:50,log", type=parse_tau_grid)
    p.add_argument("--beta0-scan", type=parse_beta0_scan)
    p.add_argument("--g-points", type=int, default=1001)

    p = sub.add_parser("si", parents=[common], help="information-free SI model")
    p.add_argument("--tspan", default="0:15:0.1", type=parse_tspan)
    p.add_argument("--S0", type=float, default=UGANDA_INITIAL[0])
    p.add_argument("--I0", type=float, default=UGANDA_INITIAL[4])
    p.add_argument("--history-I", type=float, default=None,
                   help="constant I on [-u, 0) (default: I0)")
    return parser


# -- configuration --------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    out: Path
    fmt: str = "csv"
    solver: SolverConfig = field(default_factory=SolverConfig)
    jobs: int = 1
    args: argparse.Namespace | None = None

    @property
    def ext(self) -> str:
        return "csv" if self.fmt == "csv" else "jsonl"

    def path(self, stem: str) -> Path:
        return self.out / f"{stem}.{self.ext}"


def resolve_params(args) -> ModelParams:
    u = 6 if args.delay is None else args.delay
    row = int(u) if u == int(u) and int(u) in UGANDA_FITTED else 6
    base = ModelParams.uganda(row).replace(u=float(u))
    if args.params:
        path = Path(args.params)
        if not path.exists():
            raise ConfigError(f"parameter file not found: {path}")
        base = ModelParams.from_file(path, base=base)
    overrides = {}
    if args.delay is not None:
        overrides["u"] = float(args.delay)
    if args.beta0 is not None:
        overrides["beta0"] = args.beta0
    return base.replace(**overrides) if overrides else base


def resolve_config(args) -> RunConfig:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    try:
        solver = SolverConfig(rel_tol=args.rtol, abs_tol=args.atol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return RunConfig(args.command, resolve_params(args), out, args.format, solver, jobs, args)


def load_data(spec: str):
    return builtin_uganda() if spec == "builtin" else load_dataset(spec)


@contextmanager
def pool(jobs: int, n_items: int):
    if jobs <= 1 or n_items <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=min(jobs, n_items)) as ex:
        yield ex


def sample_times(tspan) -> np.ndarray:
    t0, t1, dt = tspan
    n = int(round((t1 - t0) / dt))
    t = t0 + dt * np.arange(n + 1)
    t[-1] = min(t[-1], t1)
    if t[-1] < t1:
        t = np.append(t, t1)
    return t


# -- subcommands ----------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    args = cfg.args
    t0, t1, _ = args.tspan
    y0 = parse_floats(args.initial, 6) if args.initial else UGANDA_INITIAL
    traj = simulate(cfg.params, np.array(y0), (t0, t1), cfg.solver, full=True)
    times = sample_times(args.tspan)
    written = [cfg.path("trajectory")]
    export_samples(traj, times, written[0], cfg.fmt)
    if args.data:
        ds = load_data(args.data)
        written.append(cfg.path("overlay"))
        write_table(("year", "t", "observable", "model", "data"), overlay_rows(traj, ds),
                    written[-1], cfg.fmt)
    return written


def overlay_rows(traj, ds) -> list[list]:
    rows = []
    for name, obs in (("susceptible", ds.susceptible_obs), ("infected", ds.infected_obs),
                      ("info_fraction", ds.info_obs)):
        for year, value in obs:
            t = year - ds.epoch_year
            if not traj.t0 <= t <= traj.t1:
                continue
            y = traj(float(t))
            model = {"susceptible": y[0] + y[1] + y[2], "infected": y[4], "info_fraction": y[3]}[name]
            rows.append([year, t, name, model, value])
    return rows


def cmd_fit(cfg: RunConfig) -> list[Path]:
    args = cfg.args
    ds = load_data(args.data)
    delays = parse_floats(args.delays) if args.delays else (cfg.params.u,)
    x0 = parse_floats(args.x0, 4)
    problem = FitProblem(B=cfg.params.B, mu=cfg.params.mu, d=cfg.params.d,
                         gamma1=cfg.params.gamma1, gamma2=cfg.params.gamma2).with_Z0(args.Z0)
    nm = NelderMeadConfig(max_iter=args.max_iter)
    with pool(cfg.jobs, len(delays)) as ex:
        results = fit_grid(ds, delays, x0, problem, nm, executor=ex)
    written = [cfg.path("fit")]
    write_table(FIT_HEADER, [r.as_row() for r in results], written[0], cfg.fmt)
    for r in results:
        path = cfg.path(f"trace_u{r.u:g}")
        rows = [[k + 1, *x, fx] for k, (x, fx) in enumerate(r.trace)]
        write_table(("iteration", *FREE_NAMES, "sse"), rows, path, cfg.fmt)
        written.append(path)
        print(f"u={r.u:g} beta0={r.beta0:.6f} eta={r.eta:.6f} gamma0={r.gamma0:.6f} "
              f"q={r.q:.6f} sse={r.sse:.6f} iterations={r.iterations} converged={r.converged}")
    failed = [r.u for r in results if not r.converged]
    if failed:
        raise OptimizerFailure(f"simplex search did not converge for u = {failed}")
    return written


def analysis_report(p: ModelParams) -> str:
    """Plain-text report: thresholds, equilibria, stability and persistence."""
    dq = p.derived()
    lines = [
        f"D0 = {dq.D0:.15g}",
        f"R0 = {dq.R0:.15g}",
        f"tau = {dq.tau:.15g}",
        f"rel_weight = {dq.rel_weight:.15g}",
        f"E0 = {fmt_tuple(eq.disease_free(p).as_tuple())}",
    ]
    dfe = st.dfe_stability(p)
    lines.append(f"dfe_verdict = {dfe.verdict.value}")
    if dfe.positive_root is not None:
        lines.append(f"dfe_growth_rate = {dfe.positive_root:.15g}")
    if p.beta_max <= p.D0:
        lines.append("regime = disease-free globally attracting (max beta <= D0)")

    report = eq.classify_roots(p)
    lines.append(f"root_case = {report.case.value}")
    for k, (root, slope) in enumerate(zip(report.roots, report.slopes)):
        sign = "+" if slope > 0 else "-" if slope < 0 else "0"
        lines.append(f"root[{k}] = {root:.15g}  dG/dI = {slope:.15g} ({sign})")
    for k, E in enumerate(eq.endemic_equilibria(p)):
        lines.append(f"E*[{k}] (S0,S1,S2,Z,I) = {fmt_tuple(E.as_tuple())}")

    if p.beta0 > p.D0:
        spec = st.endemic_stable_u0(p)
        lines.append("u0_spectrum = " + ", ".join(fmt_complex(z) for z in spec.eigenvalues))
        lines.append(f"u0_max_real_part = {spec.max_real_part:.15g}")
        lines.append(f"u0_stable = {str(spec.stable).lower()}")
        bounds = st.persistence_bounds(p)
        lines.append(f"persistence_bounds = ({bounds.weak_lower:.15g}, {bounds.upper:.15g})")
        lo, hi = eq.I_star_bounds(p)
        lines.append(f"I_star_bracket = ({lo:.15g}, {hi:.15g})")
    if p.beta0 >= max(p.beta1, p.beta2) and p.beta0 > p.D0:
        lines.append(f"tau_limit_case = {eq.limit_case(p)}")
    return "\n".join(lines) + "\n"


def fmt_tuple(values) -> str:
    return "(" + ", ".join(f"{v:.15g}" for v in values) + ")"


def fmt_complex(z: complex) -> str:
    return f"{z.real:.15g}{z.imag:+.15g}j"


def cmd_analyze(cfg: RunConfig) -> list[Path]:
    text = analysis_report(cfg.params)
    path = cfg.out / "analysis.txt"
    path.write_text(text)
    sys.stdout.write(text)
    return [path]


def g_curve_rows(p: ModelParams, n: int) -> list[list[float]]:
    I = np.linspace(0.0, p.B / p.mu, n)
    G = eq.eval_G(I, p)
    return [[i, g, p.mu + p.d] for i, g in zip(I, G)]


def cmd_sweep(cfg: RunConfig) -> list[Path]:
    args, p = cfg.args, cfg.params
    written = [cfg.path("tau_sweep"), cfg.path("g_curve")]
    with pool(cfg.jobs, len(args.tau_grid)) as ex:
        rows = eq.sweep_tau(p, args.tau_grid, executor=ex)
    write_table(eq.SWEEP_HEADER, eq.sweep_rows(rows), written[0], cfg.fmt)
    write_table(("I", "G", "mu_plus_d"), g_curve_rows(p, args.g_points), written[1], cfg.fmt)
    if args.beta0_scan is not None:
        with pool(cfg.jobs, len(args.beta0_scan)) as ex:
            scan = st.beta0_grid_scan(p, args.beta0_scan, executor=ex)
        path = cfg.path("beta0_scan")
        write_table(("beta0", "max_real_part"), list(zip(scan.beta0_values, scan.max_real_parts)),
                    path, cfg.fmt)
        written.append(path)
        if scan.first_unstable is None:
            print(f"no loss of stability up to beta0 = {scan.cap:.15g}")
        else:
            print(f"first unstable beta0 = {scan.first_unstable:.15g}")
    return written


def cmd_si(cfg: RunConfig) -> list[Path]:
    args, p = cfg.args, cfg.params
    t0, t1, _ = args.tspan
    hist_I = args.I0 if args.history_I is None else args.history_I
    y0 = np.array([args.S0, args.I0])
    history = (lambda t: np.array([args.S0, hist_I]) if t < t0 else y0) if hist_I != args.I0 else None
    traj = simulate_si(p, args.S0, args.I0, (t0, t1), cfg.solver, history)
    path = cfg.path("si_trajectory")
    export_samples(traj, sample_times(args.tspan), path, cfg.fmt)
    return [path]


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "analyze": cmd_analyze,
            "sweep": cmd_sweep, "si": cmd_si}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        written = COMMANDS[args.command](cfg)
    except (ConfigError, ParameterError, st.PreconditionViolated) as exc:
        print(f"hivdelay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"hivdelay: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IntegrationError, eq.BracketFailure, st.NoConvergence) as exc:
        print(f"hivdelay: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OptimizerFailure as exc:
        print(f"hivdelay: optimizer error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except ValueError as exc:
        print(f"hivdelay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
