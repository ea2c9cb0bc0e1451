"""Command-line front end.

Exit status is 0 on success, 1 for configuration errors and 2 for numerical
failures; errors are written to stderr as a single JSON record.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .bath import BathCorrelation
from .config import ConfigError, RunConfig, beta_value, load_config
from .core import TimeGrid, resolve_cutoff
from .dynamics import (HistoryTruncationError, NumericalFailure, evolve_markov, evolve_memory,
                       resonance_roots)
from .kernel import (FrequencyKernel, born_kernel_freq, dissipator_at, kernel_continued,
                     qp_generator, sample_memory_kernel, shift_at)
from .quadrature import QuadratureError
from .qubit import QubitParams, qubit_analytic, qubit_lindblad_generator, qubit_rates
from .wick import FockOracle, TruncationError, WickLimitError, verify_wick

TOOL = "oqsfield"
COMMANDS = ("simulate", "kernel-scan", "resonances", "wick-check", "qubit-demo")


class PositivityFailure(NumericalFailure):
    """Trajectory left the positive cone and the config asks for a hard failure."""


class Table:
    """Rows of floats with named columns plus free-form metadata."""

    def __init__(self, columns: List[str], rows: List[list], extra: Optional[dict] = None,
                 notes: Optional[List[str]] = None):
        self.columns = columns
        self.rows = rows
        self.extra = extra or {}
        self.notes = notes or []

    def select(self, fields: Optional[Sequence[str]]) -> "Table":
        if not fields:
            return self
        unknown = [f for f in fields if f not in self.columns]
        if unknown:
            raise ConfigError(f"output.fields: unknown column(s) {unknown}", field="output.fields")
        keep = [0] + [self.columns.index(f) for f in fields if f != self.columns[0]]
        return Table([self.columns[i] for i in keep], [[r[i] for i in keep] for r in self.rows],
                     self.extra, self.notes)


def _num(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    return x


def _fmt(x) -> str:
    x = _num(x)
    return repr(x + 0.0) if isinstance(x, float) else str(x)  # + 0.0 folds -0.0


def render(table: Table, fmt: str, command: str, cfg: RunConfig) -> str:
    header = {"tool": TOOL, "version": __version__, "config_sha256": cfg.sha256(),
              "command": command}
    if fmt == "json":
        doc = dict(header)
        doc["columns"] = table.columns
        doc["rows"] = [[_num(v) + 0.0 if isinstance(_num(v), float) else _num(v) for v in r]
                       for r in table.rows]
        doc.update({k: v for k, v in table.extra.items()})
        return json.dumps(doc, sort_keys=True) + "\n"
    buf = io.StringIO()
    for k in ("tool", "version", "config_sha256", "command"):
        buf.write(f"# {k}={header[k]}\n")
    for note in table.notes:
        buf.write(f"# {note}\n")
    buf.write(",".join(table.columns) + "\n")
    for r in table.rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _matrix_columns(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{i}_{j}_{part}" for i in range(n) for j in range(n) for part in ("re", "im")]


def _interleave(M) -> List[float]:
    flat = np.asarray(M).reshape(-1)
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def _need_system(cfg: RunConfig):
    if cfg.system is None or cfg.bath is None:
        raise ConfigError("this command needs 'system' and 'bath' blocks", field="system")
    return cfg.system.spec(), cfg.bath.spec()


def _correlation(cfg: RunConfig, sys_spec, bath) -> BathCorrelation:
    settings = cfg.simulation.settings()
    return BathCorrelation(bath, resolve_cutoff(settings, sys_spec, bath.model.scale),
                           settings.pv_exclusion)


# -- subcommands -------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> Table:
    sys_spec, bath = _need_system(cfg)
    sim = cfg.simulation
    settings = sim.settings()
    corr = _correlation(cfg, sys_spec, bath)
    d = sys_spec.dim
    if sim.initial_state is not None:
        rho0 = sim.initial_state.array()
    else:
        rho0 = np.zeros((d, d), dtype=complex)
        top = int(np.argmax(sys_spec.E))
        rho0[top, top] = 1.0
    grid = settings.time_grid
    if sim.mode == "markov":
        traj = evolve_markov(qp_generator(sys_spec, corr, rwa=sim.rwa, cfg=settings), rho0,
                             grid, settings)
    else:
        kstep = sim.kernel_step or grid.step / 2
        span = min(settings.history_depth, grid.stop - grid.start)
        K = sample_memory_kernel(sys_spec, corr, kstep, span, settings)
        traj = evolve_memory(sys_spec, K, rho0, grid, settings)
    if traj.positivity_violated and sim.positivity == "fail":
        raise PositivityFailure(
            f"minimum eigenvalue {traj.min_eig.min():.3e} below -tol_pos={settings.tol_pos}")
    cols = ["time"] + [f"rho_{i}_{j}_{p}" for i in range(d) for j in range(d) for p in ("re", "im")]
    cols += ["trace_defect", "min_eig", "purity"]
    rows = [[t] + _interleave(r) + [td, me, pu] for t, r, td, me, pu in
            zip(traj.times, traj.states, traj.trace_defect, traj.min_eig, traj.purity)]
    extra = {"mode": sim.mode, "rwa": sim.rwa, "error_estimate": traj.error_estimate,
             "positivity_violated": traj.positivity_violated}
    notes = [f"mode={sim.mode}", f"rwa={'on' if sim.rwa else 'off'}",
             f"error_estimate={_fmt(traj.error_estimate)}"]
    return Table(cols, rows, extra, notes)


def cmd_kernel_scan(cfg: RunConfig) -> Table:
    sys_spec, bath = _need_system(cfg)
    sim = cfg.simulation
    settings = sim.settings()
    corr = _correlation(cfg, sys_spec, bath)
    ks = cfg.kernel_scan
    n = sys_spec.dim ** 2
    cols = ["omega"] + _matrix_columns("K", n) + _matrix_columns("shift", n) \
        + _matrix_columns("dissipator", n)
    rows = []
    for w in np.linspace(ks.omega_start, ks.omega_stop, ks.n_points):
        w = float(w)
        if ks.eps is None:
            K = kernel_continued(sys_spec, corr, w, sim.rwa, settings)
        else:
            K = born_kernel_freq(sys_spec, corr, w, ks.eps, sim.rwa, cfg=settings)
        D = shift_at(sys_spec, corr, w, sim.rwa, settings)
        L = dissipator_at(sys_spec, corr, w, sim.rwa, settings)
        rows.append([w] + _interleave(K) + _interleave(D) + _interleave(L))
    notes = [f"rwa={'on' if sim.rwa else 'off'}",
             "eps=" + ("analytic" if ks.eps is None else _fmt(ks.eps))]
    return Table(cols, rows, {"rwa": sim.rwa, "eps": ks.eps}, notes)


def cmd_resonances(cfg: RunConfig) -> Table:
    sys_spec, bath = _need_system(cfg)
    sim = cfg.simulation
    settings = sim.settings()
    corr = _correlation(cfg, sys_spec, bath)
    rc = cfg.resonances
    fk = FrequencyKernel(sys_spec, corr, sim.rwa, settings)
    rs = resonance_roots(sys_spec, fk, rc.mode, rc.max_iter, rc.root_tol, settings)
    cols = ["index", "sector", "omega_re", "omega_im", "residual", "det_residual", "iterations"]
    rows = []
    for i, r in enumerate(rs):
        label = ";".join(f"{p}{q}" for p, q in r.sector)
        rows.append([i, label, r.omega.real, r.omega.imag, r.residual, r.det_residual,
                     r.iterations])
    return Table(cols, rows, {"mode": rc.mode}, [f"mode={rc.mode}"])


def cmd_wick_check(cfg: RunConfig) -> Table:
    w = cfg.wick
    oracle = FockOracle(tuple(w.modes), w.n_max, beta_value(w.beta))
    rep = verify_wick(oracle, oracle.correlation(), w.max_n, w.strings_per_length, w.seed)
    rows = [[n, dev] for n, dev in sorted(rep.by_length.items())]
    extra = {"max_deviation": rep.max_deviation, "n_strings": rep.n_strings,
             "truncation_error": rep.truncation_error}
    notes = [f"max_deviation={_fmt(rep.max_deviation)}",
             f"truncation_error={_fmt(rep.truncation_error)}"]
    return Table(["length", "max_deviation"], rows, extra, notes)


QUBIT_DEMO_STATE = np.array([[0.75, 0.25], [0.25, 0.25]], dtype=complex)


def cmd_qubit_demo(cfg: RunConfig) -> Table:
    q = cfg.qubit
    p = QubitParams(q.omega0, q.g0, q.n0, q.delta)
    rates = qubit_rates(p)
    t_stop = q.t_stop or (10.0 / q.g0 if q.g0 > 0 else 10.0 / q.omega0)
    grid = TimeGrid(0.0, t_stop, t_stop / (q.n_points - 1))
    settings = cfg.simulation.settings()
    traj = evolve_markov(qubit_lindblad_generator(p), QUBIT_DEMO_STATE, grid, settings)
    exact = qubit_analytic(p, QUBIT_DEMO_STATE, traj.times)
    cols = ["time"] + [f"analytic_{i}_{j}_{s}" for i in range(2) for j in range(2) for s in ("re", "im")]
    cols += [f"numeric_{i}_{j}_{s}" for i in range(2) for j in range(2) for s in ("re", "im")]
    cols += ["max_abs_diff"]
    rows = [[t] + _interleave(a) + _interleave(b) + [float(np.abs(a - b).max())]
            for t, a, b in zip(traj.times, exact, traj.states)]
    notes = [f"K[{k}] = {_fmt(v)}" for k, v in rates.items()]
    return Table(cols, rows, {"rates": rates}, notes)


HANDLERS = {
    "simulate": cmd_simulate,
    "kernel-scan": cmd_kernel_scan,
    "resonances": cmd_resonances,
    "wick-check": cmd_wick_check,
    "qubit-demo": cmd_qubit_demo,
}


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry (dotted key)")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--rwa", choices=("on", "off"))
    common.add_argument("--mode", choices=("markov", "memory"))
    common.add_argument("--max-n", type=int, dest="max_n")
    parser = argparse.ArgumentParser(prog=TOOL, description="Born-Markov open-system toolkit")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _flag_overrides(args) -> List[str]:
    out = list(args.overrides)
    if args.format:
        out.append(f"output.format={args.format}")
    if args.rwa:
        out.append(f"simulation.rwa={'true' if args.rwa == 'on' else 'false'}")
    if args.mode:
        out.append(f"simulation.mode={args.mode}")
    if args.max_n is not None:
        out.append(f"wick.max_n={args.max_n}")
    return out


def _fail(kind: str, exc: BaseException, code: int, stderr) -> int:
    record = exc.record() if isinstance(exc, ConfigError) else \
        {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _flag_overrides(args))
        table = HANDLERS[args.command](cfg).select(cfg.output.fields)
        text = render(table, cfg.output.format, args.command, cfg)
    except ConfigError as exc:
        if exc.path is None:
            exc.path = args.config
        return _fail("config", exc, 1, stderr)
    except (WickLimitError, HistoryTruncationError) as exc:
        return _fail("config", exc, 1, stderr)
    except (NumericalFailure, QuadratureError, TruncationError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", exc, 2, stderr)
    except ValueError as exc:
        return _fail("config", exc, 1, stderr)
    path = args.output or cfg.output.path
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
