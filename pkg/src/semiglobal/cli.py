"""Command-line front end.

Subcommands::

    solve     policy at one initial state
    compare   exact vs semi-global vs local Taylor on a grid (burnside only)
    diagnose  norm bounds, solvability verdict, horizon convergence, Monte-Carlo moment check
    irf       expected paths per order and first-order impulse responses

Outputs go to ``--out``: ``policy.csv``, ``irf.csv`` and ``diagnostics.json``.
Wall-clock timings are only written with ``--timings`` so that repeated runs
produce identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import burnside as bref
from .errors import ConfigError, SolverError
from .expansion import ExpansionSolution, simulate_first_order, solvability_summary, solve_expansion
from .models import REGISTRY, get_model
from .schur import bk_check
from .tvlre import limit_convergence_test

COMMANDS = ("solve", "compare", "diagnose", "irf")


@dataclass
class RunConfig:
    command: str = "solve"
    model: str = "burnside"
    params: dict[str, float] = field(default_factory=dict)
    x0: list[float] | None = None
    z0: list[float] | None = None
    sigma: float | None = None
    order: int = 2
    horizon: int = 300
    grid: int = 41
    delta: float = 5.0
    out: str = "."
    seed: int = 0
    timings: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", diagnostics={"field": "command"})
        if self.model not in REGISTRY:
            raise ConfigError(f"unknown model {self.model!r}; known: {sorted(REGISTRY)}", diagnostics={"field": "model"})
        if self.order not in (0, 1, 2):
            raise ConfigError("order must be 0, 1 or 2", diagnostics={"field": "order"})
        if self.grid < 2:
            raise ConfigError("grid needs at least 2 points", diagnostics={"field": "grid"})
        if self.horizon < 10:
            raise ConfigError("horizon must be at least 10", diagnostics={"field": "horizon"})
        if self.command == "compare" and self.model != "burnside":
            raise ConfigError("compare needs the closed-form reference model 'burnside'", diagnostics={"field": "model"})
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError("sigma must be nonnegative", diagnostics={"field": "sigma"})


@dataclass
class RunReport:
    command: str
    diagnostics: dict[str, Any]
    tables: dict[str, tuple[list[str], list[list[float]]]]
    timings: dict[str, float] = field(default_factory=dict)
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path}: {exc.msg} at line {exc.lineno}, column {exc.colno}",
            diagnostics={"line": exc.lineno, "column": exc.colno},
        ) from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"config {path}: unknown field {key!r}", diagnostics={"field": key})
    return doc


def _finite(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit_csv(header: Sequence[str], rows: Sequence[Sequence], path: str | Path) -> Path:
    """Write a CSV with a header row and round-trip float formatting."""
    path = Path(path)
    width = len(header)
    for r in rows:
        if len(r) != width:
            raise ValueError(f"row of length {len(r)} in a table with {width} columns")
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise SolverError(f"cannot write {path}: {exc}", stage="cli-report") from None
    return path


def emit_json(obj: dict, path: str | Path) -> Path:
    path = Path(path)
    text = json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise SolverError(f"cannot write {path}: {exc}", stage="cli-report") from None
    return path


def _initial_state(cfg: RunConfig, model) -> tuple[np.ndarray, np.ndarray]:
    if cfg.x0 is None:
        from .model import steady_state

        guess = model.steady_guess if model.steady_guess is not None else np.zeros(model.n_eq)
        x0 = steady_state(model, guess).x
    else:
        x0 = np.asarray(cfg.x0, dtype=float)
    z0 = np.zeros(model.n_z) if cfg.z0 is None else np.asarray(cfg.z0, dtype=float)
    if x0.size != model.n_x or z0.size != model.n_z:
        raise ConfigError(
            f"model {model.name!r} needs {model.n_x} x0 and {model.n_z} z0 values",
            diagnostics={"field": "x0" if x0.size != model.n_x else "z0"},
        )
    return x0, z0


def _policy_table(sol: ExpansionSolution, x0: np.ndarray) -> tuple[list[str], list[list[float]]]:
    ny = sol.y.shape[-1]
    head = [f"x0_{j}" for j in range(x0.size)]
    row = list(x0)
    for n in range(sol.order + 1):
        head += [f"y{j}_order{n}" for j in range(ny)]
        row += list(sol.y0(n))
    for n in range(1, sol.order + 1):
        head += [f"y{j}_correction{n}" for j in range(ny)]
        row += list(sol.sigma**n * sol.y0(n))
    head += [f"y{j}" for j in range(ny)]
    row += list(sol.policy)
    return head, [row]


def _solve(cfg: RunConfig, model, rep: RunReport) -> None:
    x0, z0 = _initial_state(cfg, model)
    sol = solve_expansion(model, x0, z0, cfg.sigma, cfg.order, T=cfg.horizon)
    rep.tables["policy.csv"] = _policy_table(sol, x0)
    rep.diagnostics.update(
        policy=sol.policy, sigma=sol.sigma, order=sol.order, path_residual=sol.path.residual,
        newton_iterations=sol.path.iterations, **({"solver": solvability_summary(sol)} if sol.system else {}),
    )
    rep.timings.update(sol.timings)


def _compare(cfg: RunConfig, model, rep: RunReport) -> None:
    fields = {k: v for k, v in cfg.params.items() if k in bref.BurnsideParams.__dataclass_fields__}
    if cfg.sigma is not None:
        fields["sigma"] = cfg.sigma
    p = bref.BurnsideParams(**fields)
    r = bref.accuracy_report(p, p.grid(cfg.grid, cfg.delta))
    rep.tables["policy.csv"] = (r.header(), r.rows())
    rep.diagnostics.update(ybar=p.ybar, sigma_x=p.sigma_x, flags=r.flags, summary=r.summary)


def _diagnose(cfg: RunConfig, model, rep: RunReport) -> None:
    x0, z0 = _initial_state(cfg, model)
    sol = solve_expansion(model, x0, z0, cfg.sigma, max(cfg.order, 1), T=cfg.horizon)
    d = solvability_summary(sol)
    d["blanchard_kahn"] = bk_check(sol.split, model.n_y)
    T1 = max(10, min(100, cfg.horizon - 50))
    d["horizon_convergence"] = limit_convergence_test(sol.system, T1=T1, step=25).to_dict()
    m = np.linalg.norm(sol.system.M, ord=2, axis=(1, 2))
    d["deviation_decay"] = {"M_0": m[0], "M_T": m[-1], "ratio": m[-1] / m.max() if m.max() > 0 else 0.0}
    # Monte-Carlo check of first-order second moments
    n_draws, dates = 10_000, (1, 5, 20)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    xs, ys, _ = simulate_first_order(sol, model, max(dates), n_draws, rng)
    mc = []
    for t in dates:
        for which, draws in (("x", xs[t]), ("y", ys[t])):
            ana = np.diag(sol.ma.covariance(which, t, model.Omega))
            sq = draws**2
            se = sq.std(axis=0, ddof=1) / math.sqrt(n_draws)
            z = np.where(se > 0, (sq.mean(axis=0) - ana) / np.where(se > 0, se, 1), 0.0)
            mc.append({"t": t, "var": which, "analytic": ana, "simulated": sq.mean(axis=0), "z": z})
    d["monte_carlo"] = {"seed": cfg.seed, "draws": n_draws, "checks": mc}
    rep.diagnostics.update(d)
    rep.timings.update(sol.timings)


def _irf(cfg: RunConfig, model, rep: RunReport) -> None:
    x0, z0 = _initial_state(cfg, model)
    sol = solve_expansion(model, x0, z0, cfg.sigma, max(cfg.order, 1), T=cfg.horizon)
    nx, ny = model.n_x, model.n_y
    head = ["t"]
    cols = [np.arange(sol.path.T + 2)]
    for n in range(sol.order + 1):
        head += [f"E0x{j}_order{n}" for j in range(nx)] + [f"E0y{j}_order{n}" for j in range(ny)]
        cols += [sol.x[n][:, j] for j in range(nx)] + [sol.y[n][:, j] for j in range(ny)]
    head += [f"E0x{j}" for j in range(nx)] + [f"E0y{j}" for j in range(ny)]
    cols += [sol.Ex[:, j] for j in range(nx)] + [sol.Ey[:, j] for j in range(ny)]
    shock = np.zeros(model.n_z)
    if model.n_z:
        shock[0] = 1.0
    ix, iy = sol.impulse_response(shock)
    head += [f"irf_x{j}" for j in range(nx)] + [f"irf_y{j}" for j in range(ny)]
    cols += [ix[:, j] for j in range(nx)] + [iy[:, j] for j in range(ny)]
    rows = [[int(c[0])] + [float(v) for v in c[1:]] for c in zip(*cols)]
    rep.tables["irf.csv"] = (head, rows)
    rep.diagnostics.update(policy=sol.policy, sigma=sol.sigma, order=sol.order, shock_component=0)
    rep.timings.update(sol.timings)


HANDLERS = {"solve": _solve, "compare": _compare, "diagnose": _diagnose, "irf": _irf}


def run(cfg: RunConfig, *, write: bool = True) -> RunReport:
    """Execute one command; solver failures end up in ``report.error``, never as exceptions."""
    rep = RunReport(cfg.command, {"command": cfg.command, "model": cfg.model}, {})
    t0 = time.perf_counter()
    try:
        cfg.validate()
        model = get_model(cfg.model, **cfg.params)
        if cfg.sigma is not None:
            model = model.with_sigma(cfg.sigma)
        rep.diagnostics["params"] = dict(model.params)
        HANDLERS[cfg.command](cfg, model, rep)
    except SolverError as exc:
        rep.error = exc.to_record()
    except Exception as exc:  # never crash without a record
        rep.error = SolverError(f"{type(exc).__name__}: {exc}", stage="cli-report").to_record()
    rep.timings["total"] = time.perf_counter() - t0
    if write:
        _write(cfg, rep)
    return rep


def _write(cfg: RunConfig, rep: RunReport) -> None:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        rep.error = rep.error or SolverError(f"cannot create {out}: {exc}", stage="cli-report").to_record()
        return
    try:
        for name, (head, rows) in rep.tables.items():
            emit_csv(head, rows, out / name)
        doc = dict(rep.diagnostics)
        doc["status"] = "ok" if rep.ok else "error"
        if rep.error:
            doc["error"] = rep.error
        if cfg.timings:
            doc["timings"] = rep.timings
        emit_json(doc, out / "diagnostics.json")
    except SolverError as exc:
        rep.error = rep.error or exc.to_record()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a numeric value") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiglobal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model")
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--x0", type=_floats)
        p.add_argument("--z0", type=_floats)
        p.add_argument("--sigma", type=float)
        p.add_argument("--order", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--param", type=_param, action="append", default=[], help="model parameter override name=value")
        p.add_argument("--timings", action="store_true", default=None, help="include wall-clock timings in diagnostics.json")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    doc = load_config(ns.config) if ns.config else {}
    doc["command"] = ns.command
    for key in ("model", "x0", "z0", "sigma", "order", "horizon", "grid", "delta", "out", "seed", "timings"):
        v = getattr(ns, key)
        if v is not None:
            doc[key] = v
    if ns.param:
        doc["params"] = {**doc.get("params", {}), **dict(ns.param)}
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except SolverError as exc:
        print(json.dumps(exc.to_record(), sort_keys=True), file=sys.stderr)
        return 2
    rep = run(cfg)
    if rep.error:
        print(json.dumps(_finite(rep.error), sort_keys=True), file=sys.stderr)
        return 1
    summary = {k: rep.diagnostics[k] for k in ("policy", "flags", "a", "b", "c", "d", "solvability") if k in rep.diagnostics}
    print(json.dumps(_finite(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
