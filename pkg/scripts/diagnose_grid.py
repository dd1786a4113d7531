"""Norm bounds and the sufficient existence test across initial states."""

from __future__ import annotations

import argparse
import warnings
from dataclasses import dataclass

import numpy as np

from semiglobal.burnside import BurnsideParams
from semiglobal.errors import SolverError
from semiglobal.expansion import solve_expansion, solvability_summary
from semiglobal.models import burnside_model


@dataclass
class Config:
    points: int = 11
    delta: float = 5.0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=Config.points)
    ap.add_argument("--delta", type=float, default=Config.delta)
    cfg = Config(**vars(ap.parse_args()))

    p = BurnsideParams()
    model = burnside_model(p)
    print(f"{'k':>6} {'a':>8} {'b':>8} {'c':>9} {'d':>9} {'verdict':>8} {'s1':>10} {'cond L':>9}")
    for k in np.linspace(-cfg.delta, cfg.delta, cfg.points):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sol = solve_expansion(model, [p.xbar + k * p.sigma_x], [0.0], order=1)
        except SolverError as exc:
            print(f"{k:6.2f}  {type(exc).__name__}: {exc}")
            continue
        d = solvability_summary(sol)
        rep = d["solvability"]
        verdict = "n/a" if rep is None else ("pass" if rep["passed"] else "fail")
        s1 = float("nan") if rep is None else rep["s1"]
        print(
            f"{k:6.2f} {d['a']:8.4f} {d['b']:8.4f} {d['c']:9.2e} {d['d']:9.2e} {verdict:>8} {s1:10.4g} {d['max_cond_L']:9.3g}"
        )


if __name__ == "__main__":
    main()
