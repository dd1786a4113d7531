"""Horizon convergence of the time-varying policy coefficients.

For several persistence values, solves the first-order system from the right
edge of the grid and fits the geometric rate at which the policy coefficient
at date 0 settles as the horizon grows.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from semiglobal.burnside import BurnsideParams
from semiglobal.expansion import solve_expansion
from semiglobal.models import burnside_model
from semiglobal.tvlre import limit_convergence_test


@dataclass
class Config:
    rhos: tuple[float, ...] = (0.5, 0.7, 0.8, 0.9, 0.95)
    k_sigma: float = 5.0
    steps: int = 2


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rhos", type=lambda s: tuple(float(v) for v in s.split(",")), default=Config.rhos)
    ap.add_argument("--k-sigma", type=float, default=Config.k_sigma)
    ap.add_argument("--steps", type=int, default=Config.steps)
    a = ap.parse_args()
    cfg = Config(a.rhos, a.k_sigma, a.steps)

    print(f"{'rho':>6} {'fitted':>10} {'gap':>9} {'horizons':>16}  differences")
    for rho in cfg.rhos:
        p = BurnsideParams(rho=rho)
        # horizons chosen so the differences stay well above rounding noise
        span = math.log(1e-9) / math.log(rho)
        start, step = max(5, int(0.4 * span)), max(2, int(0.2 * span))
        T = max(start + step * cfg.steps, int(2.5 * span)) + 50
        sol = solve_expansion(burnside_model(p), [p.xbar + cfg.k_sigma * p.sigma_x], [0.0], order=1, T=T)
        rep = limit_convergence_test(sol.system, T1=start, step=step, n_steps=cfg.steps)
        diffs = " ".join(f"{d:.3e}" for d in rep.differences)
        hz = ",".join(map(str, rep.horizons))
        print(f"{rho:6.3f} {rep.rate:10.6f} {rep.rate - rho:+9.2e} {hz:>16}  {diffs}")


if __name__ == "__main__":
    main()
