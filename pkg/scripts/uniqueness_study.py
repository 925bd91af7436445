"""Multi-start uniqueness and identity checks on random solvable instances.

Example::

    python3 scripts/uniqueness_study.py --count 50 --starts 10 --seed 0
"""

import argparse
import time
from dataclasses import dataclass

import numpy as np

from bpsgraph import diagnostics as dg
from bpsgraph import nonabelian as na
from bpsgraph.energy import SolverOptions
from bpsgraph.instances import instance_stream


@dataclass(frozen=True)
class StudyConfig:
    count: int = 50
    starts: int = 10
    seed: int = 0
    max_n: int = 12


def study(kind: str, cfg: StudyConfig) -> dict:
    opts = SolverOptions(record_trace=False)
    spread, resid, quad, route_gap, iters = [], [], [], [], []
    for k, (G, prob) in enumerate(instance_stream(kind, cfg.count, cfg.seed, cfg.max_n)):
        sol = dg.solve(G, prob, opts)
        rep = dg.verify(G, prob, sol)
        resid.append(rep.residual_inf)
        quad.append(max(rep.quadrature_errors))
        iters.append(sol.result.iterations)
        spread.append(dg.uniqueness_probe(G, prob, cfg.starts, cfg.seed + k, opts))
        if kind == "nonabelian":
            other = na.solve_nonabelian_constrained(G, prob, opts)
            route_gap.append(float(np.abs(other.u - sol.u).max()))
    out = {
        "max residual": max(resid),
        "max quadrature error": max(quad),
        "max multi-start spread": max(spread),
        "max Newton iterations": max(iters),
    }
    if route_gap:
        out["max route disagreement"] = max(route_gap)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=StudyConfig.count)
    p.add_argument("--starts", type=int, default=StudyConfig.starts)
    p.add_argument("--seed", type=int, default=StudyConfig.seed)
    p.add_argument("--max-n", type=int, default=StudyConfig.max_n)
    cfg = StudyConfig(**vars(p.parse_args(argv)))
    for kind in ("abelian", "nonabelian"):
        t0 = time.perf_counter()
        stats = study(kind, cfg)
        print(f"{kind}: {cfg.count} instances, {cfg.starts} starts each ({time.perf_counter() - t0:.1f} s)")
        for key, val in stats.items():
            print(f"  {key:26s} {val:.3g}")


if __name__ == "__main__":
    main()
