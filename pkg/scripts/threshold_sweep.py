"""Sweep the vortex count at one vertex and watch solvability flip.

Example::

    python3 scripts/threshold_sweep.py --system abelian --n 6 --mu 2.0 --max-count 6
    python3 scripts/threshold_sweep.py --system nonabelian --n 1 --mu 50.27 --e 1.4142 --g 1.4142
"""

import argparse
import math
from dataclasses import dataclass, replace

from bpsgraph import abelian as ab
from bpsgraph import diagnostics as dg
from bpsgraph import graph_core as gc
from bpsgraph import nonabelian as na
from bpsgraph.energy import SolverOptions
from bpsgraph.errors import BPSError, DivergenceDetected


@dataclass(frozen=True)
class SweepConfig:
    system: str = "abelian"
    n: int = 6
    mu: float = 2.0
    components: int = 1
    max_count: int = 6
    e: float = 2.0
    g: float = 1.5
    v: float = 1.0


def make_problem(cfg: SweepConfig, G, count: int):
    sets = [{} for _ in range(cfg.components)]
    if count:
        sets[0] = {G.vertices[0]: count}
    if cfg.system == "abelian":
        return ab.AbelianProblem.from_multiplicities(*sets)
    return na.NonabelianProblem.from_multiplicities(cfg.e, cfg.g, cfg.v, *sets)


def run_sweep(cfg: SweepConfig) -> list[dict]:
    G = gc.path_graph(cfg.n, measure=cfg.mu)
    opts = SolverOptions(enforce_threshold=False)
    rows = []
    for count in range(cfg.max_count + 1):
        prob = make_problem(cfg, G, count)
        rep = (ab.check_solvable_abelian if cfg.system == "abelian" else na.check_solvable_nonabelian)(G, prob)
        row = {"count": count, "margin": rep.margins[0], "solvable": rep.solvable}
        try:
            sol = dg.solve(G, prob, opts)
            row.update(status="converged", iterations=sol.result.iterations, residual=sol.residual_norm)
        except DivergenceDetected as exc:
            row.update(status="diverged", iterations=exc.result.iterations, residual=math.nan)
        except BPSError as exc:
            row.update(status=exc.code, iterations=None, residual=math.nan)
        rows.append(row)
    return rows


def main(argv=None):
    base = SweepConfig()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--system", choices=("abelian", "nonabelian"), default=base.system)
    for name in ("n", "components", "max_count"):
        p.add_argument(f"--{name.replace('_', '-')}", type=int, default=getattr(base, name))
    for name in ("mu", "e", "g", "v"):
        p.add_argument(f"--{name}", type=float, default=getattr(base, name))
    args = p.parse_args(argv)
    cfg = replace(base, **vars(args))
    G = gc.path_graph(cfg.n, measure=cfg.mu)
    print(f"{cfg.system} system on a {cfg.n}-vertex path, |V| = {G.volume:.6g}")
    print(f"{'count':>5} {'margin':>14} {'solvable':>9} {'status':>10} {'iters':>6} {'residual':>10}")
    for r in run_sweep(cfg):
        print(f"{r['count']:5d} {r['margin']:14.6g} {str(r['solvable']):>9} {r['status']:>10} "
              f"{str(r['iterations']):>6} {r['residual']:10.2e}")


if __name__ == "__main__":
    main()
