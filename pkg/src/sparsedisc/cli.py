"""Command-line front end.

Subcommands: ``color`` (full coloring), ``project`` (projection stage),
``leverage`` (leverage scores), ``verify`` (oracle cross-checks on a tiny
instance) and ``bench`` (projection time against ``nnz``).

Exit codes: 0 success, 1 usage or input error, 2 solver failure or failed
check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from .coloring import ColoringConfig, fast_hereditary_minimize
from .leverage import implicit_leverage_scores
from .linalg_core import CsrMatrix, OrthonormalBasis
from .mmio import read_matrix_market, write_coloring
from .oracles import (
    MAX_EXACT_ENTRIES,
    MAX_HERDISC_COLS,
    best_eigen_lower_bound,
    brute_force_disc,
    brute_force_herdisc,
    disc,
    exact_leverage_scores,
    herdisc_eigen_lower_bound,
)
from .projection import (
    ProjectionConfig,
    fast_project_to_small_rows,
    max_residual_norm,
    slow_project_to_small_rows,
)
from .sketchkit import RngStream

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
MAX_EIG_COLS = 4096


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunReport:
    input_path: str
    m: int
    n: int
    nnz: int
    seed: int
    mode: str
    disc_achieved: Optional[float] = None
    herdisc_lower_bound: Optional[float] = None
    beta_used: Optional[float] = None
    eta_used: Optional[float] = None
    N_used: Optional[int] = None
    K_used: Optional[int] = None
    outer_rounds: int = 0
    retries_per_round: List[int] = field(default_factory=list)
    wall_time_ms: Dict[str, float] = field(default_factory=dict)
    outcome: str = "fail"


class _Timer:
    def __init__(self):
        self.stages: Dict[str, float] = {}

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.stages[name] = round((time.perf_counter() - t0) * 1e3, 3)
        return out


def _load(path: str) -> CsrMatrix:
    try:
        return read_matrix_market(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _dump(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _lower_bound(A: CsrMatrix, k_max: Optional[int]) -> Optional[float]:
    m, n = A.shape
    if n > MAX_EIG_COLS:
        return None
    if k_max is None:
        return best_eigen_lower_bound(A)
    ks = range(1, min(k_max, m, n) + 1)
    return max((herdisc_eigen_lower_bound(A, k) for k in ks), default=0.0)


def cmd_color(args) -> int:
    timer = _Timer()
    A = timer.run("read", _load, args.input)
    m, n = A.shape
    if m < 1 or n < 1:
        raise UsageError("matrix must have at least one row and one column")
    cfg = ColoringConfig(delta_final=args.delta_final, batch_exponent=args.batch_exponent,
                         mode=args.mode)
    res = timer.run("solve", fast_hereditary_minimize, A, cfg, RngStream(args.seed))
    rep = RunReport(args.input, m, n, A.nnz, args.seed, args.mode,
                    outer_rounds=res.outer_rounds, retries_per_round=res.retries_per_round)
    if res.last is not None:
        rep.beta_used, rep.eta_used = res.last.beta, res.last.eta
        rep.N_used, rep.K_used = res.last.N, res.last.K
    rep.herdisc_lower_bound = timer.run("lower_bound", _lower_bound, A, args.k_sweep)
    if res.success:
        rep.disc_achieved = disc(A, res.x)
        rep.outcome = "success"
        if args.coloring_out:
            write_coloring(args.coloring_out, res.x)
    rep.wall_time_ms = timer.stages
    rep.wall_time_ms["total"] = round(sum(timer.stages.values()), 3)
    _dump(asdict(rep), args.report)
    return EXIT_OK if res.success else EXIT_FAIL


def cmd_project(args) -> int:
    A = _load(args.input)
    m, n = A.shape
    if n < 8:
        raise UsageError(f"projection needs at least 8 columns, got {n}")
    cfg = ProjectionConfig()
    t0 = time.perf_counter()
    if args.mode == "slow":
        res = slow_project_to_small_rows(A, cfg)
    else:
        res = fast_project_to_small_rows(A, cfg, RngStream(args.seed))
    ms = (time.perf_counter() - t0) * 1e3
    if args.v_out:
        np.savetxt(args.v_out, res.V.rows, fmt="%.17g")
    _dump({
        "input_path": args.input, "m": m, "n": n, "nnz": A.nnz, "seed": args.seed,
        "mode": args.mode, "rows": len(res.V), "iterations": res.iterations,
        "max_residual_row_norm": max_residual_norm(A, res.V),
        "max_input_row_norm": float(A.row_norms().max()) if m else 0.0,
        "gram_error": res.V.gram_error(),
        "per_round": [asdict(s) for s in res.per_round_stats],
        "wall_time_ms": round(ms, 3),
    }, args.report)
    return EXIT_OK


def cmd_leverage(args) -> int:
    A = _load(args.input)
    m, n = A.shape
    est = implicit_leverage_scores(A, OrthonormalBasis(n), args.eps, args.delta, RngStream(args.seed))
    out = {"input_path": args.input, "m": m, "n": n, "eps": args.eps, "delta": args.delta,
           "scores": est.scores.tolist()}
    if m * n <= MAX_EXACT_ENTRIES:
        exact = exact_leverage_scores(A)
        nz = exact > 1e-12
        out["exact"] = exact.tolist()
        out["max_relative_error"] = (float(np.max(np.abs(est.scores[nz] / exact[nz] - 1.0)))
                                     if nz.any() else 0.0)
    _dump(out, args.report)
    return EXIT_OK


def _log2(v: float) -> float:
    return max(math.log2(v), 1.0)


def cmd_verify(args) -> int:
    A = _load(args.input)
    m, n = A.shape
    if n > MAX_HERDISC_COLS or n < 1 or m < 1:
        raise UsageError(f"verify needs 1 <= n <= {MAX_HERDISC_COLS}, got n={n}")
    herd = brute_force_herdisc(A)
    best = brute_force_disc(A)
    checks = []
    checks.append(("disc <= herdisc", best.value <= herd, f"disc={best.value:g} herdisc={herd:g}"))
    lbs = [herdisc_eigen_lower_bound(A, k) for k in range(1, min(m, n) + 1)]
    checks.append(("eigen bound <= herdisc", all(b <= herd + 1e-12 for b in lbs),
                   f"best bound={max(lbs):.6g}"))
    res = fast_hereditary_minimize(A, ColoringConfig(), RngStream(args.seed))
    checks.append(("coloring found", res.success, f"rounds={res.outer_rounds}"))
    if res.success:
        d = disc(A, res.x)
        cap = 1000 * herd * _log2(n) * _log2(m) ** 1.5
        checks.append(("coloring within bound", d <= cap, f"disc={d:g} cap={cap:g}"))
        checks.append(("coloring >= optimum", d >= best.value, f"disc={d:g} opt={best.value:g}"))
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_FAIL


def _random_sparse(m: int, n: int, density: float, gen: np.random.Generator) -> CsrMatrix:
    mat = sp.random_array((m, n), density=density, format="csr", rng=gen,
                          data_sampler=lambda size: gen.choice([-1.0, 1.0], size=size))
    return CsrMatrix.from_scipy(mat)


def bench_rows(n: int, m: int, densities, seed: int, repeats: int = 1):
    """``(density, nnz, best wall-time ms)`` of the fast projection per density."""
    rows = []
    for i, d in enumerate(densities):
        A = _random_sparse(m, n, d, RngStream(seed, i).generator())
        best = math.inf
        for r in range(repeats):
            t0 = time.perf_counter()
            fast_project_to_small_rows(A, ProjectionConfig(), RngStream(seed).child("bench", i, r))
            best = min(best, (time.perf_counter() - t0) * 1e3)
        rows.append((d, A.nnz, round(best, 3)))
    return rows


def cmd_bench(args) -> int:
    try:
        densities = [float(s) for s in args.densities.split(",") if s]
    except ValueError as exc:
        raise UsageError(f"bad --densities: {exc}") from exc
    if not densities or any(not 0 < d <= 1 for d in densities):
        raise UsageError("densities must lie in (0, 1]")
    m = args.m if args.m else 8 * args.n
    rows = bench_rows(args.n, m, densities, args.seed, args.repeats)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["density", "nnz", "wall_time_ms"])
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparsedisc", description="Low-discrepancy colorings of sparse matrices.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("color", help="compute a full +-1 coloring")
    c.add_argument("--input", required=True)
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--delta-final", type=float, default=1e-3)
    c.add_argument("--batch-exponent", type=float, default=0.529)
    c.add_argument("--mode", choices=("fast", "slow"), default="fast")
    c.add_argument("--report")
    c.add_argument("--coloring-out")
    c.add_argument("--k-sweep", type=int, default=None, metavar="KMAX",
                   help="limit the eigenvalue lower-bound sweep to k <= KMAX (default: all k)")
    c.set_defaults(func=cmd_color)

    pr = sub.add_parser("project", help="run the projection stage")
    pr.add_argument("--input", required=True)
    pr.add_argument("--seed", type=_seed, default=0)
    pr.add_argument("--mode", choices=("fast", "slow"), default="fast")
    pr.add_argument("--report")
    pr.add_argument("--v-out")
    pr.set_defaults(func=cmd_project)

    lv = sub.add_parser("leverage", help="estimate leverage scores")
    lv.add_argument("--input", required=True)
    lv.add_argument("--seed", type=_seed, default=0)
    lv.add_argument("--eps", type=float, default=0.25)
    lv.add_argument("--delta", type=float, default=0.01)
    lv.add_argument("--report")
    lv.set_defaults(func=cmd_leverage)

    vf = sub.add_parser("verify", help="cross-check against exact oracles (n <= 14)")
    vf.add_argument("--input", required=True)
    vf.add_argument("--seed", type=_seed, default=0)
    vf.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="projection wall time against nnz, as CSV")
    b.add_argument("--n", type=int, default=256)
    b.add_argument("--m", type=int, default=0, help="rows (default 8n)")
    b.add_argument("--densities", default="0.01,0.02,0.04")
    b.add_argument("--seed", type=_seed, default=0)
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sparsedisc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"sparsedisc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
