"""Command-line front end. Every workflow writes CSV files into ``--out-dir``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .cache import MomentCache
from .config import ScenarioConfig, load_config
from .errors import FprError
from .geometry import assign_reuse_coloring, build_hex_grid
from .mustats import moments_csv_rows, quadrature_moment_table
from .optimizer import (
    BASELINE,
    FPR,
    Evaluator,
    SearchSpace,
    beta_f_profile,
    compute_gains,
    optimize,
    sweep,
    unimodality_violation,
)
from .propagation import PropagationModel
from .providers import MonteCarloMuProvider
from .semodel import Combiner, SystemParams

log = logging.getLogger("fprsim")

SWEEP_COLUMNS = ["N", "combiner", "scheme", "K", "beta", "beta_f", "B", "se_bits_per_hz", "se_asymptotic"]
GAIN_COLUMNS = ["N", "combiner", "se_fpr", "se_baseline", "gain_percent"]
MU_COLUMNS = ["cell_index", "tier", "color", "group", "gamma", "mu", "stderr"]
PROFILE_COLUMNS = ["N", "combiner", "K", "beta", "beta_f", "B", "se_bits_per_hz", "se_stderr"]
ORACLE_COLUMNS = ["K", "beta_f", "cell_index", "group", "gamma", "mu_mc", "stderr", "mu_quadrature", "z"]
TABLE1_N = (10, 100, 1000, 10000)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    if isinstance(x, Combiner):
        return x.value
    return str(x)


def write_csv(path: Path, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def sweep_row(r):
    return (r.N, r.combiner, r.scheme, r.K, r.beta, r.beta_f, r.B, r.se, r.se_asymptotic)


# --------------------------------------------------------------------------
# plumbing
# --------------------------------------------------------------------------


def scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    return cfg.replace(seed=args.seed, n_samples=args.n_samples, threads=args.threads)


def make_provider(cfg: ScenarioConfig, args, drop_size: int | None = None) -> MonteCarloMuProvider:
    grid = build_hex_grid(cfg.radius, cfg.tiers)
    cache = None if args.no_cache else MomentCache(args.cache_dir)
    return MonteCarloMuProvider(
        grid, PropagationModel(cfg.kappa), cfg.n_samples,
        drop_size=drop_size or getattr(args, "drop_size", None) or cfg.K_max,
        min_dist_fraction=cfg.min_dist_fraction, seed=cfg.seed, threads=cfg.threads,
        chunk_size=cfg.chunk_size, cache=cache,
    )


def make_evaluator(cfg: ScenarioConfig, args) -> Evaluator:
    return Evaluator(make_provider(cfg, args), cfg.inv_snr, cfg.model_options)


def combiners(cfg: ScenarioConfig, args):
    if getattr(args, "combiner", None):
        return (Combiner.parse(args.combiner),)
    return cfg.combiners


def spaces(cfg: ScenarioConfig, beta_set=None):
    kw = dict(K_min=cfg.K_min, K_max=cfg.K_max, beta_set=tuple(beta_set or cfg.beta_set), T=cfg.T)
    return SearchSpace(fractional=True, **kw), SearchSpace(fractional=False, **kw)


def tag(c: Combiner) -> str:
    return "mrc" if c is Combiner.MRC else "pzfc"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_estimate_mu(cfg, args) -> int:
    provider = make_provider(cfg, args, drop_size=args.drop_size or max(args.K, 1))
    stats = provider.statistics(args.K, args.beta_f)
    grid = assign_reuse_coloring(provider.grid, args.beta)
    rows = moments_csv_rows(grid, stats)
    m = stats.n_interior
    path = write_csv(Path(args.out_dir) / f"mu_K{args.K}_m{m}.csv", MU_COLUMNS, rows)
    errs = [r[6] for r in rows if r[0] != 0]
    print(f"K={args.K} beta_f={stats.beta_f:g} drops={stats.n_samples} "
          f"max stderr={max(errs):.3g} median stderr={float(np.median(errs)):.3g}")
    print(f"wrote {path}")
    return 0


def cmd_evaluate(cfg, args) -> int:
    combiner = Combiner.parse(args.combiner)
    params = SystemParams(N=args.N, K=args.K, T=cfg.T, beta=args.beta, beta_f=args.beta_f, inv_snr=cfg.inv_snr)
    ev = make_evaluator(cfg, args)
    res = ev.evaluate(params, combiner)
    scheme = "baseline-equivalent" if params.n_interior == 0 else FPR
    row = (args.N, combiner, scheme, args.K, args.beta, params.n_interior / args.K, params.B, res.se,
           res.se_asymptotic)
    path = write_csv(Path(args.out_dir) / "evaluate.csv", SWEEP_COLUMNS, [row])
    sinr_i = "-" if res.sinr_interior is None else f"{res.sinr_interior:.6g}"
    print(f"{combiner.value} N={args.N} K={args.K} beta={args.beta} beta_f={row[5]:g} B={params.B} [{scheme}]")
    print(f"  SINR interior={sinr_i} edge={res.sinr_edge:.6g}")
    print(f"  SE={res.se:.6f} bit/s/Hz  large-N limit={res.se_asymptotic:.6f}")
    print(f"wrote {path}")
    return 0


def run_sweeps(cfg, args, N_list):
    ev = make_evaluator(cfg, args)
    fpr_space, base_space = spaces(cfg)
    out = {}
    for c in combiners(cfg, args):
        for space in (fpr_space, base_space):
            out[(c, space.scheme)] = sweep(space, N_list, c, ev, include_all=getattr(args, "all_points", False))
    return out


def cmd_sweep(cfg, args) -> int:
    results = run_sweeps(cfg, args, cfg.N_list)
    out_dir = Path(args.out_dir)
    for (c, scheme), recs in results.items():
        best = [sweep_row(r) for r in recs if r.is_optimal]
        path = write_csv(out_dir / f"sweep_{tag(c)}_{scheme.lower()}.csv", SWEEP_COLUMNS, best)
        print(f"wrote {path}")
        if args.all_points:
            rows = [sweep_row(r) + (r.is_optimal,) for r in recs]
            path = write_csv(out_dir / f"points_{tag(c)}_{scheme.lower()}.csv", SWEEP_COLUMNS + ["is_optimal"], rows)
            print(f"wrote {path}")
    for c in combiners(cfg, args):
        print(f"{c.value}: N -> (beta, K, beta_f) FPR | baseline")
        for f, b in zip(results[(c, FPR)], results[(c, BASELINE)]):
            print(f"  {f.N:>6}  ({f.beta}, {f.K}, {f.beta_f:.3f}) {f.se:9.2f} | ({b.beta}, {b.K}) {b.se:9.2f}")
    return 0


def cmd_reproduce_table1(cfg, args) -> int:
    results = run_sweeps(cfg, args, TABLE1_N)
    rows = []
    for c in combiners(cfg, args):
        rows += compute_gains(results[(c, FPR)], results[(c, BASELINE)])
    path = write_csv(Path(args.out_dir) / "table1_gains.csv", GAIN_COLUMNS,
                     [(r.N, r.combiner, r.se_fpr, r.se_baseline, r.gain_percent) for r in rows])
    print(f"{'N':>6}  " + "  ".join(f"{c.value:>8}" for c in combiners(cfg, args)))
    for N in TABLE1_N:
        cells = [f"{r.gain_percent:7.1f}%" for c in combiners(cfg, args) for r in rows if r.N == N and r.combiner is c]
        print(f"{N:>6}  " + "  ".join(cells))
    print(f"wrote {path}")
    return 0


def cmd_betaf_profile(cfg, args) -> int:
    combiner = Combiner.parse(args.combiner)
    ev = make_evaluator(cfg, args)
    K = args.K
    if K is None:
        space, _ = spaces(cfg, beta_set=(args.beta,))
        K = optimize(space, args.N, combiner, ev).K
    pts = beta_f_profile(args.N, K, args.beta, combiner, ev, T=cfg.T)
    rows = [(p.N, p.combiner, p.K, p.beta, p.beta_f, p.B, p.se, p.se_stderr) for p in pts]
    path = write_csv(Path(args.out_dir) / f"betaf_profile_N{args.N}_beta{args.beta}_{tag(combiner)}.csv",
                     PROFILE_COLUMNS, rows)
    best = max(pts, key=lambda p: p.se)
    dip = unimodality_violation([p.se for p in pts], [p.se_stderr for p in pts])
    print(f"{combiner.value} N={args.N} beta={args.beta} K={K}: best beta_f={best.beta_f:.4f} SE={best.se:.3f}; "
          f"{'unimodal' if dip <= 0 else f'second peak {dip:.3g} beyond 2 se'}")
    print(f"wrote {path}")
    return 0


def cmd_oracle_check(cfg, args) -> int:
    provider = make_provider(cfg, args, drop_size=args.K)
    quad = quadrature_moment_table(provider.grid, provider.model, args.K, cfg.min_dist_fraction, args.resolution)
    rows, z_all = [], []
    for bf in args.beta_f:
        mc = provider.statistics(args.K, bf)
        qs = quad.statistics(bf)
        for group in ("I", "E"):
            if group == "I" and not mc.has_interior:
                continue
            for g in (1, 2):
                mu, se, ref = mc.moments(group, g), mc.stderr(group, g), qs.moments(group, g)
                for l in range(provider.grid.n_cells):
                    if l == 0:
                        continue
                    z = (mu[l] - ref[l]) / se[l]
                    z_all.append(z)
                    rows.append((args.K, mc.beta_f, l, group, g, mu[l], se[l], ref[l], z))
    path = write_csv(Path(args.out_dir) / f"oracle_check_K{args.K}.csv", ORACLE_COLUMNS, rows)
    z_all = np.abs(np.array(z_all))
    frac = float(np.mean(z_all <= 3.0))
    print(f"{len(z_all)} moments: {100 * frac:.1f}% within 3 standard errors of quadrature (max |z| {z_all.max():.2f})")
    print(f"wrote {path}")
    return 0 if frac >= 0.95 else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fprsim", description="Fractional pilot reuse massive-MIMO simulator")
    p.add_argument("--config", help="key = value scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=lambda s: int(float(s)), help="Monte-Carlo drops")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--out-dir", default=".", help="directory for CSV outputs")
    p.add_argument("--cache-dir", help="moment cache location (default $FPR_SIM_CACHE_DIR or ~/.cache/fprsim)")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the moment cache")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate-mu", help="Monte-Carlo moments for one (K, beta_f)")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--beta-f", type=float, default=0.0)
    s.add_argument("--beta", type=int, default=3, help="reuse factor used for the color column")
    s.add_argument("--drop-size", type=int, help="users drawn per cell and drop (default K)")
    s.set_defaults(func=cmd_estimate_mu)

    s = sub.add_parser("evaluate", help="SE of one parameter point")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--beta", type=int, required=True)
    s.add_argument("--beta-f", type=float, default=0.0)
    s.add_argument("--combiner", required=True, help="MRC or P-ZFC")
    s.add_argument("--drop-size", type=int, help="users per cell and drop (default K_max, as in sweeps)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="optimal SE versus N for FPR and baseline")
    s.add_argument("--combiner", help="restrict to one combiner")
    s.add_argument("--all-points", action="store_true", help="also write every evaluated point")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("reproduce-table1", help="FPR gains over the baseline at N = 10..10^4")
    s.add_argument("--combiner", help="restrict to one combiner")
    s.set_defaults(func=cmd_reproduce_table1)

    s = sub.add_parser("betaf-profile", help="SE versus beta_f at fixed N, K, beta")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--beta", type=int, required=True)
    s.add_argument("--combiner", required=True)
    s.add_argument("--K", type=int, help="default: the optimal K for this beta")
    s.set_defaults(func=cmd_betaf_profile)

    s = sub.add_parser("oracle-check", help="compare Monte-Carlo moments with the quadrature oracle")
    s.add_argument("--K", type=int, default=10)
    s.add_argument("--beta-f", type=float, nargs="+", default=[0.2, 0.5])
    s.add_argument("--resolution", type=int, default=48)
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = scenario(args)
        return args.func(cfg, args)
    except FprError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
