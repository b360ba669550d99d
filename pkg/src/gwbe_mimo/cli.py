"""Command-line front end.

Subcommands write CSV files into ``--out``; every file starts with ``#``
comment lines naming the design(s), the seed and the config digest.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import os
import sys
from pathlib import Path

import numpy as np

from .design_baseline import WBE_MODES, fos_design, wbe_design
from .design_gwbe import POLICIES, gwbe_design, inflate_targets, snap_inflated
from .errors import (
    ConfigError,
    DimensionMismatch,
    GridTooFine,
    GwbeError,
    InfeasibleTargets,
    NonPositiveTarget,
    NumericalError,
    ParseError,
)
from .load_analysis import (
    feasibility_oracle,
    max_permitted_sinr,
    region_sweep,
    welch_trace,
)
from .majorization import effective_bandwidth
from .netmodel import (
    Experiment,
    NetworkConfig,
    PilotBook,
    SinrTargets,
    UserId,
    load_experiment,
    uplink_power_control,
)
from .sinr_engine import (
    delta_vector,
    fmt,
    monte_carlo_sinr,
    sinr_asymptotic,
    sinr_finite,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_USAGE = 5
EXIT_VERIFY = 6
ENV_PREFIX = "GWBE_MIMO_"
DEFAULT_DESIGNS = "GWBE,WBE,FOS"
NT_GRID = tuple(range(10, 501, 10))

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_ERROR}  unexpected error
  {EXIT_INFEASIBLE}  infeasible targets (budget, majorization or cap violation)
  {EXIT_CONFIG}  bad config, targets or pilot-book file
  {EXIT_NUMERICAL}  numerical failure (rank loss, non-convergence, bracket failure)
  {EXIT_USAGE}  usage error or grid too fine
  {EXIT_VERIFY}  verify: at least one check failed

environment overrides ({ENV_PREFIX}<FLAG>): CONFIG, OUT, SEED, DESIGNS, TRIALS, GRID
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _designs(text: str) -> list[str]:
    out = [d.strip().upper() for d in text.split(",") if d.strip()]
    bad = [d for d in out if d not in ("GWBE", "WBE", "FOS")]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown design(s) {bad}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("CONFIG"), help="YAML experiment file")
    common.add_argument("--out", default=_env("OUT", "."), help="output directory")
    common.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    common.add_argument("--designs", type=_designs, default=_designs(_env("DESIGNS", DEFAULT_DESIGNS)))
    common.add_argument("--wbe-mode", choices=WBE_MODES, default=None,
                        help="WBE frame scope (default: config or per_cell)")
    common.add_argument("--timestamp", action="store_true",
                        help="add a creation time to file headers")
    common.add_argument("--backend", choices=("compiled", "python"), default=None)

    p = _Parser(prog="gwbe-mimo", description=__doc__.splitlines()[0],
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", parents=[common], help="build pilot books for the config targets")
    d.add_argument("--inflation", choices=POLICIES, default=None)

    r = sub.add_parser("region", parents=[common], help="load-region sweep")
    r.add_argument("--grid", type=int, default=int(_env("GRID", "120")), help="points per axis")
    r.add_argument("--upper", type=float, default=1.2)
    r.add_argument("--fixed", type=float, default=0.1, help="target of the last slot")
    r.add_argument("--points", action="store_true", help="also write every grid verdict")

    c = sub.add_parser("cells", parents=[common], help="max permitted SINR versus cell count")
    c.add_argument("--min-cells", type=int, default=2)
    c.add_argument("--max-cells", type=int, default=6)

    a = sub.add_parser("antennas", parents=[common], help="SINR of one user versus antennas")
    a.add_argument("--user", default=None, help="CELL,SLOT (1-based)")
    a.add_argument("--inflation", choices=POLICIES, default=None)

    v = sub.add_parser("validate", parents=[common], help="closed form versus Monte-Carlo")
    v.add_argument("--trials", type=int, default=int(_env("TRIALS", "100000")))
    v.add_argument("--nt", default="8,64", help="comma-separated antenna counts")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--inflation", choices=POLICIES, default=None)

    f = sub.add_parser("verify", parents=[common], help="check a pilot-book file")
    f.add_argument("book", help="pilot-book text file")
    return p


# --- helpers -----------------------------------------------------------------

def _load(args) -> Experiment:
    if not args.config:
        raise ConfigError("--config is required")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return load_experiment(text)


def _header(args, exp: Experiment, designs) -> list[str]:
    lines = [f"# designs={','.join(designs)} seed={args.seed} config={exp.config.digest()}"]
    if args.timestamp:
        lines.append(f"# created={_dt.datetime.now(_dt.timezone.utc).isoformat()}")
    return lines


def _write_csv(path: Path, header: list[str], columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _option(args, exp: Experiment, name: str, default):
    val = getattr(args, name, None)
    if val is None:
        val = exp.options.get(name, default)
    return val


def _design_targets(exp: Experiment, policy: str) -> SinrTargets:
    if exp.targets is None:
        raise ConfigError("config has no targets")
    t, cfg = exp.targets, exp.config
    if t.inflated is None:
        return inflate_targets(t, cfg, policy)
    if exp.options.get("project_inflated", False):
        return snap_inflated(t, cfg)
    return t


def _book(cfg: NetworkConfig, design: str, exp: Experiment, args, targets=None):
    """Pilot book and downlink power for ``design``.

    GWBE uses its own power rule.  Baselines use the same rule
    ``P = delta * eb(gamma_hat)`` with their own ``delta``.
    """
    if design == "GWBE":
        rep = gwbe_design(targets, cfg)
        return rep.pilot_book, rep.power, rep
    if design == "WBE":
        book = wbe_design(cfg, _option(args, exp, "wbe_mode", "per_cell"))
    else:
        book = fos_design(cfg, exp.options.get("fos_grouping", "round_robin"))[0]
    pc = uplink_power_control(cfg)
    if targets is None:
        return book, pc, None
    d = delta_vector(book, pc, cfg).delta
    return book, pc.with_downlink(d * effective_bandwidth(targets.effective)), None


# --- subcommands -------------------------------------------------------------

def cmd_design(args) -> int:
    exp = _load(args)
    cfg = exp.config
    out = Path(args.out)
    t = _design_targets(exp, _option(args, exp, "inflation", "uniform"))
    for d in args.designs:
        book, power, rep = _book(cfg, d, exp, args, t)
        head = _header(args, exp, [d])
        (out / f"book_{d}.txt").parent.mkdir(parents=True, exist_ok=True)
        (out / f"book_{d}.txt").write_text("\n".join(head) + "\n" + book.to_text())
        delta = delta_vector(book, power, cfg).delta
        rows = []
        for u in cfg.users():
            i = u.index
            rows.append((u.cell, u.slot, t.gamma[i], t.effective[i],
                         float(effective_bandwidth(t.effective[i])), delta[i], power.P[i],
                         "" if rep is None else rep.prenorm_norms[i]))
        _write_csv(out / f"design_{d}.csv", head,
                   ("cell", "slot", "gamma", "gamma_hat", "z_hat", "delta", "P", "prenorm_norm"), rows)
        if rep is not None:
            res = rep.cell_gram_residuals()
            _write_csv(out / f"design_{d}_cells.csv", head,
                       ("cell", "B", "rotations", "gram_residual"),
                       [(l + 1, rep.per_cell_B[l], rep.rotations[l], res[l]) for l in range(cfg.L)])
            print(f"{d}: network Gram residual {rep.network_gram_residual():.3e}")
        print(f"{d}: wrote {out / f'book_{d}.txt'}")
    return EXIT_OK


def cmd_region(args) -> int:
    exp = _load(args)
    cfg = exp.config
    out = Path(args.out)
    designs = list(args.designs)
    if "GWBE" not in designs:
        designs.insert(0, "GWBE")
    sw = region_sweep(cfg, n=args.grid, upper=args.upper, fixed=args.fixed, designs=designs,
                      wbe_mode=_option(args, exp, "wbe_mode", "per_cell"),
                      fos_grouping=exp.options.get("fos_grouping", "round_robin"),
                      backend=args.backend)
    head = _header(args, exp, designs)
    head.append(f"# grid={args.grid} upper={fmt(args.upper)} fixed={fmt(args.fixed)}")
    vols, ratios = sw.volumes(), sw.ratios()
    _write_csv(out / "region_summary.csv", head, ("design", "volume", "ratio_vs_gwbe"),
               [(d, vols[d], ratios[d]) for d in designs])
    dims = sw.dims
    prefix = sw.points()[::sw.axis.size, :dims - 1]
    rows = []
    for d in designs:
        top = sw.surface(d)
        rows += [(*p, d, t) for p, t in zip(prefix, top)]
    cols = tuple(f"gamma{i + 1}" for i in range(dims - 1)) + ("design", f"gamma{dims}_max")
    _write_csv(out / "region_surface.csv", head, cols, rows)
    if args.points:
        pts = sw.points()
        cols = tuple(f"gamma{i + 1}" for i in range(dims)) + ("design", "feasible", "spectral_radius")
        _write_csv(out / "region_points.csv", head, cols,
                   ((*p, d, int(f), r) for d in designs
                    for p, f, r in zip(pts, sw.feasible[d], sw.radius[d])))
    for d in designs:
        print(f"{d}: volume {vols[d]:.6g}  GWBE/{d} - 1 = {ratios[d]:.4f}")
    return EXIT_OK


def _symmetric_gains(cfg: NetworkConfig) -> tuple[float, float]:
    own = float(cfg.own_gain[0])
    cross = float(cfg.beta[0, 1]) if cfg.L > 1 else own
    return own, cross


def cmd_cells(args) -> int:
    exp = _load(args)
    cfg = exp.config
    own, cross = _symmetric_gains(cfg)
    pattern = exp.options.get("pattern", (1.0, 1.0, 0.5, 0.5))
    wbe_mode = _option(args, exp, "wbe_mode", "per_cell")
    rows = []
    for L in range(args.min_cells, args.max_cells + 1):
        c = NetworkConfig.symmetric(L, cfg.K, cfg.tau, own, cross, Nt=cfg.Nt,
                                    sigma_w2=cfg.sigma_w2, sigma_n2=cfg.sigma_n2)
        for d in args.designs:
            g = max_permitted_sinr(c, pattern, d, wbe_mode=wbe_mode,
                                   fos_grouping=exp.options.get("fos_grouping", "round_robin"))
            rows.append((L, d, g))
            print(f"L={L} {d}: {g:.6f}")
    _write_csv(Path(args.out) / "cells.csv", _header(args, exp, args.designs),
               ("L", "design", "gamma_max"), rows)
    return EXIT_OK


def first_crossing(book, power, delta, cfg, user: int, target: float, hi: int = 10**7):
    """Smallest integer ``Nt`` with SINR of ``user`` at least ``target`` (``None`` if never)."""
    def phi(n):
        return sinr_finite(book, power, delta, cfg, n).values[user]

    if sinr_asymptotic(book, power, delta, cfg).values[user] < target or phi(hi) < target:
        return None
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if phi(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _interp_crossing(nts, vals, target):
    above = np.flatnonzero(vals >= target)
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(nts[0])
    x0, x1, y0, y1 = nts[i - 1], nts[i], vals[i - 1], vals[i]
    return float(x0 + (target - y0) * (x1 - x0) / (y1 - y0))


def _user(args, exp: Experiment, cfg: NetworkConfig) -> UserId:
    spec = args.user if args.user is not None else exp.options.get("user", [cfg.L, 1])
    if isinstance(spec, str):
        spec = [int(x) for x in spec.split(",")]
    cell, slot = (int(x) for x in spec)
    if not (1 <= cell <= cfg.L and 1 <= slot <= cfg.K):
        raise ConfigError(f"user ({cell},{slot}) outside the network")
    return UserId.from_cell_slot(cell, slot, cfg.K)


def cmd_antennas(args) -> int:
    exp = _load(args)
    cfg = exp.config
    t = _design_targets(exp, _option(args, exp, "inflation", "uniform"))
    uid = _user(args, exp, cfg)
    u = uid.index
    target = float(t.gamma[u])
    rows, summary = [], []
    for d in args.designs:
        book, power, _ = _book(cfg, d, exp, args, t)
        delta = delta_vector(book, power, cfg)
        vals = np.array([sinr_finite(book, power, delta, cfg, n).values[u] for n in NT_GRID])
        asym = sinr_asymptotic(book, power, delta, cfg).values[u]
        rows += [(n, d, v) for n, v in zip(NT_GRID, vals)]
        rows.append(("asymptotic", d, asym))
        ip = _interp_crossing(np.array(NT_GRID, float), vals, target)
        ex = first_crossing(book, power, delta, cfg, u, target)
        summary.append((d, uid.cell, uid.slot, target, asym,
                        "" if ip is None else ip, "" if ex is None else ex))
        print(f"{d}: asymptotic {asym:.6f}, first Nt with SINR >= {target}: {ex}")
    head = _header(args, exp, args.designs)
    head.append(f"# user=({uid.cell},{uid.slot})")
    out = Path(args.out)
    _write_csv(out / "antennas.csv", head, ("Nt", "design", "sinr"), rows)
    _write_csv(out / "antennas_summary.csv", head,
               ("design", "cell", "slot", "target", "asymptotic", "crossing_interp", "crossing_exact"),
               summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    exp = _load(args)
    cfg = exp.config
    t = _design_targets(exp, _option(args, exp, "inflation", "uniform"))
    nts = [int(x) for x in args.nt.split(",") if x.strip()]
    rows = []
    worst = 0.0
    for d in args.designs:
        book, power, _ = _book(cfg, d, exp, args, t)
        delta = delta_vector(book, power, cfg)
        for n in nts:
            cf = sinr_finite(book, power, delta, cfg, n).values
            mc = monte_carlo_sinr(book, power, cfg, n, args.trials, args.seed,
                                  workers=args.workers, backend=args.backend)
            z = (mc.values - cf) / mc.ci_halfwidth
            worst = max(worst, float(np.max(np.abs(z))))
            for uid in cfg.users():
                i = uid.index
                rows.append((d, uid.cell, uid.slot, n, cf[i], mc.values[i], mc.ci_halfwidth[i],
                             z[i], int(abs(z[i]) <= 3.0)))
    head = _header(args, exp, args.designs)
    head.append(f"# trials={args.trials}")
    _write_csv(Path(args.out) / "validate.csv", head,
               ("design", "cell", "slot", "Nt", "sinr_closed_form", "sinr_monte_carlo",
                "ci_halfwidth", "halfwidths_off", "within_3"), rows)
    print(f"largest deviation: {worst:.3f} confidence half-widths")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        text = Path(args.book).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read pilot book: {exc}") from exc
    book = PilotBook.from_text(text, strict=False)
    ok = True

    def report(name, value, passed):
        nonlocal ok
        ok &= bool(passed)
        print(f"{name}: {value} {'PASS' if passed else 'FAIL'}")

    nr = book.norm_residual()
    report("unit-norm residual", f"{nr:.3e}", nr <= 1e-9)
    tr, bound = welch_trace(book)
    report("Welch trace tr(Gram^2) vs K_tot^2/tau", f"{tr:.12g} >= {bound:.12g}", tr >= bound * (1 - 1e-9))
    G = book.gram()
    off = G[~np.eye(book.K_tot, dtype=bool)] ** 2
    if off.size:
        print(f"off-diagonal |rho|^2: min {off.min():.6g} max {off.max():.6g}")
    if book.K > 1:
        mask = ~np.eye(book.K, dtype=bool)
        within = np.concatenate([(book.block(l).T @ book.block(l))[mask] ** 2 for l in range(book.L)])
        print(f"within-cell off-diagonal |rho|^2: min {within.min():.6g} max {within.max():.6g}")
    if args.config:
        exp = _load(args)
        cfg = exp.config
        if (cfg.L, cfg.K, cfg.tau) != (book.L, book.K, book.tau):
            raise DimensionMismatch("book and config disagree on L, K or tau")
        if exp.targets is not None and nr <= 1e-9:
            t = _design_targets(exp, _option(args, exp, "inflation", "uniform")) \
                if book.design == "GWBE" else exp.targets
            if book.design == "GWBE":
                zh = effective_bandwidth(t.effective)
                res = []
                for l, sl in enumerate(book.cell_blocks):
                    Ql = book.Q[:, sl]
                    B = zh[sl].sum() / book.tau
                    res.append(np.max(np.abs((Ql * zh[sl]) @ Ql.T - B * np.eye(book.tau))))
                report("per-cell Gram identity residual", f"{max(res):.3e}", max(res) <= 1e-8)
            v = feasibility_oracle(book, SinrTargets(t.effective, cfg.L, cfg.K), cfg)
            print(f"spectral radius at targets: {v.spectral_radius:.12g} "
                  f"({'feasible' if v.feasible else 'infeasible'})")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "design": cmd_design,
    "region": cmd_region,
    "cells": cmd_cells,
    "antennas": cmd_antennas,
    "validate": cmd_validate,
    "verify": cmd_verify,
}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InfeasibleTargets):
        return EXIT_INFEASIBLE
    if isinstance(exc, GridTooFine):
        return EXIT_USAGE
    if isinstance(exc, (ConfigError, DimensionMismatch, NonPositiveTarget, ParseError)):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_ERROR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except GwbeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
