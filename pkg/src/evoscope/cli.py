"""Command-line workflows: ``evoscope <command> [--config ...]``.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or configuration
error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import exponents, generator, norms, semigroup
from .catalog import CATALOG, check_entry
from .config import AnalysisConfig, build_family, build_grid, parse_config, with_overrides
from .errors import ConfigError, EvoscopeError
from .grid import fmt, write_csv
from .witnesses import random_bumps, triangle_bump

log = logging.getLogger("evoscope")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("exponents", "admissible", "phi", "weight", "semigroup", "resolvent", "certify",
            "quasineg", "reproduce-paper")
SHIFTS = (0.32, 0.16, 0.08, 0.04, 0.02, 0.01)


class Run:
    """Config, family, grid and output directory for one command."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self.family = build_family(cfg)
        self.grid = build_grid(cfg)
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.failures: list[str] = []

    @property
    def adm_kw(self):
        return {"threshold": self.cfg.theta, "tol_growth": self.cfg.tol_growth}

    def alphas(self, default=(0.0,)):
        return list(self.cfg.alpha) or list(default)

    def bumps(self):
        return random_bumps(self.grid, self.family.dim, self.cfg.n_bumps, self.cfg.seed)

    def write_text(self, name, text):
        (self.out / name).write_text(text, encoding="utf-8", newline="\n")

    def fail(self, msg):
        self.failures.append(msg)


def _show(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return v if isinstance(v, str) else fmt(v)


def _kv(pairs) -> str:
    return "".join(f"{k} = {v if isinstance(v, str) else fmt(v)}\n" for k, v in pairs)


# --- commands ----------------------------------------------------------------


def cmd_exponents(run: Run):
    rep = exponents.classify(run.family, run.grid, run.cfg.bracket, run.cfg.tol,
                             alphas=run.cfg.alpha, **run.adm_kw)
    run.write_text("exponents.txt", rep.as_text())
    write_csv(run.out / "alpha_tested.csv", ["alpha", "admissible", "strict"], rep.rows())


def cmd_admissible(run: Run):
    rows = []
    for a in run.alphas():
        adm = exponents.is_admissible(run.family, a, run.grid, **run.adm_kw)
        strict = exponents.is_strict(run.family, a, run.grid, **run.adm_kw) if adm else False
        rows.append((a, str(adm.admissible).lower(), adm.growth, str(strict).lower()))
    write_csv(run.out / "admissible.csv", ["alpha", "admissible", "log_growth", "strict"], rows)
    if run.cfg.bracket is not None:
        a = exponents.inf_admissible(run.family, run.grid, run.cfg.bracket, run.cfg.tol, **run.adm_kw)
        run.write_text("inf_admissible.txt", _kv([("bracket_lo", run.cfg.bracket[0]),
                                                  ("bracket_hi", run.cfg.bracket[1]),
                                                  ("inf_A", a)]))


def cmd_phi(run: Run):
    bumps = run.bumps()
    for a in run.alphas():
        prof = norms.phi_profile(run.family, a, bumps[0])
        prof.to_csv(run.out / f"phi_alpha={fmt(a)}.csv", bumps[0])
        worst_s = max(norms.sandwich_check(run.family, a, b) for b in bumps)
        worst_m = max(norms.monotonicity_check(run.family, a, a + 0.5, b) for b in bumps)
        if worst_s > 1e-12:
            run.fail(f"sandwich violated at alpha={fmt(a)}: {fmt(worst_s)}")
        if worst_m > 1e-12:
            run.fail(f"monotonicity violated at alpha={fmt(a)}: {fmt(worst_m)}")
        run.write_text(f"phi_alpha={fmt(a)}.txt", _kv([
            ("alpha", a), ("norm", prof.norm), ("argmax_t", prof.argmax_t),
            ("sandwich_excess", worst_s), ("monotonicity_excess", worst_m)]))


def cmd_weight(run: Run):
    for a in run.alphas():
        norms.weight_profile(run.family, a, run.grid).to_csv(run.out / f"weight_alpha={fmt(a)}.csv")


def cmd_semigroup(run: Run):
    fam, grid = run.family, run.grid
    bumps = run.bumps()
    for a in run.alphas():
        law = max(semigroup.semigroup_law_residual(fam, a, 0.5, 1.0, b) for b in bumps)
        growth = min(semigroup.growth_bound_check(fam, a, 1.0, b)
                     / max(1.0, norms.admissible_norm(fam, a, b)) for b in bumps)
        tri = triangle_bump(grid, grid.T_max / 4, grid.T_max / 8, np.eye(fam.dim)[0])
        shifts = [s for s in SHIFTS if s >= grid.h - 1e-12]
        cont = semigroup.strong_continuity_probe(fam, a, tri, shifts)
        write_csv(run.out / f"strong_continuity_alpha={fmt(a)}.csv", ["t", "residual"], cont)
        semigroup.transport(fam, a, 1.0, bumps[0]).to_csv(
            run.out / f"semigroup_alpha={fmt(a)}.csv", index_label="s")
        decreasing = all(x[1] > y[1] for x, y in zip(cont, cont[1:]))
        if law > 1e-9:
            run.fail(f"semigroup law residual {fmt(law)} at alpha={fmt(a)}")
        if growth < -1e-9:
            run.fail(f"growth bound violated by {fmt(-growth)} at alpha={fmt(a)}")
        if not decreasing:
            run.fail(f"strong continuity residuals not decreasing at alpha={fmt(a)}")
        run.write_text(f"semigroup_alpha={fmt(a)}.txt", _kv([
            ("alpha", a), ("law_residual", law), ("growth_margin", growth),
            ("continuity_decreasing", str(decreasing).lower())]))


def _resolvent(run: Run, alpha):
    return generator.estimate_resolvent_norm(run.family, alpha, run.grid, n_bumps=run.cfg.n_bumps,
                                             seed=run.cfg.seed)


def cmd_resolvent(run: Run):
    for a in run.alphas():
        est = _resolvent(run, a)
        run.write_text(f"resolvent_alpha={fmt(a)}.txt", est.as_text())
        write_csv(run.out / f"resolvent_ratios_alpha={fmt(a)}.csv", ["index", "ratio"],
                  list(enumerate(est.ratio_history)))


def cmd_certify(run: Run):
    for a in run.alphas():
        est = _resolvent(run, a)
        v = generator.certify_stability(run.family, a, est, run.cfg.delta, run.grid,
                                        c_safety=run.cfg.c_safety)
        best = generator.certify_best(run.family, a, est, run.grid, c_safety=run.cfg.c_safety)
        text = v.as_text() + _kv([("c_estimate", est.c), ("best_delta", best.delta), ("best_rate", best.rate),
                                  ("uniform_bound_ok", str(v.uniform_bound_ok).lower())]
                                 + [(f"power_bound_k{k}_ok", str(ok).lower()) for k, ok in v.power_bounds_ok.items()])
        run.write_text(f"certify_alpha={fmt(a)}.txt", text)
        if v.samples is not None:
            write_csv(run.out / f"certify_alpha={fmt(a)}.csv", ["t", "s", "measured", "predicted"],
                      v.samples)
        if not v.certified:
            run.fail(f"alpha={fmt(a)} not certified: {v.reason}")


def cmd_quasineg(run: Run):
    for a in run.alphas():
        rep = norms.quasi_negativity_test(run.family, a, run.cfg.nu, run.grid, run.cfg.n_dirs,
                                          run.cfg.seed, run.cfg.tol_growth)
        run.write_text(f"quasineg_alpha={fmt(a)}.txt", rep.as_text())


def cmd_reproduce(run: Run, names):
    lines = []
    for name in names:
        for r in check_entry(name):
            status = "PASS" if r.passed else "FAIL"
            m = r.error or _show(r.measured)
            lines.append(f"{status} {name} {r.fact.fact_id} measured={m} "
                         f"expected={_show(r.fact.expected)} tol={fmt(r.fact.tol)}")
            if not r.passed:
                run.fail(f"{r.fact.fact_id}: measured {m}")
    run.write_text("reproduce.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))


HANDLERS = {
    "exponents": cmd_exponents, "admissible": cmd_admissible, "phi": cmd_phi,
    "weight": cmd_weight, "semigroup": cmd_semigroup, "resolvent": cmd_resolvent,
    "certify": cmd_certify, "quasineg": cmd_quasineg,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evoscope", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--family", choices=sorted(CATALOG) + ["rescaled"], help="family kind (overrides config)")
    p.add_argument("--alpha", type=float, action="append", help="growth rate; repeatable")
    p.add_argument("--seed", type=lambda v: int(v, 0), help="seed for probes and bumps (u64)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg = with_overrides(cfg, family=args.family, out=args.out, alpha=args.alpha, seed=args.seed)
        run = Run(cfg)
    except (ConfigError, OSError) as exc:
        print(f"evoscope: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "reproduce-paper":
            explicit = args.family or (args.config and "family.kind" in text)
            cmd_reproduce(run, [cfg.family.kind] if explicit else list(CATALOG))
        else:
            HANDLERS[args.command](run)
    except EvoscopeError as exc:
        print(f"evoscope {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"evoscope {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if run.failures:
        for f in run.failures:
            print(f"FAIL {f}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
