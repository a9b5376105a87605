"""Command-line front end.

Subcommands ``power``, ``size``, ``table``, ``curve`` and ``verify``. Exit
codes: 0 ok, 1 verification failure, 2 invalid input, 3 infeasible or
degenerate design.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import verify as verify_mod
from .correlation import CorrelationStructure
from .design import (SHARES_DEFAULT_PI_Z, DesignFile, cell_plan, load_design, named_design,
                     summarize)
from .effects import TABLE_ROWS, Estimand, Model
from .errors import DegenerateDesignError, InfeasibleError, SplitPlotError, ValidationError
from .power import (SolveFor, detectable_delta, power_for, required_cell_size,
                    required_cluster_multiplier)
from .variance import EffectQuery, effect_variance

EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3

TABLE_COLUMNS = ("model", "estimand", "scenario", "required_m", "power_at_m",
                 "power_at_m_minus_1")
CURVE_COLUMNS = ("sweep_value", "model", "estimand", "variance", "power")
NO_CORRECTION_NOTE = "note: normal quantiles, no small-sample correction applied"
DEFAULT_SCENARIOS = ("exchangeable=0.2,0.2", "block-exchangeable=0.24,0.192")
CURVE_ROWS = TABLE_ROWS[:3] + ((Model.WITH_INTERACTION, Estimand.CLUSTER_MARGINAL),) + TABLE_ROWS[3:]


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Resolved:
    """Design, cell sizes, pi_z and correlation after merging file and flags."""

    design: object
    sizes: object
    pi_z: float
    pi_z_defaulted: bool
    corr: CorrelationStructure
    source: str

    @property
    def is_shares(self):
        return self.design.name == "shares"


def _fmt(x):
    if x is None:
        return "unset"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


def _resolve(args, need_sizes=True) -> Resolved:
    if args.design is None:
        raise ValidationError("--design is required (a named design or a design file)")
    fdoc = None
    if args.design.endswith(".json"):
        if args.periods is not None or args.clusters is not None:
            raise ValidationError("--periods/--clusters cannot be combined with a design file")
        fdoc: DesignFile = load_design(args.design)
        d = fdoc.design
        source = f"file {args.design}"
    else:
        d = named_design(args.design, args.periods,
                         1 if args.clusters is None else args.clusters)
        source = f"named {args.design}"

    sizes = None
    if args.m is not None:
        sizes = args.m
    elif fdoc is not None and fdoc.cell_sizes is not None:
        sizes = fdoc.cell_sizes
    if need_sizes and sizes is None:
        raise ValidationError("cell size needed: pass --m or give cell_size in the design file")

    defaulted = False
    if args.pi_z is not None:
        pi_z = args.pi_z
    elif fdoc is not None and fdoc.pi_z is not None:
        pi_z = fdoc.pi_z
    else:
        pi_z, defaulted = SHARES_DEFAULT_PI_Z, True

    fc = fdoc.correlation if fdoc is not None else None
    sigma2 = args.sigma2 if args.sigma2 is not None else (fc.sigma2_total if fc else 1.0)
    wpicc = args.wpicc if args.wpicc is not None else (fc.wpicc if fc else None)
    bpicc = args.bpicc if args.bpicc is not None else (fc.bpicc if fc else None)
    if wpicc is None:
        raise ValidationError("--wpicc is required (or a correlation block in the design file)")
    if bpicc is None:
        bpicc = wpicc
    corr = CorrelationStructure(sigma2, wpicc, bpicc)
    return Resolved(d, sizes, float(pi_z), defaulted, corr, source)


def _echo(out, r: Resolved, args, extra=()):
    d = r.design
    s = summarize(d)
    print(f"design: {d.name or 'custom'} ({r.source}); clusters={d.n_clusters} "
          f"periods={d.periods} sequences={d.n_sequences} pi_x={_fmt(s.pi_x)}", file=out)
    if r.sizes is not None:
        if np.ndim(r.sizes) == 0:
            print(f"cell size m: {r.sizes}", file=out)
        else:
            print("cell sizes: " + "; ".join(" ".join(str(int(v)) for v in row)
                                             for row in np.asarray(r.sizes)), file=out)
    print(f"pi_z: {_pi_z_text(r)}", file=out)
    print(f"sigma2: {_fmt(r.corr.sigma2_total)}  wpicc: {_fmt(r.corr.wpicc)}  "
          f"bpicc: {_fmt(r.corr.bpicc)}", file=out)
    for k, v in extra:
        print(f"{k}: {_fmt(v)}", file=out)


def cmd_power(args, out):
    r = _resolve(args)
    q = EffectQuery(args.effect, args.model)
    plan = cell_plan(r.design, r.sizes, r.pi_z)
    res = effect_variance(r.design, plan, r.corr, q)
    _echo(out, r, args, [("model", q.model.value), ("effect", q.estimand.value),
                         ("delta", args.delta), ("alpha", args.alpha)])
    print(f"formula_id: {res.formula_id}", file=out)
    print(f"variance: {_fmt(res.value)}", file=out)
    print(f"  base (V_LCRT or whole variance): {_fmt(res.v_lcrt_part)}", file=out)
    print(f"  inflation: {_fmt(res.inflation_part)}", file=out)
    if args.delta is not None:
        print(f"power: {power_for(res.value, args.delta, args.alpha):.6f}", file=out)
    else:
        print(f"detectable delta at power {_fmt(args.power)}: "
              f"{_fmt(detectable_delta(res.value, args.alpha, args.power))}", file=out)
    print(NO_CORRECTION_NOTE, file=out)
    return EXIT_OK


def cmd_size(args, out):
    solve = SolveFor(args.solve_for)
    if args.delta is None:
        raise ValidationError("--delta is required for size")
    r = _resolve(args, need_sizes=solve is SolveFor.CLUSTER_MULTIPLIER)
    q = EffectQuery(args.effect, args.model)
    _echo(out, r, args, [("model", q.model.value), ("effect", q.estimand.value),
                         ("delta", args.delta), ("alpha", args.alpha),
                         ("target power", args.power), ("solve for", solve.value)])
    if solve is SolveFor.CELL_SIZE:
        res = required_cell_size(r.design, r.corr, r.pi_z, q, args.delta, args.alpha,
                                 args.power)
        label = "required m"
    elif solve is SolveFor.CLUSTER_MULTIPLIER:
        res = required_cluster_multiplier(r.design, r.sizes, r.corr, r.pi_z, q, args.delta,
                                          args.alpha, args.power)
        label = "required cluster multiplier"
    else:
        raise ValidationError(f"size cannot solve for {solve.value}; use power")
    print(f"{label}: {res.value}", file=out)
    print(f"power at {res.value}: {res.power:.6f}", file=out)
    below = "n/a" if math.isnan(res.power_below) else f"{res.power_below:.6f}"
    print(f"power at {res.value - 1}: {below}", file=out)
    print(f"variance at answer: {_fmt(res.variance)}", file=out)
    print(NO_CORRECTION_NOTE, file=out)
    return EXIT_OK


def _parse_scenario(text):
    if "=" not in text:
        raise ValidationError(f"scenario must look like name=wpicc[,bpicc], got {text!r}")
    name, vals = text.split("=", 1)
    try:
        nums = [float(v) for v in vals.split(",")]
    except ValueError:
        raise ValidationError(f"bad scenario values in {text!r}") from None
    if len(nums) not in (1, 2) or not name:
        raise ValidationError(f"scenario must look like name=wpicc[,bpicc], got {text!r}")
    return name, (nums[0], nums[-1])


def cmd_table(args, out):
    if args.delta is None:
        raise ValidationError("--delta is required for table")
    if args.design is None:
        args.design = "shares"
    scenarios = dict(_parse_scenario(s) for s in (args.scenario or DEFAULT_SCENARIOS))
    args.wpicc = args.wpicc if args.wpicc is not None else 0.0
    r = _resolve(args, need_sizes=False)
    rows = []
    for name, (wp, bp) in scenarios.items():
        corr = CorrelationStructure(r.corr.sigma2_total, wp, bp)
        for mdl, e in TABLE_ROWS:
            res = required_cell_size(r.design, corr, r.pi_z, EffectQuery(e, mdl), args.delta,
                                     args.alpha, args.power)
            rows.append((mdl.value, e.value, name, res.value, _fmt(res.power),
                         _fmt(res.power_below)))
    _emit(args, out, _table_header(r, args, scenarios), TABLE_COLUMNS, rows)
    return EXIT_OK


def _pi_z_text(r):
    text = _fmt(r.pi_z)
    if r.pi_z_defaulted:
        text += " (default)"
        if r.is_shares:
            text += " [assumed: not stated for SharES]"
    return text


def _table_header(r, args, scenarios):
    return [f"design={r.design.name or 'custom'} clusters={r.design.n_clusters} "
            f"periods={r.design.periods} pi_z={_pi_z_text(r)}",
            f"delta={_fmt(args.delta)} alpha={_fmt(args.alpha)} power={_fmt(args.power)} "
            f"sigma2={_fmt(r.corr.sigma2_total)} scenarios="
            + ";".join(f"{k}:{_fmt(v[0])},{_fmt(v[1])}" for k, v in scenarios.items()),
            NO_CORRECTION_NOTE]


def _emit(args, out, header, columns, rows):
    """Comment header plus CSV to stdout, or header to stdout and bare CSV to ``--out``."""
    for line in header:
        print(f"# {line}", file=out)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            w.writerows(rows)
        print(f"# wrote {len(rows)} rows to {args.out}", file=out)
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _sweep_values(lo, hi, step, integer):
    if step is None or step <= 0:
        raise ValidationError("--step must be positive")
    if lo is None or hi is None:
        raise ValidationError("--from and --to are required")
    if hi < lo:
        raise ValidationError(f"empty sweep range: from {lo} to {hi}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    vals = [lo + k * step for k in range(count)]
    if integer:
        if any(abs(v - round(v)) > 1e-9 for v in vals):
            raise ValidationError("cell-size sweep needs integer from/step")
        vals = [int(round(v)) for v in vals]
    else:
        vals = [round(v, 12) for v in vals]
    if not vals:
        raise ValidationError("empty sweep range")
    return vals


def cmd_curve(args, out):
    if args.sweep not in ("m", "wpicc"):
        raise ValidationError("--sweep must be m or wpicc")
    integer = args.sweep == "m"
    values = _sweep_values(args.from_, args.to, args.step, integer)
    if not integer and args.wpicc is None:
        args.wpicc = values[0]
    r = _resolve(args, need_sizes=not integer)
    rows = []
    for v in values:
        if integer:
            sizes, corr = v, r.corr
        else:
            bp = args.ratio * v
            corr = CorrelationStructure(r.corr.sigma2_total, v, bp)
            sizes = r.sizes
        plan = cell_plan(r.design, sizes, r.pi_z)
        for mdl, e in CURVE_ROWS:
            var = effect_variance(r.design, plan, corr, EffectQuery(e, mdl)).value
            pw = power_for(var, args.delta, args.alpha) if args.delta is not None else math.nan
            rows.append((_fmt(v) if not integer else v, mdl.value, e.value, _fmt(var), _fmt(pw)))
    fixed = (f"bpicc/wpicc={_fmt(args.ratio)} m={r.sizes}" if not integer else
             f"wpicc={_fmt(r.corr.wpicc)} bpicc={_fmt(r.corr.bpicc)}")
    header = [f"design={r.design.name or 'custom'} clusters={r.design.n_clusters} "
              f"periods={r.design.periods} pi_z={_pi_z_text(r)}",
              f"sweep={args.sweep} from={_fmt(args.from_)} to={_fmt(args.to)} "
              f"step={_fmt(args.step)} {fixed} sigma2={_fmt(r.corr.sigma2_total)} "
              f"delta={_fmt(args.delta)} alpha={_fmt(args.alpha)}",
              NO_CORRECTION_NOTE]
    _emit(args, out, header, CURVE_COLUMNS, rows)
    return EXIT_OK


def cmd_verify(args, out):
    print(f"seed: {args.seed}  replicates: {args.replicates}  sweep: {args.sweep_size}",
          file=out)
    report = verify_mod.run_verification(args.seed, args.replicates, args.sweep_size)
    out.write(report.text())
    return EXIT_OK if report.passed else EXIT_VERIFY


def _add_common(p, design_default=None):
    p.add_argument("--design", default=design_default,
                   help="named design (sw:T, parallel:T, crossover:T, shares) or JSON file")
    p.add_argument("--periods", type=int)
    p.add_argument("--clusters", type=int, help="clusters per sequence for named designs")
    p.add_argument("--m", type=int, help="common cell size")
    p.add_argument("--pi-z", dest="pi_z", type=float,
                   help=f"individual-level allocation (default {SHARES_DEFAULT_PI_Z})")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--wpicc", type=float, help="within-period ICC")
    p.add_argument("--bpicc", type=float, help="between-period ICC (default: wpicc)")
    p.add_argument("--model", default=Model.WITH_INTERACTION.value,
                   choices=[m.value for m in Model])
    p.add_argument("--effect", default=Estimand.CLUSTER.value,
                   choices=[e.value for e in Estimand])
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--power", type=float, default=0.8, help="target power")
    p.add_argument("--out", help="write CSV here instead of stdout")


def build_parser():
    p = _Parser(prog="splitplot", description="Variance, power and sample size for "
                "split-plot factorial longitudinal cluster randomised trials.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    _add_common(sub.add_parser("power", help="variance and power for one estimand"))
    s = sub.add_parser("size", help="minimal cell size or cluster multiplier")
    _add_common(s)
    s.add_argument("--solve-for", dest="solve_for", default=SolveFor.CELL_SIZE.value,
                   choices=[v.value for v in SolveFor])
    t = sub.add_parser("table", help="required cell sizes for all estimands and scenarios")
    _add_common(t)
    t.add_argument("--scenario", action="append",
                   help="name=wpicc[,bpicc]; repeatable (default: the two SharES scenarios)")
    c = sub.add_parser("curve", help="long-format variance/power sweep")
    _add_common(c)
    c.add_argument("--sweep", required=True, choices=["m", "wpicc"])
    c.add_argument("--from", dest="from_", type=float)
    c.add_argument("--to", type=float)
    c.add_argument("--step", type=float, default=1.0)
    c.add_argument("--ratio", type=float, default=0.8,
                   help="bpicc/wpicc held fixed in a wpicc sweep")
    v = sub.add_parser("verify", help="run the oracle and Monte-Carlo checks")
    v.add_argument("--seed", type=int, default=12345)
    v.add_argument("--replicates", type=int, default=2000)
    v.add_argument("--sweep", dest="sweep_size", type=int, default=200)
    return p


COMMANDS = {"power": cmd_power, "size": cmd_size, "table": cmd_table, "curve": cmd_curve,
            "verify": cmd_verify}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    buf = io.StringIO()
    try:
        args = build_parser().parse_args(argv)
        code = COMMANDS[args.command](args, buf)
    except (InfeasibleError, DegenerateDesignError) as exc:
        out.write(buf.getvalue())
        print(f"error: {exc}", file=err)
        return EXIT_INFEASIBLE
    except (ValidationError, ValueError, OSError) as exc:
        out.write(buf.getvalue())
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    except SplitPlotError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
