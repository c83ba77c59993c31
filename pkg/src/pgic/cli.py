"""Command-line front end.

Subcommands::

    pgic check INSTANCE.json [--seed N]
    pgic solve INSTANCE.json [--bits] [--oracle N]
    pgic sweep-ratio [--a-min X] [--a-max X] [--steps N]
    pgic sweep-pbar [--a2 X] [--a1-min X] [--a1-max X] [--steps N]
    pgic regions INSTANCE.json [--resolution N]

Instances are JSON objects ``{"channels": [{"a":..,"b":..,"c":..,"d":..}, ...], "P":.., "Q":..}``.
Tables are written as CSV with 12 significant digits.  Exit status is 0 on
success, 1 for bad input, 2 when the budgets cannot be certified (or the
channel conditions fail) and 3 on an internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .allocator import (
    activity_table,
    enumerate_subregions,
    power_region_boundary,
    single_channel_limit,
    solve_general,
    two_channel_p_bar,
)
from .capacity import nats_to_bits, tin_rate
from .errors import AuditFailure, NotInPowerRegion, NumericalFailure, PgicError
from .genie import bound_audit
from .model import ChannelClass, PgicInstance, SubChannel, classify, coefficient_condition, corner_points
from .oracle import GridSpec, compare, grid_search
from .subdiff import b_boundary_curves, corner_images

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_IN_REGION = 2
EXIT_NUMERICAL = 3

_CHANNEL_KEYS = {"a", "b", "c", "d"}
_TOP_KEYS = {"channels", "P", "Q"}


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".12g")


def _write_rows(out, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def load_instance(path: str) -> PgicInstance:
    """Parse an instance file; any schema problem raises :class:`InputError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("instance must be a JSON object")
    keys = set(raw)
    if keys != _TOP_KEYS:
        extra, missing = sorted(keys - _TOP_KEYS), sorted(_TOP_KEYS - keys)
        raise InputError(f"instance keys: unknown {extra}, missing {missing}")
    if not isinstance(raw["channels"], list):
        raise InputError('"channels" must be a list')
    chans = []
    for i, row in enumerate(raw["channels"]):
        if not isinstance(row, dict) or set(row) != _CHANNEL_KEYS:
            raise InputError(f"channel {i} must have exactly the keys a, b, c, d")
        try:
            chans.append(SubChannel(row["a"], row["b"], row["c"], row["d"]))
        except PgicError as exc:
            raise InputError(f"channel {i}: {exc}") from exc
    try:
        return PgicInstance(tuple(chans), raw["P"], raw["Q"])
    except PgicError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args, out) -> int:
    inst = load_instance(args.instance)
    lines = [f"sub-channels: {inst.m}", f"budgets: P={_fmt(inst.total_p)} Q={_fmt(inst.total_q)}"]
    conditions = True
    for i, ch in enumerate(inst.channels):
        cls = classify(ch)
        line = f"channel {i}: a={_fmt(ch.a)} b={_fmt(ch.b)} c={_fmt(ch.c)} d={_fmt(ch.d)} class={cls.value}"
        if cls is ChannelClass.TWO_SIDED:
            ok = coefficient_condition(ch)
            conditions &= ok
            line += f" coefficient_condition={'ok' if ok else 'fails'}"
            if ok:
                s, t = corner_points(ch)
                line += f" S=(0,{_fmt(s.q)}) T=({_fmt(t.p)},0)"
        lines.append(line)
    if not conditions:
        lines.append("conditions not met")
        out.write("\n".join(lines) + "\n")
        return EXIT_NOT_IN_REGION
    try:
        alloc = solve_general(inst)
    except NotInPowerRegion as exc:
        lines.append(f"not verified: {exc}")
        out.write("\n".join(lines) + "\n")
        return EXIT_NOT_IN_REGION
    lines.append("in region")
    acts = activity_table(inst, alloc)
    for i, (pp, lab, act) in enumerate(zip(alloc.pairs, alloc.labels, acts)):
        lines.append(f"  channel {i}: p={_fmt(pp.p)} q={_fmt(pp.q)} label={lab.name} activity=({act[0]},{act[1]})")
    k = alloc.certificate
    lines.append(f"certificate: k_p={_fmt(k.k_p)} k_q={_fmt(k.k_q)}")
    lines.append(f"sum rate: {_fmt(alloc.achieved_rate)} nats")
    if args.seed is not None:
        rep = bound_audit(inst, alloc, samples=args.samples, seed=args.seed)
        lines.append(
            f"bound audit: samples={rep.samples} worst_margin={_fmt(rep.worst_margin)} "
            f"concavity={_fmt(rep.concavity_margin)} monotonicity={_fmt(rep.monotonicity_margin)} passed"
        )
    out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_solve(args, out) -> int:
    inst = load_instance(args.instance)
    alloc = solve_general(inst)
    unit = "rate_bits" if args.bits else "rate_nats"
    conv = nats_to_bits if args.bits else (lambda x: x)
    rows = []
    for i, (ch, pp, lab) in enumerate(zip(inst.channels, alloc.pairs, alloc.labels)):
        rows.append([i, pp.p, pp.q, lab.name, alloc.certificate.k_p, alloc.certificate.k_q, conv(tin_rate(ch, pp))])
    rows.append(
        ["total", math.fsum(pp.p for pp in alloc.pairs), math.fsum(pp.q for pp in alloc.pairs), "",
         alloc.certificate.k_p, alloc.certificate.k_q, conv(alloc.achieved_rate)]
    )
    _write_rows(out, ["channel_index", "p_star", "q_star", "region_label", "k_p_star", "k_q_star", unit], rows)
    if args.oracle is not None:
        res = grid_search(inst, GridSpec(args.oracle))
        rep = compare(alloc, res)
        out.write("\n")
        orows = [[i, pp.p, pp.q, conv(tin_rate(ch, pp))] for i, (ch, pp) in enumerate(zip(inst.channels, res.pairs))]
        orows.append(["total", inst.total_p, inst.total_q, conv(res.rate)])
        _write_rows(out, ["channel_index", "p_oracle", "q_oracle", unit], orows)
        out.write("\n")
        _write_rows(
            out,
            ["metric", "value"],
            [
                ["steps_per_axis", res.steps],
                ["rate_gap", conv(rep.rate_gap)],
                ["delta", conv(rep.delta)],
                ["distance", rep.distance],
                ["distance_cells", rep.distance_cells],
                ["within_bound", "yes" if rep.ok else "no"],
            ],
        )
    return EXIT_OK


def _grid(lo: float, hi: float, steps: int) -> np.ndarray:
    return np.linspace(lo, hi, steps)


def ratio_rows(a_values: Sequence[float], c: float = 1.0, diagonal: bool = False) -> List[list]:
    """Rows ``(a1, a2, p_bar, s1_plus_s2, ratio)`` over a grid of cross gains."""
    rows = []
    for a1 in a_values:
        for a2 in a_values:
            if diagonal and a1 != a2:
                continue
            pb = two_channel_p_bar(a1, a2, c)
            s = single_channel_limit(SubChannel(a1, a1, c, c)) + single_channel_limit(SubChannel(a2, a2, c, c))
            rows.append([a1, a2, pb, s, pb / s])
    return rows


def pbar_rows(a2: float, a1_values: Sequence[float], c: float = 1.0) -> List[list]:
    return [[a1, two_channel_p_bar(a1, a2, c)] for a1 in a1_values]


def cmd_sweep_ratio(args, out) -> int:
    if not (0 < args.a_min <= args.a_max < 0.25):
        raise InputError("need 0 < a_min <= a_max < 0.25")
    if args.steps < 1:
        raise InputError("steps must be at least 1")
    grid = _grid(args.a_min, args.a_max, args.steps)
    _write_rows(out, ["a1", "a2", "p_bar", "s1_plus_s2", "ratio"], ratio_rows(grid, diagonal=args.diagonal))
    return EXIT_OK


def cmd_sweep_pbar(args, out) -> int:
    if not (0 < args.a2 < 0.25):
        raise InputError("need 0 < a2 < 0.25")
    if args.steps < 1:
        raise InputError("steps must be at least 1")
    if args.a1_min is None:
        grid = args.a1_max * np.arange(1, args.steps + 1) / args.steps
    else:
        grid = _grid(args.a1_min, args.a1_max, args.steps)
    if not (grid[0] > 0 and grid[-1] <= 0.25):
        raise InputError("a1 range must lie in (0, 0.25]")
    _write_rows(out, ["a1", "p_bar"], pbar_rows(args.a2, grid))
    return EXIT_OK


def cmd_regions(args, out) -> int:
    inst = load_instance(args.instance)
    for i, ch in enumerate(inst.channels):
        if classify(ch) is not ChannelClass.TWO_SIDED:
            raise InputError(f"channel {i} is not two-sided")
        if not coefficient_condition(ch):
            raise NotInPowerRegion(f"conditions not met: sub-channel {i} fails the coefficient condition")
    rows = []
    for i, ch in enumerate(inst.channels):
        for name, kk in corner_images(ch).items():
            rows.append(["corner", i, 0, kk[0], kk[1], name + "'", ""])
        for name, curve in b_boundary_curves(ch, args.resolution).items():
            for j, (x, y) in enumerate(curve):
                rows.append(["b_curve", i, j, x, y, name, ""])
    for j, (P, Q) in enumerate(power_region_boundary(inst, args.resolution)):
        rows.append(["power_boundary", "", j, P, Q, "", ""])
    subs = enumerate_subregions(inst, max(40, args.resolution // 2))
    for j, labels in enumerate(sorted(subs, key=lambda t: tuple(l.value for l in t))):
        info = subs[labels]
        tag = "&".join(f"B{i + 1}^({lab.value})" for i, lab in enumerate(labels))
        P, Q = info["power"]
        if P == 0 and Q == 0:
            act = "".join("(0,0)" for _ in labels)
        else:
            alloc = solve_general(PgicInstance(inst.channels, P, Q))
            act = "".join(f"({u},{v})" for u, v in activity_table(inst, alloc))
        rows.append(["subregion_price", "", j, info["k"][0], info["k"][1], tag, act])
        rows.append(["subregion_power", "", j, P, Q, tag, act])
    _write_rows(out, ["kind", "channel", "index", "x", "y", "label", "activity"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgic", description="Sum-rate optimal power allocation for parallel Gaussian interference channels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="FILE", help="write output to FILE instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="validate an instance and report power-region membership")
    p.add_argument("instance")
    p.add_argument("--seed", type=int, help="also run the genie bound audit with this seed")
    p.add_argument("--samples", type=int, default=1000, help="audit sample count (default: %(default)s)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", parents=[common], help="optimal allocation as CSV")
    p.add_argument("instance")
    p.add_argument("--bits", action="store_true", help="report rates in bits instead of nats")
    p.add_argument("--oracle", type=int, metavar="N", help="append a grid-oracle comparison with N steps per axis")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-ratio", parents=[common], help="p_bar / (S1 + S2) over a grid of cross gains (c = d = 1)")
    p.add_argument("--a-min", type=float, default=0.01)
    p.add_argument("--a-max", type=float, default=0.24)
    p.add_argument("--steps", "--resolution", type=int, default=200, dest="steps")
    p.add_argument("--diagonal", action="store_true", help="only emit a1 = a2")
    p.set_defaults(func=cmd_sweep_ratio)

    p = sub.add_parser("sweep-pbar", parents=[common], help="p_bar as a function of a1 with a2 fixed (c = d = 1)")
    p.add_argument("--a2", type=float, default=0.125)
    p.add_argument("--a1-min", type=float, default=None, help="default: a1_max / steps")
    p.add_argument("--a1-max", type=float, default=0.25)
    p.add_argument("--steps", "--resolution", type=int, default=200, dest="steps")
    p.set_defaults(func=cmd_sweep_pbar)

    p = sub.add_parser("regions", parents=[common], help="price-set curves, power-region boundary and activity table")
    p.add_argument("instance")
    p.add_argument("--resolution", type=int, default=400)
    p.set_defaults(func=cmd_regions)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotInPowerRegion as exc:
        print(f"not in the noisy-interference power region: {exc}", file=sys.stderr)
        print("the sum-rate capacity is not established for these budgets; no allocation reported", file=sys.stderr)
        return EXIT_NOT_IN_REGION
    except (NumericalFailure, AuditFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PgicError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code
