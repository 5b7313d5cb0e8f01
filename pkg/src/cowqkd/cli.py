"""Command-line front end: single-point queries, scans and Monte Carlo runs.

Parameters are resolved as command-line flags, then a ``key=value`` config
file (``--config``), then the defaults eta=0.1, att=0.25 dB/km, f=0.1,
tB=0.99. Exit codes: 0 on success, 2 for invalid input, 3 when the
requested regime is infeasible (the record is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .bounds import (
    bs_attack,
    bs_optimal_mu,
    r_perfect_visibility,
    r_zero_qber,
    three_state_pns_zero_error,
    three_state_single_photon,
    three_state_wcp,
)
from .curves import CURVES, ScanSpec, evaluate_curve, parse_curves, rate_at_mu, run_scan
from .detection import AttackKind, attack_rates, honest_rates, honest_rates_linear
from .mix import key_rate, optimize_mu, solve_mix
from .montecarlo import SimConfig, Strategy, compare, simulate
from .params import ForwardingModel, InfeasibleRegimeError, InvalidInputError, ProtocolParams
from .states import UsdKind, build_state_set, usd_conclusive_closed_form, usd_conclusive_oracle

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3

DEFAULTS = {
    "mu": 0.1,
    "f": 0.1,
    "f0": None,
    "f1": None,
    "tb": 0.99,
    "eta": 0.1,
    "att": 0.25,
    "length_km": 0.0,
    "transmission": None,
    "forwarding": "photon",
    "seed": 0,
    "windows": 100_000,
    "format": "json",
}

_FLOAT_KEYS = {"mu", "f", "f0", "f1", "tb", "eta", "att", "length_km", "transmission", "q", "v", "start", "stop"}
_INT_KEYS = {"seed", "windows", "steps", "workers", "block_length"}


class UsageError(InvalidInputError):
    pass


def read_config(path: str) -> dict:
    """Parse a ``key=value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_").lower()
            if key in _FLOAT_KEYS:
                value = float(value)
            elif key in _INT_KEYS:
                value = int(value)
            out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command", "func"):
            merged[key] = value
    return merged


def params_from(opts: dict) -> ProtocolParams:
    f0, f1, f = opts.get("f0"), opts.get("f1"), opts["f"]
    empty = f0 is not None or f1 is not None
    if empty:
        f0 = 0.0 if f0 is None else f0
        f = f0 + f1 if f1 is not None else f
    return ProtocolParams(
        mu=opts["mu"],
        f=f,
        tB=opts["tb"],
        eta=opts["eta"],
        alpha_att=opts["att"],
        length_km=opts["length_km"],
        f0=f0 or 0.0,
        empty_decoy=empty,
        transmission=opts.get("transmission"),
    )


def provenance(opts: dict, p: ProtocolParams | None) -> dict:
    prov = {"version": __version__, "command": opts.get("command")}
    if p is not None:
        prov["params"] = p.to_dict()
    for key in ("seed", "forwarding"):
        if key in opts:
            prov[key] = opts[key]
    return prov


# --- output -------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.12g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render(records: list[dict], columns: list[str], fmt: str, prov: dict, extra: dict | None = None) -> str:
    """CSV (provenance as ``#`` comment lines, then a fixed header) or JSON."""
    if fmt == "json":
        body = {"provenance": prov, "records": records}
        if extra:
            body.update(extra)
        return json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    for key in sorted(prov):
        buf.write(f"# {key}: {json.dumps(_jsonable(prov[key]), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(rec.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------------------


def cmd_rates(opts: dict) -> int:
    p = params_from(opts)
    fw = ForwardingModel.parse(opts["forwarding"])
    records = [
        {"model": "honest", **honest_rates(p).to_dict()},
        {"model": "honest_linear", **honest_rates_linear(p).to_dict()},
        {"model": "lossless", **honest_rates(p, 1.0).to_dict()},
    ]
    for kind in AttackKind:
        records.append({"model": kind.value, **attack_rates(kind, p, fw).to_dict()})
    cols = ["model", "d_b_bit", "d_b_decoy", "d_m1_even", "d_m2_even", "d_m1_odd", "d_m2_odd"]
    emit(render(records, cols, opts["format"], provenance(opts, p)), opts.get("out"))
    return EXIT_OK


def cmd_usd(opts: dict) -> int:
    mu = opts["mu"]
    kinds = [UsdKind(opts["kind"].upper())] if opts.get("kind") else list(UsdKind)
    records = []
    for kind in kinds:
        states = build_state_set(kind)
        closed = usd_conclusive_closed_form(kind, mu).conclusive_prob
        oracle = usd_conclusive_oracle(states, mu).conclusive_prob
        records.append({
            "kind": kind.value,
            "mu": mu,
            "target": str(states.target),
            "alternatives": len(states.alternatives),
            "closed_form": closed,
            "gram_oracle": oracle,
            "abs_diff": abs(closed - oracle),
        })
    cols = ["kind", "mu", "target", "alternatives", "closed_form", "gram_oracle", "abs_diff"]
    emit(render(records, cols, opts["format"], provenance(opts, None)), opts.get("out"))
    return EXIT_OK


def cmd_mix(opts: dict) -> int:
    p = params_from(opts)
    mix, coeffs = solve_mix(p)
    rec = {
        "mu": p.mu,
        "t": p.t,
        "feasible": mix.feasible,
        "q0": mix.q0,
        "q1": mix.q1,
        "q2": mix.q2,
        "q3": mix.q3,
        "blocking": mix.blocking,
        "F1": coeffs.F1,
        "F2": coeffs.F2,
        "F3": coeffs.F3,
        "F": coeffs.F,
        "mu_F": p.mu * coeffs.F,
        "key_rate": key_rate(p, mix),
        "notes": "; ".join(mix.notes),
    }
    if opts.get("optimize") and mix.feasible:
        res = optimize_mu(p)
        rec.update(mu_opt=res.mu_opt, r_opt=res.r_opt, mu_max=res.mu_max, i_ae=res.i_ae, flags="; ".join(res.flags))
    cols = list(rec)
    emit(render([rec], cols, opts["format"], provenance(opts, p)), opts.get("out"))
    return EXIT_OK if mix.feasible else EXIT_INFEASIBLE


def cmd_bs(opts: dict) -> int:
    p = params_from(opts)
    at = bs_attack(p)
    rec = {
        "mu": p.mu,
        "t": p.t,
        "overlap": at.overlap,
        "i_usd": at.i_usd,
        "i_me": at.i_me,
        "chi_holevo": at.chi_holevo,
        "rate": at.rate,
    }
    status = EXIT_OK
    try:
        opt = bs_optimal_mu(p)
        rec.update(xi=opt.xi, g_xi=opt.g_xi, mu_opt=opt.mu_opt, rate_opt=opt.rate)
    except InvalidInputError as exc:
        rec.update(xi=math.nan, g_xi=math.nan, mu_opt=math.nan, rate_opt=math.nan, notes=str(exc))
        status = EXIT_INFEASIBLE
    cols = list(rec)
    emit(render([rec], cols, opts["format"], provenance(opts, p)), opts.get("out"))
    return status


def cmd_three_state(opts: dict) -> int:
    p = params_from(opts)
    q, v = opts.get("q", 0.0), opts.get("v", 1.0)
    sp = three_state_single_photon(q, v)
    wcp = three_state_wcp(p, q, v)
    pns = three_state_pns_zero_error(p)
    w = sp.weights
    rec = {
        "q": q,
        "v": v,
        "r": sp.r,
        "r_clamped": sp.clamped,
        "lambda1": w.lambda1,
        "lambda2": w.lambda2,
        "lambda3": w.lambda3,
        "lambda4": w.lambda4,
        "r_v1": r_perfect_visibility(q),
        "r_q0": r_zero_qber(v),
        "mu": p.mu,
        "t": p.t,
        "wcp_delta": wcp.delta,
        "wcp_per_bit": wcp.per_bit,
        "wcp_rate": wcp.rate,
        "pns_mu_opt": pns.mu_opt,
        "pns_rate": pns.rate,
    }
    emit(render([rec], list(rec), opts["format"], provenance(opts, p)), opts.get("out"))
    return EXIT_OK


def cmd_point(opts: dict) -> int:
    p = params_from(opts)
    fw = ForwardingModel.parse(opts["forwarding"])
    records = []
    for name in parse_curves(opts.get("curves") or "MIX"):
        pt = rate_at_mu(name, p, fw) if opts.get("at_mu") else evaluate_curve(name, p, fw)
        records.append({"t": p.t, **pt.to_dict(), "flags": "; ".join(pt.flags)})
    cols = ["curve", "t", "mu_opt", "r", "mu_max", "feasible", "flags"]
    emit(render(records, cols, opts["format"], provenance(opts, p)), opts.get("out"))
    return EXIT_OK if all(r["feasible"] for r in records) else EXIT_INFEASIBLE


def cmd_scan(opts: dict) -> int:
    p = params_from(opts)
    var = opts.get("var", "length_km")
    start = opts.get("start", 0.0)
    stop = opts.get("stop", 250.0)
    spec = ScanSpec(var, start, stop, opts.get("steps", 26), p, parse_curves(opts.get("curves") or ",".join(CURVES)),
                    ForwardingModel.parse(opts["forwarding"]))
    rows = run_scan(spec, workers=opts.get("workers", 1))
    emit(render(rows, spec.columns(), opts["format"], provenance(opts, p)), opts.get("out"))
    return EXIT_OK


def cmd_mc(opts: dict) -> int:
    p = params_from(opts)
    cfg = SimConfig(
        params=p,
        strategy=Strategy.parse(opts.get("strategy", "honest")),
        fw=ForwardingModel.parse(opts["forwarding"]),
        windows=opts["windows"],
        seed=opts["seed"],
        block_length=opts.get("block_length", 1000),
        workers=opts.get("workers", 1),
    )
    stats = simulate(cfg)
    rows = [{"name": r.name, "value": r.value, "analytic": r.analytic, "z": r.z} for r in compare(stats)]
    if opts["format"] == "json":
        body = stats.to_dict()
        body["comparison"] = rows
        body["provenance"].update(provenance(opts, p))
        emit(json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n", opts.get("out"))
    else:
        emit(render(rows, ["name", "value", "analytic", "z"], "csv", provenance(opts, p)), opts.get("out"))
    return EXIT_OK


# --- parser -----------------------------------------------------------------------------


def _common(sub: argparse.ArgumentParser):
    g = sub.add_argument_group("link parameters")
    g.add_argument("--mu", type=float, help="mean photon number of a full pulse")
    g.add_argument("--f", type=float, help="decoy fraction")
    g.add_argument("--f0", type=float, help="empty-decoy fraction (enables empty decoys)")
    g.add_argument("--f1", type=float, help="full-decoy fraction (enables empty decoys; f = f0 + f1)")
    g.add_argument("--tb", type=float, help="data-line fraction of Bob's coupler")
    g.add_argument("--eta", type=float, help="detector efficiency")
    g.add_argument("--att", type=float, help="fibre attenuation in dB/km")
    g.add_argument("--length-km", dest="length_km", type=float, help="distance in km")
    g.add_argument("--transmission", type=float, help="channel transmission (overrides length)")
    g.add_argument("--forwarding", choices=("photon", "bright"), help="what Eve resends")
    o = sub.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--out", help="write to this path instead of stdout")
    o.add_argument("--config", help="key=value file with defaults for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cowqkd", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("rates", help="honest and single-attack detection rates")
    _common(s)
    s.set_defaults(func=cmd_rates)

    s = subs.add_parser("usd", help="conclusive probabilities: closed form vs Gram oracle")
    _common(s)
    s.add_argument("--kind", choices=[k.value.lower() for k in UsdKind] + [k.value for k in UsdKind])
    s.set_defaults(func=cmd_usd)

    s = subs.add_parser("mix", help="attack mixture reproducing all detection rates")
    _common(s)
    s.add_argument("--optimize", action="store_true", default=None, help="also optimise mu")
    s.set_defaults(func=cmd_mix)

    s = subs.add_parser("bs", help="beam-splitting attack and its optimal mu")
    _common(s)
    s.set_defaults(func=cmd_bs)

    s = subs.add_parser("three-state", help="three-state protocol bounds")
    _common(s)
    s.add_argument("--q", type=float, help="QBER")
    s.add_argument("--v", type=float, help="visibility")
    s.set_defaults(func=cmd_three_state)

    s = subs.add_parser("point", help="one evaluation of named curves")
    _common(s)
    s.add_argument("--curves", help=f"comma-separated subset of {','.join(CURVES)}")
    s.add_argument("--at-mu", dest="at_mu", action="store_true", default=None, help="evaluate at --mu instead of optimising")
    s.set_defaults(func=cmd_point)

    s = subs.add_parser("scan", help="curves over a grid of distance, mu or f")
    _common(s)
    s.add_argument("--var", choices=("length_km", "mu", "f"))
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--curves", help=f"comma-separated subset of {','.join(CURVES)}")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_scan)

    s = subs.add_parser("mc", help="Monte Carlo run with comparison against analytic rates")
    _common(s)
    s.add_argument("--strategy", choices=[st.value for st in Strategy])
    s.add_argument("--seed", type=int)
    s.add_argument("--windows", type=int)
    s.add_argument("--block-length", dest="block_length", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = args.func
    try:
        opts = resolve(args)
        opts["command"] = args.command
        return func(opts)
    except InfeasibleRegimeError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidInputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
