"""Command-line entry point: ``zogradient {rates,recovery,bounds,packing,gap}``.

Every option can also come from a flat ``key=value`` config file given with
``--config``; command-line flags win over the file, the file over defaults.
"""
import argparse
import dataclasses
import json
import os
import secrets
import sys

import numpy as np

from . import bounds, harness
from .packing import PackingError, build_packing, min_separation, target_size


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _opt_float(text):
    return None if str(text).lower() in ("", "none") else float(text)


# key -> (parser, default, help)
OPTIONS = {
    "seed": (int, None, "master seed for all randomness (integer; random and printed if omitted)"),
    "out": (str, None, "output file path (none: stdout only)"),
    "format": (str, "csv", "output file format: csv|json"),
    "threads": (int, None, "worker processes; never changes results (default: all cores)"),
    "dims": (_ints, [4], "comma-separated dimensions d"),
    "budgets": (_ints, [160], "comma-separated query budgets T (oracle calls)"),
    "deltas": (_floats, [0.05], "comma-separated hyperplane scales delta, each in (0, 1/4]"),
    "d": (int, 16, "dimension d"),
    "T": (int, 100, "query budget T (oracle calls)"),
    "sigma": (float, 1.0, "oracle noise standard deviation sigma (function units)"),
    "k": (float, 0.0, "third-derivative bound K (function units per length^3)"),
    "h_r": (_opt_float, 1.0, "boundary step h_r; also the domain half-width (length units)"),
    "delta": (float, 0.25, "hyperplane scale delta in (0, 1/4]"),
    "trials": (int, 1000, "Monte Carlo trials per cell (>= 100 for rates)"),
    "policy": (str, "boundary", "step policy: fixed:<h>|chebyshev|gaussian|boundary"),
    "quad": (float, 0.0, "quadratic coefficient c_i of the cubic test function"),
    "lin": (float, 0.0, "linear coefficient c'_i of the cubic test function"),
    "export": (str, None, "write packing vectors as +/-1 CSV rows to this path"),
}

COMMON = ("seed", "out", "format", "threads")
COMMANDS = {
    "rates": ("Monte Carlo FDM error over a (d, T) grid, with log-log rate fits",
              ("dims", "budgets", "sigma", "k", "h_r", "trials", "policy", "quad", "lin")),
    "recovery": ("packing-recovery game with FDM against the Bernoulli oracle",
                 ("dims", "budgets", "deltas", "sigma", "trials")),
    "bounds": ("closed-form rates and bounds for one (d, T, sigma, K, h_r, delta)",
               ("d", "T", "sigma", "k", "h_r", "delta")),
    "packing": ("build and check a sign-vector packing for dimension d",
                ("d", "export")),
    "gap": ("ratio of the tight FDM rate to the minimax lower bound",
            ("dims", "budgets", "sigma", "k", "h_r")),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="zogradient", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, (text, keys) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="flat key=value config file")
        for key in keys + COMMON:
            _, default, helptext = OPTIONS[key]
            if isinstance(default, list):
                default = ",".join(str(v) for v in default)
            p.add_argument(f"--{key}", dest=key, default=None, help=f"{helptext} [default: {default}]")
    return parser


def read_config(path):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip()] = value.strip()
    return values


def resolve(args):
    """Merge defaults < config file < flags for the chosen command."""
    keys = COMMANDS[args.command][1] + COMMON
    raw = {}
    if args.config:
        cfg = read_config(args.config)
        unknown = sorted(set(cfg) - set(keys))
        if unknown:
            raise UsageError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        raw.update(cfg)
    raw.update({k: getattr(args, k) for k in keys if getattr(args, k) is not None})
    conf = {}
    for key in keys:
        parse, default, _ = OPTIONS[key]
        try:
            conf[key] = parse(raw[key]) if key in raw else default
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw[key]!r}") from None
    if "seed" in raw:
        conf["seed_source"] = "given"
    else:
        conf["seed"] = secrets.randbelow(2**31)
        conf["seed_source"] = "random"
    if conf["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {conf['format']!r}")
    if conf["threads"] is None:
        conf["threads"] = os.cpu_count() or 1
    if conf["threads"] < 1:
        raise UsageError("threads must be >= 1")
    return conf


def _meta(command, conf):
    # threads and output location never influence results, so they stay out of files
    skip = {"threads", "out", "export", "seed_source"}
    meta = {"command": command}
    for key, value in conf.items():
        if key not in skip:
            meta[key] = ",".join(str(v) for v in value) if isinstance(value, list) else value
    return meta


def _print_header(meta):
    for key, value in meta.items():
        print(f"# {key}={value}")


def _table(rows, cols):
    cells = [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write(records, conf, meta, record_type):
    if conf["out"]:
        for path in harness.emit_results(records, conf["out"], conf["format"], meta, record_type):
            print(f"wrote {path}")


def cmd_rates(conf, meta):
    grid = harness.ExperimentGrid(
        conf["dims"], conf["budgets"], sigma=conf["sigma"], k=conf["k"], trials=conf["trials"],
        master_seed=conf["seed"], policy=conf["policy"], radius=conf["h_r"] or 1.0,
        quad=conf["quad"], lin=conf["lin"],
    )
    records = harness.run_fdm_grid(grid, n_jobs=conf["threads"])
    print(_table([dataclasses.asdict(r) for r in records], [f.name for f in dataclasses.fields(records[0])]))
    for d in grid.dims:
        rows = [r for r in records if r.d == d]
        if len(rows) >= 3:
            print("fit vs T at d=%d: slope=%.4f intercept=%.4f r2=%.5f" % (d, *harness.fit_rate(rows, "T")))
    for T in grid.budgets:
        rows = [r for r in records if r.T == T]
        if len(rows) >= 3:
            print("fit vs d at T=%d: slope=%.4f intercept=%.4f r2=%.5f" % (T, *harness.fit_rate(rows, "d")))
    _write(records, conf, meta, harness.ExperimentRecord)


def cmd_recovery(conf, meta):
    results = []
    for d in conf["dims"]:
        packing = build_packing(d, conf["seed"])
        for T in conf["budgets"]:
            for delta in conf["deltas"]:
                results.append(harness.run_recovery_game(
                    d, T, delta, conf["trials"], conf["seed"], sigma=conf["sigma"],
                    n_jobs=conf["threads"], packing=packing,
                ))
    cols = ["d", "T", "delta", "trials", "empirical_error_prob", "fano_floor",
            "markov_ceiling_applicable", "mean_l1_risk", "psi", "packing_size"]
    print(_table([dataclasses.asdict(r) for r in results], cols))
    _write(results, conf, meta, harness.RecoveryGameResult)


def bounds_table(d, T, sigma, k, h_r, delta):
    """All applicable closed forms as ``(name, value)`` pairs."""
    inputs = bounds.RateInputs(d, T, sigma, k, h_r, delta)
    rows = [("lower_bound_minimax", bounds.lower_bound_minimax(d, T))]
    if k > 0 or h_r is not None:
        rows.append(("fdm_upper_bound", bounds.fdm_upper_bound(inputs)))
        rows.append(("fdm_gaussian_exact", bounds.fdm_gaussian_exact(inputs)))
    if k > 0:
        rows.append(("gaussian_error_at_optimal_step", bounds.gaussian_error_at_optimal_step(inputs)))
    if h_r is not None:
        rows.append(("gaussian_fdm_error_at_h_r", bounds.gaussian_fdm_error_at_h(inputs, h_r)))
    rows.append(("bernoulli_kl", bounds.bernoulli_kl(delta)))
    rows.append(("kl_transcript_bound", bounds.kl_transcript_bound(T, delta)))
    rows.append(("fano_error_floor", bounds.fano_error_floor(d, T, delta)))
    return rows


def cmd_bounds(conf, meta):
    rows = bounds_table(conf["d"], conf["T"], conf["sigma"], conf["k"], conf["h_r"], conf["delta"])
    width = max(len(n) for n, _ in rows)
    for name, value in rows:
        print(f"{name.ljust(width)}  {value:.6g}")
    doc = {"config": meta, "bounds": dict(rows)}
    print(json.dumps(doc, sort_keys=False))
    if conf["out"]:
        with open(conf["out"], "w") as fh:
            if conf["format"] == "json":
                json.dump(doc, fh, indent=2)
                fh.write("\n")
            else:
                for key, value in meta.items():
                    fh.write(f"# {key}={value}\n")
                fh.write("name,value\n")
                for name, value in rows:
                    fh.write(f"{name},{value!r}\n")
        print(f"wrote {conf['out']}")


def cmd_packing(conf, meta):
    d = conf["d"]
    packing = build_packing(d, conf["seed"])
    target = target_size(d)
    dmin = packing.min_distance() if len(packing) >= 2 else 0
    print(f"d={d} size={len(packing)} target={target} min_distance={dmin} required_distance={min_separation(d)}")
    doc = {"config": meta, "d": d, "size": len(packing), "target": target,
           "min_distance": dmin, "required_distance": min_separation(d)}
    if conf["export"]:
        np.savetxt(conf["export"], packing.vectors, fmt="%+d", delimiter=",")
        print(f"wrote {conf['export']}")
    if conf["out"]:
        with open(conf["out"], "w") as fh:
            if conf["format"] == "json":
                json.dump(doc, fh, indent=2)
                fh.write("\n")
            else:
                for key, value in meta.items():
                    fh.write(f"# {key}={value}\n")
                fh.write("d,size,target,min_distance,required_distance\n")
                fh.write(f"{d},{len(packing)},{target},{dmin},{min_separation(d)}\n")
        print(f"wrote {conf['out']}")


def cmd_gap(conf, meta):
    cells = harness.gap_report(conf["dims"], conf["budgets"], conf["sigma"], conf["k"], conf["h_r"])
    print(_table([dataclasses.asdict(c) for c in cells], ["d", "T", "fdm_exact", "lower_bound", "ratio", "vacuous"]))
    for T, slope in harness.gap_slope(cells, "d").items():
        print(f"log-ratio slope vs log d at T={T}: {slope:.4f}")
    for d, slope in harness.gap_slope(cells, "T").items():
        print(f"log-ratio slope vs log T at d={d}: {slope:.4f}")
    _write(cells, conf, meta, harness.GapCell)


HANDLERS = {"rates": cmd_rates, "recovery": cmd_recovery, "bounds": cmd_bounds,
            "packing": cmd_packing, "gap": cmd_gap}


def main(argv=None):
    """Run the CLI; returns 0 on success, 1 on validation errors, 2 on I/O errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        conf = resolve(args)
        meta = _meta(args.command, conf)
        _print_header(meta)
        HANDLERS[args.command](conf, meta)
    except (UsageError, ValueError, PackingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
