"""Operator surface: build towers, run witness and correlator pipelines,
scan spectra, and emit JSON/CSV artifacts (with companion PNG figures)
for inspection.

Exit codes are stable: 0 success, 2 input error, 3 mathematical-contract
violation. Every artifact embeds the tool version, the seed, and a hash of
the semantic configuration; two runs with the same configuration produce
byte-identical files, so artifacts double as regression fixtures. Output
location and plotting toggles are not part of the hashed configuration.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .automaton import ShiftAutomaton, entropy, gap_constant, is_mixing
from .correlator import build_coded_point, evaluate_correlation, make_plan, write_correlation_csv
from .errors import ContractError, InputError
from .spectra import looks_rational, spectral_scan, sturmian_word
from .tower import TowerSpec, build_tower
from .witness import SignalSeries, build_witness, write_checkpoint_csv

# builtins ship as embedded JSON so the quickstart needs no files
_BUILTIN_SYSTEMS = {
    "full2": '{"alphabet": ["-1", "1"], "states": [""], '
             '"edges": [["", "-1", ""], ["", "1", ""]]}',
    "goldenmean": '{"alphabet": ["0", "1"], "states": ["", "1"], '
                  '"edges": [["", "0", ""], ["", "1", "1"], ["1", "0", ""]]}',
}


def _thread_cap() -> int:
    raw = os.environ.get("SUBSHIFT_FORGE_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise InputError(f"SUBSHIFT_FORGE_THREADS must be an integer, got {raw!r}")
    return max(1, cap)


def _load_system(spec: str) -> ShiftAutomaton:
    if spec in _BUILTIN_SYSTEMS:
        return ShiftAutomaton.from_json(_BUILTIN_SYSTEMS[spec], name=spec)
    try:
        with open(spec, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(
            f"system {spec!r} is neither a builtin "
            f"({', '.join(sorted(_BUILTIN_SYSTEMS))}) nor a readable file: {e}"
        )
    return ShiftAutomaton.from_json(text, name=spec)


def _parse_ints(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise InputError(f"{what} must be a comma-separated integer list, got {text!r}")


def _read_signal_csv(path: str) -> np.ndarray:
    import csv

    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise InputError(f"cannot read signal file {path!r}: {e}")
    values = []
    for i, row in enumerate(rows):
        if not row:
            continue
        try:
            values.append(float(row[0]))
        except ValueError:
            raise InputError(
                f"malformed signal CSV {path!r}: row {i + 1} is not a number"
            )
    if not values:
        raise InputError(f"signal CSV {path!r} holds no samples")
    return np.asarray(values, dtype=np.float64)


def _load_samples(source: str, n: int | None, seed: int) -> np.ndarray:
    """Signal sources: seeded-random-pm1, cosine:theta, csv:path."""
    if source == "seeded-random-pm1":
        if n is None:
            raise InputError("seeded-random-pm1 needs --n")
        return np.random.default_rng(seed).choice([-1.0, 1.0], size=n)
    if source.startswith("cosine:"):
        arg = source[len("cosine:"):]
        try:
            theta = float(arg)
        except ValueError:
            raise InputError(f"bad cosine frequency {arg!r}")
        if n is None:
            raise InputError("cosine needs --n")
        return np.cos(2.0 * np.pi * theta * np.arange(n, dtype=np.float64))
    if source.startswith("csv:"):
        a = _read_signal_csv(source[len("csv:"):])
        if n is not None:
            if n > a.size:
                raise InputError(f"signal file holds {a.size} samples, need {n}")
            a = a[:n]
        return a
    raise InputError(
        f"unknown signal source {source!r}; "
        "use seeded-random-pm1, cosine:theta, or csv:path"
    )


def _load_series(source: str, n: int | None, seed: int) -> tuple[np.ndarray, str]:
    """Scan sources: the signal sources plus sturmian:theta[,rho] (observable
    2s-1) and witness:report.json (the constructed point's signs)."""
    if source.startswith("sturmian:"):
        parts = source[len("sturmian:"):].split(",")
        try:
            theta = float(parts[0])
            rho = float(parts[1]) if len(parts) > 1 else 0.0
        except (ValueError, IndexError):
            raise InputError(f"bad sturmian spec {source!r}")
        if n is None:
            raise InputError("sturmian needs --n")
        w = sturmian_word(theta, rho, n)
        tag = "sturmian" + (" (rational)" if looks_rational(theta) else "")
        return 2.0 * np.asarray(w.data, dtype=np.float64) - 1.0, tag
    if source.startswith("witness:"):
        path = source[len("witness:"):]
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read witness report {path!r}: {e}")
        names = doc.get("result", doc).get("point")
        if not isinstance(names, list) or not names:
            raise InputError(f"witness report {path!r} carries no point")
        try:
            a = np.asarray([float(s) for s in names], dtype=np.float64)
        except ValueError:
            raise InputError(f"witness report {path!r} has non-numeric symbols")
        if n is not None:
            if n > a.size:
                raise InputError(f"witness point holds {a.size} symbols, need {n}")
            a = a[:n]
        return a, "witness-point"
    return _load_samples(source, n, seed), source


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _artifact(config: dict, result: dict) -> dict:
    return {
        "tool": "subshift-forge",
        "version": __version__,
        "seed": config.get("seed"),
        "config": config,
        "config_hash": _config_hash(config),
        "result": result,
    }


def _write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_meta(csv_path, config: dict) -> None:
    # RFC-4180 files cannot carry provenance, so each CSV gets a sidecar
    _write_json(str(csv_path) + ".meta.json", _artifact(config, {}))


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _tower_from_args(args) -> tuple[TowerSpec, dict]:
    if getattr(args, "tower", None):
        try:
            with open(args.tower, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read tower file {args.tower!r}: {e}")
        spec = TowerSpec.from_json_dict(doc.get("result", {}).get("tower", doc))
        return spec, {"tower_depth": spec.depth, "schedule": list(spec.schedule)}
    schedule = _parse_ints(args.schedule, "--schedule") if args.schedule else None
    spec = build_tower(args.depth, schedule)
    return spec, {"tower_depth": args.depth, "schedule": list(spec.schedule)}


def cmd_tower(args) -> int:
    schedule = _parse_ints(args.schedule, "--schedule") if args.schedule else None
    spec = build_tower(args.depth, schedule, gap_bound=args.gap_bound)
    config = {
        "command": "tower",
        "depth": args.depth,
        "schedule": list(spec.schedule),
        "gap_bound": args.gap_bound,
        "seed": args.seed,
    }
    level_rows = []
    for lvl in spec.levels:
        lo, hi = lvl.entropy_range()
        level_rows.append(
            {
                "index": lvl.index,
                "L": lvl.L,
                "K": lvl.K,
                "window": lvl.window,
                "gap_mode": lvl.gap_mode if lvl.index else "",
                "entropy_lo": lo,
                "entropy_hi": hi,
            }
        )
    out = _out_dir(args)
    _write_json(
        os.path.join(out, "tower.json"),
        _artifact(config, {"tower": spec.to_json_dict(), "levels": level_rows}),
    )
    import csv

    csv_path = os.path.join(out, "levels.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "L", "K", "window", "gap_mode", "entropy_lo", "entropy_hi"])
        for r in level_rows:
            w.writerow(
                [r["index"], r["L"], r["K"], r["window"], r["gap_mode"],
                 repr(r["entropy_lo"]), repr(r["entropy_hi"])]
            )
    _write_meta(csv_path, config)
    if not args.no_plot:
        from .plots import plot_tower_levels

        plot_tower_levels(level_rows, os.path.join(out, "tower_entropy.png"))
    for r in level_rows:
        print(
            f"level {r['index']}: L={r['L']} K={r['K']} window={r['window']} "
            f"entropy=[{r['entropy_lo']:.6f}, {r['entropy_hi']:.6f}]"
        )
    return 0


def cmd_witness(args) -> int:
    spec, tower_cfg = _tower_from_args(args)
    samples = _load_samples(args.signal, args.n, args.seed)
    checkpoints = _parse_ints(args.checkpoints, "--checkpoints") if args.checkpoints else None
    signal = SignalSeries(samples, checkpoints=checkpoints)
    config = {
        "command": "witness",
        "signal": args.signal,
        "n": int(signal.samples.size),
        "checkpoints": list(signal.checkpoints),
        "seed": args.seed,
        **tower_cfg,
    }
    report = build_witness(signal, spec)
    out = _out_dir(args)
    _write_json(os.path.join(out, "report.json"), _artifact(config, report.to_json_dict()))
    csv_path = os.path.join(out, "checkpoints.csv")
    write_checkpoint_csv(report, csv_path)
    _write_meta(csv_path, config)
    if not args.no_plot:
        from .plots import plot_witness_rows

        plot_witness_rows(
            report.rows, float(report.bound_factor), os.path.join(out, "witness.png")
        )
    print(f"bound_factor {report.bound_factor} over {len(report.checkpoints)} checkpoints")
    if float(np.abs(signal.samples).sum()) == 0.0:
        print("zero signal: the bound degenerates to equality and holds")
    for (lvl, k, nk, dot, ab, bound) in report.level_rows(report.depth):
        print(f"  N_{k}={nk}: dot={dot:.6f} mass={ab:.6f} bound={bound:.6f}")
    return 0


def cmd_correlate(args) -> int:
    A = _load_system(args.system)
    plan = make_plan(A, args.l, seed=args.seed, u=args.u)
    samples = _load_samples(args.signal, args.n, args.seed)
    n = int(samples.size)
    signal = SignalSeries(samples, checkpoints=(n,))
    coded = build_coded_point(plan, signal, n)
    if args.prefixes:
        prefixes = _parse_ints(args.prefixes, "--prefixes")
    else:
        prefixes = sorted({max(1, n // 100), max(1, n // 10), n})
    rows = evaluate_correlation(plan, coded, signal, prefixes)
    # the finite-sum identity is the command's success condition
    starts = np.arange(coded.t, n, plan.period)
    mass = np.cumsum(np.abs(signal.samples[starts]))
    for (N, corr, _, _) in rows:
        want = float(mass[np.searchsorted(starts, N) - 1]) if N > coded.t else 0.0
        if abs(corr * N - want) > 1e-12 * max(1.0, want):
            raise ContractError(
                "block-mass identity failed",
                details={"N": N, "corr_sum": corr * N, "block_mass": want},
            )
    config = {
        "command": "correlate",
        "system": args.system,
        "l": args.l,
        "u": plan.u,
        "signal": args.signal,
        "n": n,
        "prefixes": prefixes,
        "seed": args.seed,
    }
    out = _out_dir(args)
    _write_json(os.path.join(out, "plan.json"), _artifact(config, plan.to_json_dict()))
    csv_path = os.path.join(out, "correlation.csv")
    write_correlation_csv(rows, csv_path)
    _write_meta(csv_path, config)
    if not args.no_plot:
        from .plots import plot_correlation_rows

        plot_correlation_rows(rows, os.path.join(out, "correlation.png"))
    print(
        f"plan l={plan.l} u={plan.u} t={coded.t} "
        f"overlaps={plan.overlap_report} blocks={len(coded.block_symbols)}"
    )
    for (N, corr, abs_avg, bound) in rows:
        print(f"  N={N}: corr={corr:.6f} abs_avg={abs_avg:.6f} floor={bound:.6f}")
    return 0


def cmd_scan(args) -> int:
    series, tag = _load_series(args.series, args.n, args.seed)
    if args.prefixes:
        prefixes = _parse_ints(args.prefixes, "--prefixes")
    else:
        size = int(series.size)
        prefixes = sorted({max(1, size // 100), max(1, size // 10), size})
    extra = [float(x) for x in args.angles.split(",")] if args.angles else []
    scan = spectral_scan(
        series, args.grid, prefixes, series_id=tag, extra_angles=extra,
        workers=_thread_cap(),
    )
    config = {
        "command": "scan",
        "series": args.series,
        "n": int(series.size),
        "grid": args.grid,
        "prefixes": prefixes,
        "extra_angles": extra,
        "seed": args.seed,
    }
    out = _out_dir(args)
    csv_path = os.path.join(out, "scan.csv")
    scan.write_csv(csv_path)
    _write_meta(csv_path, config)
    _write_json(os.path.join(out, "scan.json"), _artifact(config, scan.to_json_dict()))
    if not args.no_plot:
        from .plots import plot_scan

        plot_scan(scan, os.path.join(out, "scan.png"))
    peak = scan.peak_angle()
    j = scan.xi_grid.index(peak)
    print(
        f"peak angle {peak:.6f} with |A_N|={scan.magnitude(j, -1):.6f} "
        f"at N={scan.prefixes[-1]} ({tag})"
    )
    return 0


def _print_or_write(args, config: dict, result: dict) -> None:
    doc = _artifact(config, result)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        _write_json(args.out, doc)
    print(json.dumps(doc, sort_keys=True, indent=2))


def cmd_entropy(args) -> int:
    A = _load_system(args.system)
    h = entropy(A)
    config = {"command": "entropy", "system": args.system, "seed": args.seed}
    _print_or_write(args, config, {"entropy": h})
    return 0


def cmd_mixing(args) -> int:
    A = _load_system(args.system)
    config = {"command": "mixing", "system": args.system, "seed": args.seed}
    _print_or_write(args, config, {"mixing": bool(is_mixing(A))})
    return 0


def cmd_gap(args) -> int:
    from .words import Word

    A = _load_system(args.system)
    W = Word.from_text(A.alphabet, args.marker) if args.marker else None
    cert = gap_constant(A, W, bound=args.bound)
    config = {
        "command": "gap",
        "system": args.system,
        "marker": W.names() if W is not None else None,
        "bound": args.bound,
        "seed": args.seed,
    }
    _print_or_write(
        args,
        config,
        {
            "constant": cert.constant,
            "verified_bound": cert.verified_bound,
            "primitive_power": cert.primitive_power,
        },
    )
    return 0


def _add_common(p, out_default=".") -> None:
    p.add_argument("--seed", type=int, default=0, help="seed echoed into artifacts")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subshift-forge",
        description="mixing SFT towers, correlation witnesses, coded-system "
                    "correlators, and spectral scans",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tower", help="build a tower and report its levels")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--schedule", help="comma-separated window factors, e.g. 64,128")
    p.add_argument("--gap-bound", type=int, default=None,
                   help="abort any level whose gap constant exceeds this")
    _add_common(p)
    p.set_defaults(func=cmd_tower)

    p = sub.add_parser("witness", help="refine a sign point through the tower")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--schedule")
    p.add_argument("--tower", help="tower.json from a previous run (overrides --depth)")
    p.add_argument("--signal", required=True,
                   help="seeded-random-pm1 | cosine:theta | csv:path")
    p.add_argument("--n", type=int, default=None, help="signal length")
    p.add_argument("--checkpoints", help="comma-separated; default 3,6,12,...")
    _add_common(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("correlate", help="coded-point correlation on a system")
    p.add_argument("--system", required=True,
                   help="full2 | goldenmean | automaton JSON path")
    p.add_argument("--l", type=int, required=True, help="code word length")
    p.add_argument("--u", type=int, default=None,
                   help="gap override; default is the certified constant")
    p.add_argument("--signal", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--prefixes", help="comma-separated evaluation prefixes")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("scan", help="Weyl-average scan over the angle grid")
    p.add_argument("--series", required=True,
                   help="signal sources | sturmian:theta[,rho] | witness:report.json")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--prefixes")
    p.add_argument("--angles", help="extra exact angles, comma-separated floats")
    _add_common(p)
    p.set_defaults(func=cmd_scan)

    for name, fn, extra in (
        ("entropy", cmd_entropy, ()),
        ("mixing", cmd_mixing, ()),
        ("gap", cmd_gap, ("marker", "bound")),
    ):
        p = sub.add_parser(name, help=f"{name} of a system")
        p.add_argument("--system", required=True)
        if "marker" in extra:
            p.add_argument("--marker", help="marker word, e.g. '-1 1'; default trivial")
            p.add_argument("--bound", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="also write the JSON here")
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractError as e:
        dump = {"error": "contract-violation", "message": str(e), "details": e.details}
        print(json.dumps(dump, sort_keys=True, default=str), file=sys.stderr)
        return 3
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
