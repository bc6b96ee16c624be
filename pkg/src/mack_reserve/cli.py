"""``mack-reserve`` command line.

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BACKWARD_VARIANCES, Method, run_bootstrap
from .config import load_config
from .evaluation import ks_two_sample
from .exceptions import InputError, MackReserveError, NumericError
from .families import FamilyKind
from .mack import fit_mack
from .manifest import RunManifest, write_text_atomic
from .rng import normalize_seed
from .simulation import detail_csv, resolve_threads, run_experiment, summary_csv
from .triangle import read_triangle

log = logging.getLogger("mack_reserve")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

FAMILIES = [k.value for k in FamilyKind]


class ArtifactError(OSError):
    """An output could not be verified after writing."""


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _finish(manifest: RunManifest, out_dir: Path, paths) -> None:
    for p in paths:
        manifest.add(p)
    bad = manifest.verify()
    if bad:
        raise ArtifactError(f"outputs failed digest verification: {', '.join(bad)}")
    manifest.write(out_dir / "manifest.json")


def cmd_fit(args) -> int:
    tri = read_triangle(args.triangle, header=args.header)
    text = _dump({"n_periods": tri.n_periods, **fit_mack(tri).to_dict()})
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    out = Path(args.out)
    write_text_atomic(out, text)
    manifest = RunManifest("fit", {"triangle": str(args.triangle), "header": args.header}, None, __version__)
    manifest.add(out)
    if manifest.verify():
        raise ArtifactError(f"could not verify {out}")
    manifest.write(out.with_name(out.name + ".manifest.json"))
    return EXIT_OK


def _roots_csv(run) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["root", "part1", "part2"])
    for row in zip(run.roots, run.part1, run.part2):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def cmd_bootstrap(args) -> int:
    seed = normalize_seed(args.seed)
    tri = read_triangle(args.triangle, header=args.header)
    fit = fit_mack(tri)
    run = run_bootstrap(
        args.method, tri, fit, args.family, args.family_backward, args.B, args.alpha, seed,
        backward_variance=args.backward_variance, n_jobs=resolve_threads(args.threads),
    )
    out_dir = Path(args.out_dir)
    summary = run.summary(args.alpha)
    if args.method == Method.ALTERNATIVE.value:
        summary["backward_variance"] = args.backward_variance
    paths = [write_text_atomic(out_dir / "bootstrap.json", _dump(summary))]
    if args.emit_parts:
        paths.append(write_text_atomic(out_dir / "roots.csv", _roots_csv(run)))
    config = {k: v for k, v in vars(args).items() if k not in ("func", "threads")}
    _finish(RunManifest("bootstrap", config, args.seed, __version__), out_dir, paths)
    return EXIT_OK


def cmd_simulate(args) -> int:
    grid = load_config(args.config)
    if args.out_dir:
        grid = type(grid)(**{**grid.to_dict(), "out_dir": args.out_dir})
    out_dir = Path(grid.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = sum(1 for _ in grid.items())

    def progress(k):
        log.info("item %d/%d done", k, total)

    summaries, items = run_experiment(grid, threads=args.threads, resume=args.resume, progress=progress)
    paths = [write_text_atomic(out_dir / "summary.csv", summary_csv(summaries))]
    if args.detail:
        paths.append(write_text_atomic(out_dir / "detail.csv", detail_csv(grid, items)))
    manifest = RunManifest("simulate", grid.to_dict(), grid.seed, __version__)
    _finish(manifest, out_dir, paths)
    return EXIT_OK


def read_sample(path, column=None) -> np.ndarray:
    """One numeric column of a CSV; a non-numeric first row is treated as a header."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data")
    header = None
    try:
        float(rows[0][0])
    except ValueError:
        header, rows = rows[0], rows[1:]
    idx = 0
    if column is not None:
        if header is None or column not in header:
            raise InputError(f"{path}: no column named {column!r}")
        idx = header.index(column)
    try:
        return np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_evaluate(args) -> int:
    x = read_sample(args.x, args.column)
    y = read_sample(args.y, args.column)
    res = ks_two_sample(x, y)
    out = {
        "statistic": res.statistic,
        "p_value": res.p_value,
        "n1": res.n1,
        "n2": res.n2,
        "reject": res.rejects(args.level),
        "level": args.level,
    }
    text = _dump(out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(args.out, text)
    return EXIT_OK


def _read_summary(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "ks_fail_rate" not in rows[0]:
        raise InputError(f"{path}: not a summary CSV")
    return rows


def _pivot(rows, metric, scale=1.0, fmt="{:.2f}"):
    """Rows ``(setup, true family, n)``; columns ``chosen family / method``."""
    cols = []
    for r in rows:
        c = (r["chosen_family"], r["method"])
        if c not in cols:
            cols.append(c)
    keys = []
    table = {}
    for r in rows:
        k = (r["setup"], r["true_family"], int(r["n"]))
        if k not in keys:
            keys.append(k)
        table[k + (r["chosen_family"], r["method"])] = float(r[metric]) * scale
    header = ["setup", "true_family", "n"] + [f"{f}/{m}" for f, m in cols]
    body = []
    for k in keys:
        vals = [table.get(k + c) for c in cols]
        body.append([k[0], k[1], str(k[2])] + ["" if v is None else fmt.format(v) for v in vals])
    return header, body


def _markdown(title, header, body) -> str:
    lines = [f"### {title}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(lines) + "\n"


def _histogram(values, bins) -> str:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    dens, edges = np.histogram(values, bins=bins, density=True)
    mids = (edges[:-1] + edges[1:]) / 2
    return "x,y\n" + "".join(f"{x!r},{y!r}\n" for x, y in zip(mids.tolist(), dens.tolist()))


REPORT_TABLES = (
    ("ks_fail_rate", "KS failure-to-reject rate, full predictive root", 1.0, "{:.2f}"),
    ("ks_part1_fail_rate", "KS failure-to-reject rate, process part", 1.0, "{:.2f}"),
    ("rmmse", "RMMSE (x 1e-3)", 1e-3, "{:.3f}"),
    ("var_mean", "Mean bootstrap variance", 1.0, "{:.6g}"),
    ("coverage", "Prediction-interval coverage", 1.0, "{:.2f}"),
)


def cmd_report(args) -> int:
    rows = _read_summary(args.summary)
    out_dir = Path(args.out_dir)
    md, csv_parts, paths = [], [], []
    for metric, title, scale, fmt in REPORT_TABLES:
        if metric not in rows[0]:
            continue
        header, body = _pivot(rows, metric, scale, fmt)
        md.append(_markdown(title, header, body))
        csv_parts.append("\n".join([f"# {metric}", ",".join(header)] + [",".join(r) for r in body]))
    paths.append(write_text_atomic(out_dir / "tables.md", "\n".join(md)))
    paths.append(write_text_atomic(out_dir / "tables.csv", "\n\n".join(csv_parts) + "\n"))
    if args.detail:
        with open(args.detail, encoding="utf-8", newline="") as fh:
            detail = list(csv.DictReader(fh))
        groups = {}
        for r in detail:
            groups.setdefault((r["chosen_family"], r["n"], r["method"]), []).append(r)
        for (fam, n, method), rs in groups.items():
            for stat in ("skewness", "kurtosis"):
                name = f"hist_{stat}_{fam}_n{n}_{method}.csv"
                paths.append(write_text_atomic(out_dir / name, _histogram([float(r[stat]) for r in rs], args.bins)))
    for roots in args.roots or []:
        sample = read_sample(roots, args.column)
        name = f"density_{Path(roots).stem}.csv"
        paths.append(write_text_atomic(out_dir / name, _histogram(sample, args.bins)))
    _finish(RunManifest("report", {"summary": str(args.summary)}, None, __version__), out_dir, paths)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mack-reserve", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="chain-ladder fit of a triangle CSV")
    f.add_argument("triangle")
    f.add_argument("-o", "--out", help="write JSON here (default: stdout)")
    f.add_argument("--header", action="store_true", help="skip the first row")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bootstrap", help="bootstrap predictive distribution of the reserve")
    b.add_argument("triangle")
    b.add_argument("--method", choices=[m.value for m in Method], default="original")
    b.add_argument("--family", choices=FAMILIES, default="gamma")
    b.add_argument("--family-backward", choices=FAMILIES, default=None,
                   help="family of parametric upper-triangle draws (default: --family)")
    b.add_argument("--backward-variance", choices=BACKWARD_VARIANCES, default="delta")
    b.add_argument("--B", type=int, default=10_000)
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out-dir", default=".")
    b.add_argument("--emit-parts", action="store_true", help="also write roots.csv with both parts")
    b.add_argument("--header", action="store_true")
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("simulate", help="run a simulation grid from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--resume", action="store_true", help="reuse finished items found in out_dir")
    s.add_argument("--detail", action="store_true", help="also write per-simulation detail.csv")
    s.add_argument("--out-dir", default=None, help="override out_dir from the config")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="two-sample KS test of two root CSVs")
    e.add_argument("x")
    e.add_argument("y")
    e.add_argument("--column", default=None)
    e.add_argument("--level", type=float, default=0.05)
    e.add_argument("-o", "--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="tables and histogram data from a summary CSV")
    r.add_argument("summary")
    r.add_argument("--detail", default=None, help="detail.csv for skewness/kurtosis histograms")
    r.add_argument("--roots", nargs="*", help="root CSVs to turn into density data")
    r.add_argument("--column", default=None)
    r.add_argument("--bins", type=int, default=40)
    r.add_argument("--out-dir", default=".")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except MackReserveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
