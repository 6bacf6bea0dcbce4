"""Command-line driver: ``arraymc check FILE`` and ``arraymc bench DIR``."""

from __future__ import annotations

import argparse
import csv
import io
import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ArrayMCError, ConfigError
from .invariants import DEFAULT_INV_DEPTH, DEFAULT_INV_NODES, breach_plus_inv, index_cover, sinv
from .parser import corpus_options, parse_spec
from .reachability import DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES, ReachResult, ReachStats, breach

EXIT_SAFE, EXIT_UNSAFE, EXIT_UNKNOWN, EXIT_ERROR = 0, 1, 2, 3
MODES = ("breach", "breach+inv", "sinv")


@dataclass
class RunConfig:
    mode: str = "breach"
    max_depth: int = DEFAULT_MAX_DEPTH
    max_nodes: int = DEFAULT_MAX_NODES
    inv_depth: int = DEFAULT_INV_DEPTH
    inv_nodes: int = DEFAULT_INV_NODES
    abstraction: str = "index"
    sig_arrays: tuple = ()
    oracle_check: int = 0
    dump_smt2: str | None = None
    stats: bool = False
    seed: int | None = None
    timeout: float | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        for name in ("max_depth", "max_nodes", "inv_depth", "inv_nodes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be positive")
        if self.timeout is not None and self.timeout <= 0:
            raise ConfigError("--timeout must be positive")
        if self.oracle_check < 0:
            raise ConfigError("--oracle-check must be non-negative")


@dataclass
class Outcome:
    verdict: str  # "safe" | "unsafe" | "unknown"
    reason: str
    stats: ReachStats
    lines: list
    oracle_ok: bool = True

    @property
    def label(self) -> str:
        if self.verdict == "unknown":
            reason = "budget" if self.reason in ("", "depth", "nodes") else self.reason
            return f"UNKNOWN({reason})"
        return self.verdict.upper()

    @property
    def exit_code(self) -> int:
        if not self.oracle_ok:
            return EXIT_ERROR
        return {"safe": EXIT_SAFE, "unsafe": EXIT_UNSAFE}.get(self.verdict, EXIT_UNKNOWN)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--max-nodes", type=int)
    p.add_argument("--inv-depth", type=int)
    p.add_argument("--inv-nodes", type=int)
    p.add_argument("--abstraction", choices=("index", "signature", "both"))
    p.add_argument("--sig-arrays", type=lambda s: tuple(x for x in s.split(",") if x))
    p.add_argument("--oracle-check", type=int, metavar="N",
                   help="cross-check pre-images and the verdict on models with up to N indexes")
    p.add_argument("--dump-smt2", metavar="DIR", help="write every solver query as an SMT-LIB2 file")
    p.add_argument("--stats", action="store_true", default=None, help="print solver call breakdown")
    p.add_argument("--seed", type=int, help="random seed (only used by fuzzing)")
    p.add_argument("--timeout", type=float, metavar="SECONDS", help="wall-clock limit of the search")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the error code, not argparse's default 2 (unknown)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arraymc", description="Safety checker for array-based systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    check = sub.add_parser("check", help="check one system file")
    check.add_argument("file")
    _add_run_flags(check)
    bench = sub.add_parser("bench", help="check every *.spec file of a directory")
    bench.add_argument("dir")
    bench.add_argument("--csv", metavar="FILE", help="also write the table as CSV to FILE")
    bench.add_argument("--ignore-file-options", action="store_true",
                       help="do not apply the '#!' options recorded in the files")
    _add_run_flags(bench)
    return parser


def make_config(args: argparse.Namespace, file_options: Sequence[str] = ()) -> RunConfig:
    """Defaults, then the file's ``#!`` options, then the explicit flags."""
    cfg = RunConfig()
    layers = []
    if file_options:
        fp = argparse.ArgumentParser(add_help=False)
        _add_run_flags(fp)
        layers.append(fp.parse_args(list(file_options)))
    layers.append(args)
    for ns in layers:
        for name in ("mode", "max_depth", "max_nodes", "inv_depth", "inv_nodes", "abstraction",
                     "sig_arrays", "oracle_check", "dump_smt2", "stats", "seed", "timeout"):
            value = getattr(ns, name, None)
            if value is not None:
                setattr(cfg, name, value)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- running


class _OracleChecker:
    """Compares every computed pre-image with the brute-force one."""

    def __init__(self, spec, size: int):
        from . import oracle

        self.oracle = oracle
        self.spec = spec
        self.size = size
        self.configs = list(oracle.enumerate_configurations(spec, size))
        self.mismatches: list = []
        self.checked = 0

    def __call__(self, t, k, cubes) -> None:
        o = self.oracle
        self.checked += 1
        for cfg in self.configs:
            semantic = any(o.eval_cube(s, k) for s in o.step(cfg, t))
            symbolic = any(o.eval_cube(cfg, c) for c in cubes)
            if semantic != symbolic:
                self.mismatches.append((t.name, str(k), str(cfg)))
                return

    def check_verdict(self, res: ReachResult) -> list[str]:
        o = self.oracle
        problems = [f"pre-image mismatch for {n} on {k}: {c}" for n, k, c in self.mismatches]
        if res.unsafe:
            size = max(self.size, 1 + max((len(c.vars) for c in self.spec.unsafe_cubes()), default=1))
            if o.replay(list(res.trace), self.spec, size) is None:
                problems.append(f"trace {res.trace} does not replay on models with up to {size} indexes")
        elif res.safe:
            run = o.forward_search(self.spec, 6, self.size)
            if run is not None:
                problems.append("forward search reached an unsafe configuration: "
                                + " -> ".join(str(c) for c in run))
        return problems


def run(spec, cfg: RunConfig) -> Outcome:
    engine = spec.engine()
    if cfg.dump_smt2:
        from .smtlib import DumpWriter

        DumpWriter(cfg.dump_smt2, engine).install()
    checker = _OracleChecker(spec, cfg.oracle_check) if cfg.oracle_check else None
    if cfg.seed is not None:
        random.seed(cfg.seed)
    lines: list[str] = []
    start = time.perf_counter()
    if cfg.mode == "sinv":
        cover = index_cover(spec, engine, cfg.inv_depth, cfg.inv_nodes)
        r = sinv(spec, cover_fn=cover, max_depth=cfg.max_depth, max_nodes=cfg.max_nodes, engine=engine)
        verdict = {"success": "safe", "failure": "unknown", "unknown": "unknown"}[r.status]
        reason = "cover-failure" if r.status == "failure" else "budget"
        stats = ReachStats(depth=r.iterations, nodes=len(r.cubes), smt=engine.stats.calls,
                           time=time.perf_counter() - start)
        res = ReachResult(verdict, cubes=r.cubes, stats=stats, reason=reason)
        if r.success:
            lines.append(f"invariant: {len(r.cubes)} universal conjuncts")
    else:
        deadline = None if cfg.timeout is None else start + cfg.timeout
        kw = dict(max_depth=cfg.max_depth, max_nodes=cfg.max_nodes, engine=engine,
                  on_preimage=checker, deadline=deadline)
        if cfg.mode == "breach":
            res = breach(spec, **kw)
        else:
            kw.pop("on_preimage")
            res = breach_plus_inv(spec, inv_depth=cfg.inv_depth, inv_nodes=cfg.inv_nodes,
                                  strategy=cfg.abstraction, sig_arrays=cfg.sig_arrays or None, **kw)
        if res.unsafe:
            lines.append(f"trace: {res.trace}")
        elif res.reason in ("depth", "nodes"):
            lines.append(f"stopped: --max-{res.reason} reached")
    lines.append(res.stats.line())
    if cfg.stats:
        lines.append("smt calls: " + " ".join(f"{k}={v}" for k, v in engine.stats.breakdown().items()))
        for inv in res.invariants:
            lines.append(f"invariant: {inv}")
    ok = True
    if checker is not None:
        problems = checker.check_verdict(res)
        ok = not problems
        lines.append(f"oracle: {'ok' if ok else 'MISMATCH'} (size {cfg.oracle_check}, "
                     f"{checker.checked} pre-images)")
        lines.extend(f"  {p}" for p in problems)
    return Outcome(res.verdict, res.reason, res.stats, lines, ok)


def _check(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    spec = parse_spec(text)
    cfg = make_config(args)
    out = run(spec, cfg)
    print(out.label)
    for line in out.lines:
        print(line)
    return out.exit_code


BENCH_COLUMNS = ("file", "mode", "verdict", "d", "n", "del", "smt", "inv", "time")


def bench_rows(directory: str | Path, args: argparse.Namespace, use_file_options: bool = True) -> list[dict]:
    rows = []
    for path in sorted(Path(directory).glob("*.spec")):
        row = dict.fromkeys(BENCH_COLUMNS, "")
        row["file"] = path.name
        try:
            text = path.read_text(encoding="utf-8")
            cfg = make_config(args, corpus_options(text) if use_file_options else ())
            row["mode"] = cfg.mode
            out = run(parse_spec(text), cfg)
            s = out.stats
            row.update(verdict=out.label, d=s.depth, n=s.nodes, smt=s.smt, inv=s.invariants,
                       time=f"{s.time:.3f}")
            row["del"] = s.deleted
        except (ArrayMCError, OSError) as exc:
            row["verdict"] = f"ERROR: {exc}"
        rows.append(row)
    return rows


def format_table(rows: Sequence[dict]) -> str:
    widths = {c: max([len(c)] + [len(str(r[c])) for r in rows]) for c in BENCH_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in BENCH_COLUMNS)]
    lines.append("  ".join("-" * widths[c] for c in BENCH_COLUMNS))
    for r in rows:
        lines.append("  ".join(str(r[c]).ljust(widths[c]) for c in BENCH_COLUMNS))
    return "\n".join(lines)


def to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _bench(args) -> int:
    if not Path(args.dir).is_dir():
        raise ConfigError(f"not a directory: {args.dir}")
    rows = bench_rows(args.dir, args, not args.ignore_file_options)
    text = to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    print(text, end="")
    print()
    print(format_table(rows))
    return EXIT_ERROR if any(str(r["verdict"]).startswith("ERROR") for r in rows) else 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return _check(args)
        return _bench(args)
    except ArrayMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
