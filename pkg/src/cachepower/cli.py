"""Batch front end: key=value run files, M sweeps to CSV, exhaustive verification.

Run file format (one ``key=value`` per line, ``#`` starts a comment)::

    format=1
    K=5
    N=8
    R=1
    gains_inv=2,1.8,1.6,1.4,1.2     # or gains=h_1^2,...,h_K^2
    m_grid=0:0.5:8                  # or an explicit list 0,1,2.5
    schemes=centralized,decentralized
    compute_lb=true
    verify_t=0,1,2                  # integer t values for `verify` (default: all)
    verify_k_max=6
    verify_n_max=6
    output=out.csv
    seed=42
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import __version__
from .bounds import gaps, lower_bound_average, lower_bound_peak
from .combinatorics import enumerate_classes
from .delivery import expected_layer_rates, verify_decentralized_masses, verify_delivery
from .model import ConfigError, SystemConfig, validate_config
from .power import average_power, peak_power
from .schemes import CENTRALIZED, DECENTRALIZED, SCHEMES

COLUMNS = ("M", "avg_ub_c", "peak_ub_c", "avg_ub_d", "peak_ub_d", "avg_lb", "peak_lb",
           "gap_avg_c", "gap_avg_d", "gap_peak_c", "gap_peak_d")
VERIFY_HARD_MAX = 6
AUDIT_TOL = 1e-9

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2

_KNOWN = {"format", "K", "N", "R", "gains", "gains_inv", "m_grid", "schemes", "compute_lb",
          "verify", "verify_t", "verify_k_max", "verify_n_max", "output", "seed"}


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class AuditError(RuntimeError):
    pass


@dataclass
class RunSpec:
    K: int
    N: int
    R: float
    gains: tuple[float, ...]
    m_grid: tuple[float, ...]
    schemes: tuple[str, ...] = SCHEMES
    compute_lb: bool = True
    verify: bool = False
    verify_t: Optional[tuple[int, ...]] = None
    verify_k_max: int = VERIFY_HARD_MAX
    verify_n_max: int = VERIFY_HARD_MAX
    output: Optional[str] = None
    seed: int = 42
    lines: dict = field(default_factory=dict, repr=False)

    def config(self, M: float = 0.0) -> SystemConfig:
        return SystemConfig(self.K, self.N, self.R, M, self.gains)


def _number(text: str, line: int, key: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise SpecError(f"malformed number {text!r} for {key}", line) from None
    if not math.isfinite(v):
        raise SpecError(f"{key} must be finite", line)
    return v


def _integer(text: str, line: int, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SpecError(f"malformed integer {text!r} for {key}", line) from None


def _bool(text: str, line: int, key: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"expected true/false for {key}, got {text!r}", line)


def _grid(text: str, line: int) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise SpecError("m_grid range must be start:step:end", line)
        start, step, end = (_number(p, line, "m_grid") for p in parts)
        if step <= 0:
            raise SpecError("m_grid step must be positive", line)
        n = round((end - start) / step)
        if n < 0 or abs(start + n * step - end) > 1e-9 * max(1.0, abs(end)):
            raise SpecError(f"m_grid end {end} is not reachable from {start} in steps of {step}", line)
        # i*step rather than repeated addition keeps grid points free of drift
        return [start + i * step for i in range(n)] + [end]
    return [_number(p.strip(), line, "m_grid") for p in text.split(",")]


def parse_spec(text: str) -> RunSpec:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"expected key=value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN:
            raise SpecError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise SpecError(f"duplicate key {key!r} (first on line {raw[key][1]})", lineno)
        raw[key] = (value, lineno)

    def get(key):
        return raw[key] if key in raw else (None, None)

    v, ln = get("format")
    if v is not None and v != "1":
        raise SpecError(f"unsupported format {v!r}; this reader handles format=1", ln)
    for key in ("K", "N", "m_grid"):
        if key not in raw:
            raise SpecError(f"missing required key {key}")
    K = _integer(*raw["K"], "K")
    N = _integer(*raw["N"], "N")
    if K < 1:
        raise SpecError("K must be a positive integer", raw["K"][1])
    if N < 1:
        raise SpecError("N must be a positive integer", raw["N"][1])
    R = 1.0
    if "R" in raw:
        R = _number(*raw["R"], "R")
        if R <= 0:
            raise SpecError("R must be positive", raw["R"][1])

    if ("gains" in raw) == ("gains_inv" in raw):
        raise SpecError("give exactly one of gains or gains_inv",
                        (raw.get("gains") or raw.get("gains_inv") or (None, None))[1])
    gkey = "gains" if "gains" in raw else "gains_inv"
    gtext, gline = raw[gkey]
    vals = [_number(p.strip(), gline, gkey) for p in gtext.split(",")]
    if len(vals) != K:
        raise SpecError(f"{gkey} has {len(vals)} entries, expected K={K}", gline)
    if any(x <= 0 for x in vals):
        raise SpecError(f"{gkey} entries must be positive", gline)
    gains = tuple(vals) if gkey == "gains" else tuple(1.0 / x for x in vals)
    try:
        validate_config(SystemConfig(K, N, R, 0.0, gains))
    except ConfigError as exc:
        raise SpecError(str(exc), gline) from None

    mtext, mline = raw["m_grid"]
    grid = _grid(mtext, mline)
    for m in grid:
        if m < 0:
            raise SpecError(f"M={m} is negative", mline)
        if m > N:
            raise SpecError(f"M exceeds N ({m} > {N})", mline)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise SpecError("m_grid must be strictly increasing", mline)

    spec = RunSpec(K, N, R, gains, tuple(grid), lines={k: v[1] for k, v in raw.items()})
    if "schemes" in raw:
        st, sl = raw["schemes"]
        names = tuple(s.strip() for s in st.split(",") if s.strip())
        bad = [s for s in names if s not in SCHEMES]
        if bad or not names:
            raise SpecError(f"schemes must be drawn from {', '.join(SCHEMES)}", sl)
        spec.schemes = tuple(s for s in SCHEMES if s in names)
    if "compute_lb" in raw:
        spec.compute_lb = _bool(*raw["compute_lb"], "compute_lb")
    if "verify" in raw:
        spec.verify = _bool(*raw["verify"], "verify")
    for key in ("verify_k_max", "verify_n_max"):
        if key in raw:
            v = _integer(*raw[key], key)
            if not 1 <= v <= VERIFY_HARD_MAX:
                raise SpecError(f"{key}={v} is outside [1, {VERIFY_HARD_MAX}] (hard limit {VERIFY_HARD_MAX})",
                                raw[key][1])
            setattr(spec, key, v)
    if "verify_t" in raw:
        tt, tl = raw["verify_t"]
        ts = tuple(sorted({_integer(p.strip(), tl, "verify_t") for p in tt.split(",")}))
        if any(not 0 <= t <= K for t in ts):
            raise SpecError(f"verify_t values must lie in [0, K={K}]", tl)
        spec.verify_t = ts
    if "output" in raw:
        spec.output = raw["output"][0]
    if "seed" in raw:
        spec.seed = _integer(*raw["seed"], "seed")
    return spec


def _fmt(x) -> str:
    if x is None:
        return "NA"
    return "%.9g" % x


def _threads() -> int:
    try:
        n = int(os.environ.get("CACHEPOWER_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _sweep_row(spec: RunSpec, M: float, classes) -> dict:
    cfg = spec.config(M)
    row = dict.fromkeys(COLUMNS)
    row["M"] = M
    try:
        if spec.compute_lb and set(spec.schemes) == set(SCHEMES):
            b = gaps(cfg, classes)
            row.update(avg_ub_c=b.upper.avg_ub_c, peak_ub_c=b.upper.peak_ub_c,
                       avg_ub_d=b.upper.avg_ub_d, peak_ub_d=b.upper.peak_ub_d,
                       avg_lb=b.avg_lb, peak_lb=b.peak_lb,
                       gap_avg_c=b.gap_avg_c, gap_avg_d=b.gap_avg_d,
                       gap_peak_c=b.gap_peak_c, gap_peak_d=b.gap_peak_d)
            return row
        for scheme, tag in ((CENTRALIZED, "c"), (DECENTRALIZED, "d")):
            if scheme in spec.schemes:
                row[f"avg_ub_{tag}"] = average_power(cfg, scheme, classes)
                row[f"peak_ub_{tag}"] = peak_power(cfg, scheme, classes=classes)
        if spec.compute_lb:
            row["avg_lb"] = lower_bound_average(cfg, classes)
            row["peak_lb"] = lower_bound_peak(cfg)
            for kind in ("avg", "peak"):
                lb = row[f"{kind}_lb"]
                for tag in ("c", "d"):
                    ub = row[f"{kind}_ub_{tag}"]
                    if ub is not None and lb > 0:
                        row[f"gap_{kind}_{tag}"] = ub / lb
    except ValueError as exc:
        raise ValueError(f"M={M}: {exc}") from exc
    return row


def audit_rows(rows: Sequence[dict], tol: float = AUDIT_TOL) -> list[str]:
    """Ordering and monotonicity violations among the computed columns."""
    problems = []

    def le(a, b):
        return a is None or b is None or a <= b + tol * max(1.0, abs(b))

    for r in rows:
        M = r["M"]
        for kind in ("avg", "peak"):
            chain = (r[f"{kind}_lb"], r[f"{kind}_ub_c"], r[f"{kind}_ub_d"])
            if not (le(chain[0], chain[1]) and le(chain[1], chain[2]) and le(chain[0], chain[2])):
                problems.append(f"M={M}: {kind} bounds out of order {chain}")
        for tag in ("c", "d"):
            if not le(r[f"avg_ub_{tag}"], r[f"peak_ub_{tag}"]):
                problems.append(f"M={M}: average exceeds peak for scheme {tag}")
    for col in ("avg_ub_c", "peak_ub_c", "avg_ub_d", "peak_ub_d", "avg_lb", "peak_lb"):
        for a, b in zip(rows, rows[1:]):
            if not le(b[col], a[col]):
                problems.append(f"{col} increases from M={a['M']} to M={b['M']}")
    return problems


def sweep_rows(spec: RunSpec) -> list[dict]:
    classes = enumerate_classes(spec.K, spec.N)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda M: _sweep_row(spec, M, classes), spec.m_grid))
    return rows


def run_sweep(spec: RunSpec) -> str:
    rows = sweep_rows(spec)
    problems = audit_rows(rows)
    if problems:
        raise AuditError("; ".join(problems[:5]))
    out = [",".join(COLUMNS)]
    for r in rows:
        out.append(",".join(_fmt(r[c]) for c in COLUMNS))
    return "\n".join(out) + "\n"


@dataclass
class VerifySummary:
    vectors: int = 0
    user_runs: int = 0
    t_values: int = 0
    packets: int = 0
    reconstructions: int = 0
    classes_checked: int = 0
    failures: list = field(default_factory=list)

    def lines(self) -> list[str]:
        per_t = self.user_runs // self.t_values if self.t_values else 0
        return [
            f"{per_t}×{self.t_values} demand runs, {len(self.failures)} failures",
            f"demand vectors tested: {self.vectors}",
            f"packets generated: {self.packets}",
            f"reconstructions performed: {self.reconstructions}",
            f"decentralized class checks: {self.classes_checked}",
        ]


def run_verify(spec: RunSpec) -> VerifySummary:
    """Every demand vector at every requested integer t, plus the decentralized mass model per class and M."""
    for name, v, cap in (("K", spec.K, spec.verify_k_max), ("N", spec.N, spec.verify_n_max)):
        if cap > VERIFY_HARD_MAX:
            raise SpecError(f"verify cap {name}={cap} exceeds the hard limit {VERIFY_HARD_MAX}")
        if v > cap:
            raise SpecError(f"{name}={v} exceeds the verification cap {cap} (hard limit {VERIFY_HARD_MAX})")
    base = spec.config()
    ts = spec.verify_t if spec.verify_t is not None else tuple(range(spec.K + 1))
    summary = VerifySummary(t_values=len(ts))
    demands = list(itertools.product(range(1, spec.N + 1), repeat=spec.K))

    def one(args):
        t, d = args
        cfg = base.with_memory(t * spec.N / spec.K)
        rep = verify_delivery(cfg, d, t, spec.seed)
        bad = None
        if not rep.ok:
            bad = f"t={t} d={d}: " + "; ".join(u.missing or "" for u in rep.users if not u.decoded_ok)
        elif rep.layer_rates != expected_layer_rates(d, t):
            bad = f"t={t} d={d}: layer rates {rep.layer_rates} differ from the analytic ones"
        return rep, bad

    jobs = [(t, d) for t in ts for d in demands]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for rep, bad in pool.map(one, jobs):
            summary.user_runs += spec.K
            summary.packets += rep.packets_generated
            summary.reconstructions += rep.reconstructions
            if bad:
                summary.failures.append(bad)
    summary.vectors = len(demands)

    classes = enumerate_classes(spec.K, spec.N)
    for M in spec.m_grid:
        cfg = base.with_memory(M)
        for w in classes:
            rep = verify_decentralized_masses(cfg, w.cls)
            summary.classes_checked += 1
            if not rep.ok:
                summary.failures.append(
                    f"M={M} class {w.cls.leaders}: layers {rep.mismatched_layers} {rep.uncovered[:3]}")
    return summary


def _read_spec(path: str) -> RunSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="cachepower",
                                 description="Power-memory trade-off for cache-aided Gaussian broadcast")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sw = sub.add_parser("sweep", help="sweep M and write the bound/gap CSV")
    sw.add_argument("spec", metavar="RUNFILE")
    sw.add_argument("-o", "--output", help="CSV path (default: the run file's output key, else stdout)")
    vf = sub.add_parser("verify", help="exhaustive delivery and mass-model verification")
    vf.add_argument("spec", metavar="RUNFILE")
    args = ap.parse_args(argv)

    try:
        spec = _read_spec(args.spec)
    except (OSError, SpecError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.cmd == "sweep":
        try:
            csv = run_sweep(spec)
        except AuditError as exc:
            print(f"audit failed: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        out = args.output or spec.output
        if out:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(csv)
        else:
            sys.stdout.write(csv)
        return EXIT_OK

    try:
        summary = run_verify(spec)
    except SpecError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for line in summary.lines():
        print(line)
    for f in summary.failures[:20]:
        print(f"FAIL {f}")
    return EXIT_VERIFY if summary.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
