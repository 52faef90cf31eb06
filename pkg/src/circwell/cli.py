"""Command-line front end: tables, verification suite and profile export.

    circwell table --family entropy --bc dirichlet --m 0..5 --n 1..4 --compare-reference
    circwell verify --format json --out report.json
    circwell profiles --bc neumann --m 0 --n 1 --out curves/

Exit codes: 0 success, 1 a verification check failed, 2 I/O or usage error,
3 a quadrature did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, measures, wells
from .measures import ConvergenceError, DivergenceError
from .specfun import DomainError
from .wells import BoundaryCondition, StateSpec

EXIT_OK, EXIT_CHECK, EXIT_IO, EXIT_NONCONVERGED = 0, 1, 2, 3

FAMILIES = {
    "entropy": ("S_rho", "S_gamma", "S_t"),
    "fisher": ("I_rho", "I_gamma", "I_product"),
    "onicescu": ("O_rho", "O_gamma", "O_product"),
    "complexity": ("CGL_rho", "CGL_gamma"),
    "energy": ("E",),
}

# agreement expected with the printed tables: absolute for entropies, relative otherwise
REFERENCE_TOL = {"entropy": ("abs", 1.5e-3), "fisher": ("rel", 5e-3), "onicescu": ("rel", 5e-3)}

_SIG = 12


def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used in every output file."""
    if x is None:
        return ""
    return f"{float(x):.{_SIG}g}"


def _round(x):
    return None if x is None else float(fmt(x))


# --------------------------------------------------------------------------
# reference data
# --------------------------------------------------------------------------


@lru_cache(maxsize=1)
def load_reference() -> dict:
    text = resources.files("circwell").joinpath("data/reference_tables.json").read_text()
    return json.loads(text)


def reference_cells(bc: BoundaryCondition, family: str) -> dict:
    """``{(m, n): {column: (value, printed)}}``; empty for families without a table."""
    tab = load_reference()["tables"].get(bc.value, {}).get(family)
    if tab is None:
        return {}
    return {
        (row["m"], row["n"]): {c: (row["values"][c], row["printed"][c]) for c in tab["columns"]}
        for row in tab["rows"]
    }


def paper_format(value: float, printed: str) -> str:
    """Render ``value`` with the precision of a printed table entry."""
    if "E" in printed:
        mant, _ = printed.split("E")
        digits = len(mant.split(".")[1])
        if value == 0:
            return printed
        exp = math.floor(math.log10(abs(value))) + 1
        return f"{value / 10**exp:.{digits}f}E{exp:+d}"
    digits = len(printed.split(".")[1]) if "." in printed else 0
    return f"{value:.{digits}f}"


# --------------------------------------------------------------------------
# report table
# --------------------------------------------------------------------------


@dataclass
class ReportTable:
    """One measure family over a grid of states, ordered by ``(|m|, n)``."""

    bc: BoundaryCondition
    measure_family: str
    rows: dict = field(default_factory=dict)        # (m, n) -> {column: value | None}
    status: dict = field(default_factory=dict)      # (m, n) -> "ok" | "nonconverged"
    reference_deltas: dict | None = None           # (m, n) -> {column: delta}

    def __post_init__(self):
        if self.measure_family not in FAMILIES:
            raise ValueError(f"unknown measure family {self.measure_family!r}")
        self.rows = dict(sorted(self.rows.items()))

    @property
    def columns(self) -> tuple:
        return FAMILIES[self.measure_family]

    @classmethod
    def from_records(cls, bc, family, results, compare=False) -> "ReportTable":
        rows, status = {}, {}
        for item in results:
            if isinstance(item, ConvergenceError):
                key = item.state_key
                rows[key] = {c: None for c in FAMILIES[family]}
                status[key] = "nonconverged"
                continue
            key = (item.state.m, item.state.n)
            rows[key] = {c: _round(getattr(item, c)) for c in FAMILIES[family]}
            status[key] = "ok"
        table = cls(bc, family, rows, dict(sorted(status.items())))
        if compare:
            table.attach_reference()
        return table

    def attach_reference(self) -> None:
        ref = reference_cells(self.bc, self.measure_family)
        deltas = {}
        for key, vals in self.rows.items():
            if key not in ref:
                continue
            deltas[key] = {
                c: _round(vals[c] - ref[key][c][0]) if vals[c] is not None else None
                for c in self.columns if c in ref[key]
            }
        self.reference_deltas = deltas

    def max_delta(self):
        """Largest absolute and relative deviation from the reference over all cells."""
        ref = reference_cells(self.bc, self.measure_family)
        worst_abs = worst_rel = 0.0
        for key, d in (self.reference_deltas or {}).items():
            for c, v in d.items():
                if v is None:
                    continue
                worst_abs = max(worst_abs, abs(v))
                base = abs(ref[key][c][0])
                if base:
                    worst_rel = max(worst_rel, abs(v) / base)
        return worst_abs, worst_rel

    def outside_tolerance(self) -> list:
        kind_tol = REFERENCE_TOL.get(self.measure_family)
        if kind_tol is None or not self.reference_deltas:
            return []
        kind, tol = kind_tol
        ref = reference_cells(self.bc, self.measure_family)
        bad = []
        for key, d in self.reference_deltas.items():
            for c, v in d.items():
                if v is None:
                    continue
                err = abs(v) if kind == "abs" else abs(v) / abs(ref[key][c][0] or 1.0)
                if err > tol:
                    bad.append((key, c, err))
        return bad

    # serialisation ---------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["m", "n", *self.columns, "status"]
        if self.reference_deltas is not None:
            header += [f"delta_{c}" for c in self.columns]
        w.writerow(header)
        for key, vals in self.rows.items():
            line = [key[0], key[1], *(fmt(vals[c]) for c in self.columns), self.status.get(key, "ok")]
            if self.reference_deltas is not None:
                d = self.reference_deltas.get(key, {})
                line += [fmt(d.get(c)) for c in self.columns]
            w.writerow(line)
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = {
            "bc": self.bc.value,
            "family": self.measure_family,
            "columns": list(self.columns),
            "rows": [
                {"m": k[0], "n": k[1], "status": self.status.get(k, "ok"),
                 "values": {c: v[c] for c in self.columns}}
                for k, v in self.rows.items()
            ],
        }
        if self.reference_deltas is not None:
            out["reference_deltas"] = [
                {"m": k[0], "n": k[1], "deltas": d} for k, d in sorted(self.reference_deltas.items())
            ]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ReportTable":
        rows = {(r["m"], r["n"]): dict(r["values"]) for r in data["rows"]}
        status = {(r["m"], r["n"]): r.get("status", "ok") for r in data["rows"]}
        deltas = None
        if "reference_deltas" in data:
            deltas = {(d["m"], d["n"]): dict(d["deltas"]) for d in data["reference_deltas"]}
        return cls(BoundaryCondition.parse(data["bc"]), data["family"], rows, status, deltas)

    @classmethod
    def from_json(cls, text: str) -> "ReportTable":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text: str, bc, family: str) -> "ReportTable":
        reader = csv.DictReader(io.StringIO(text))
        cols = FAMILIES[family]
        rows, status, deltas = {}, {}, {}
        has_delta = False
        for rec in reader:
            key = (int(rec["m"]), int(rec["n"]))
            rows[key] = {c: float(rec[c]) if rec[c] else None for c in cols}
            status[key] = rec.get("status") or "ok"
            if f"delta_{cols[0]}" in rec:
                has_delta = True
                d = {c: float(rec[f"delta_{c}"]) for c in cols if rec[f"delta_{c}"]}
                if d:
                    deltas[key] = d
        return cls(BoundaryCondition.parse(bc), family, rows, status, deltas if has_delta else None)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def parse_range(text: str) -> list[int]:
    """``"A..B"`` (inclusive), ``"A"`` or a comma list of either."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = (int(x) for x in part.split(".."))
            if b < a:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("empty range")
    return out


@dataclass
class RunConfig:
    bc: BoundaryCondition
    m_values: list
    n_values: list
    tol: float | None = None
    kmax: float | None = None
    fmt: str = "csv"
    out: str | None = None

    def __post_init__(self):
        if not self.m_values or not self.n_values:
            raise ValueError("m and n ranges must be non-empty")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.kmax is not None and not self.kmax > 0:
            raise ValueError("kmax must be positive")
        if any(n < 1 for n in self.n_values):
            raise ValueError("n must be >= 1")
        if any(m < 0 for m in self.m_values):
            print("note: negative m normalised to |m|", file=sys.stderr)
            self.m_values = [abs(m) for m in self.m_values]
        self.m_values = sorted(set(self.m_values))
        self.n_values = sorted(set(self.n_values))

    def states(self) -> list[StateSpec]:
        return [StateSpec(self.bc, m, n) for m in self.m_values for n in self.n_values]


def _config(args) -> RunConfig:
    return RunConfig(
        bc=BoundaryCondition.parse(args.bc),
        m_values=parse_range(args.m),
        n_values=parse_range(args.n),
        tol=args.tol,
        kmax=args.kmax,
        fmt=args.format,
        out=args.out,
    )


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _records(config: RunConfig, family: str):
    if family == "energy":
        return [_EnergyOnly(s) for s in config.states()]
    kw = {}
    if config.tol is not None:
        kw["tol"] = config.tol
    if config.kmax is not None:
        kw["kmax"] = config.kmax
    results = measures.measure_grid(config.states(), **kw)
    for s, r in zip(config.states(), results):
        if isinstance(r, ConvergenceError):
            r.state_key = (s.m, s.n)
    return results


@dataclass
class _EnergyOnly:
    state: StateSpec

    @property
    def E(self):
        return wells.energy(self.state)


def cmd_table(config: RunConfig, family: str, compare: bool = False) -> int:
    results = _records(config, family)
    table = ReportTable.from_records(config.bc, family, results, compare=compare)
    text = table.to_csv() if config.fmt == "csv" else table.to_json()
    _emit(text, config.out)
    if compare:
        # keep stdout clean when the table itself goes there
        to_stdout = config.out in (None, "-")
        _comparison_report(table, sys.stderr if to_stdout else sys.stdout)
    if any(v != "ok" for v in table.status.values()):
        print("error: some cells did not converge (marked 'nonconverged')", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _comparison_report(table: ReportTable, stream) -> None:
    ref = reference_cells(table.bc, table.measure_family)
    for key, d in (table.reference_deltas or {}).items():
        for c, delta in d.items():
            value = table.rows[key][c]
            if value is None:
                continue
            printed = ref[key][c][1]
            print(f"{table.bc.short}({key[0]},{key[1]}) {c:<9} computed {paper_format(value, printed):>11}"
                  f"  paper {printed:>11}  delta {delta:+.3e}", file=stream)
    worst_abs, worst_rel = table.max_delta()
    bad = table.outside_tolerance()
    print(f"max |delta| = {worst_abs:.3e} (max relative {worst_rel:.3e}); "
          f"{len(bad)} cell(s) outside table tolerance", file=stream)


class _Checks:
    def __init__(self):
        self.items = []

    def add(self, name, measured, expected, tolerance, passed=None, status=None):
        if passed is None:
            passed = abs(measured - expected) <= tolerance
        self.items.append({
            "check": name,
            "measured": _jsonable(measured),
            "expected": _jsonable(expected),
            "tolerance": tolerance,
            "status": status or ("pass" if passed else "fail"),
        })

    def run(self, name, fn):
        try:
            fn()
        except ConvergenceError as exc:
            self.items.append({"check": name, "measured": None, "expected": None,
                               "tolerance": None, "status": "nonconverged", "detail": str(exc)})
        except (ArithmeticError, ValueError) as exc:
            self.items.append({"check": name, "measured": None, "expected": None,
                               "tolerance": None, "status": "fail", "detail": str(exc)})


def _jsonable(x):
    if isinstance(x, complex):
        return {"re": _round(x.real), "im": _round(x.imag)}
    if isinstance(x, (bool, str)) or x is None:
        return x
    if not math.isfinite(x):
        return None
    return _round(x)


def cmd_verify(config: RunConfig, perturb: float = 0.0) -> int:
    with wells.perturbed_zeros(perturb):
        checks = _verify_checks(config)
    statuses = [c["status"] for c in checks.items]
    report = {
        "version": __version__,
        "bc": config.bc.value,
        "m": config.m_values,
        "n": config.n_values,
        "zero_perturbation": perturb,
        "passed": statuses.count("pass"),
        "failed": statuses.count("fail"),
        "nonconverged": statuses.count("nonconverged"),
        "checks": checks.items,
    }
    if config.fmt == "json":
        text = json.dumps(report, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "measured", "expected", "tolerance"])
        for c in checks.items:
            w.writerow([c["check"], c["status"], json.dumps(c["measured"]),
                        json.dumps(c["expected"]), c["tolerance"]])
        text = buf.getvalue()
    _emit(text, config.out)
    print(f"verify: {report['passed']} passed, {report['failed']} failed, "
          f"{report['nonconverged']} not converged", file=sys.stderr)
    if report["failed"]:
        return EXIT_CHECK
    if report["nonconverged"]:
        return EXIT_NONCONVERGED
    return EXIT_OK


def _verify_checks(config: RunConfig) -> _Checks:
    ck = _Checks()
    states = config.states()
    kw = {k: v for k, v in (("tol", config.tol), ("kmax", config.kmax)) if v is not None}

    for s in states:
        def norm(s=s):
            ck.add(f"norm_position {s.label}", wells.overlap_position(s, s), 1.0, 1e-10)
            res = wells.overlap_momentum(s, s)
            ck.add(f"norm_momentum {s.label}", res.value, wells.overlap_momentum_exact(s, s), 1e-8)
        ck.run(f"normalisation {s.label}", norm)

    for m in config.m_values:
        for a in config.n_values:
            for b in config.n_values:
                if b <= a:
                    continue
                sa, sb = StateSpec(config.bc, m, a), StateSpec(config.bc, m, b)

                def ortho(sa=sa, sb=sb):
                    ck.add(f"orthogonality_position {sa.label},{sb.label}",
                           wells.overlap_position(sa, sb), 0.0, 1e-10)
                    res = wells.overlap_momentum(sa, sb)
                    ck.add(f"orthogonality_momentum {sa.label},{sb.label}",
                           res.value, wells.overlap_momentum_exact(sa, sb), 1e-8)
                ck.run(f"orthogonality {sa.label},{sb.label}", ortho)

    for s in states:
        def record(s=s):
            rec = measures.measure_record(s, **kw)
            ck.add(f"bbm {s.label}", rec.S_t, measures.BBM_BOUND, None,
                   passed=rec.S_t > measures.BBM_BOUND - 1e-6)
            ck.add(f"cgl_rho {s.label}", rec.CGL_rho, 1.0, None, passed=rec.CGL_rho >= 1 - 1e-6)
            ck.add(f"cgl_gamma {s.label}", rec.CGL_gamma, 1.0, None, passed=rec.CGL_gamma >= 1 - 1e-6)
            if s.bc is BoundaryCondition.DIRICHLET:
                exact = rec.I_rho
                num = measures.fisher_position_numeric(s)
                ck.add(f"fisher_closed_form {s.label}", num, exact, 1e-6 * exact)
        ck.run(f"measures {s.label}", record)

    d01 = StateSpec(BoundaryCondition.DIRICHLET, 0, 1)

    def bbm_margin():
        rec = measures.measure_record(d01)
        ck.add("bbm_margin D(0,1)", rec.bbm_margin, 4.4174 - measures.BBM_BOUND, 1e-4)
    ck.run("bbm_margin D(0,1)", bbm_margin)

    for s in states[:4]:
        def k2(s=s):
            info = measures.momentum_second_moment(s, (100.0, 1000.0))
            if s.bc is BoundaryCondition.DIRICHLET:
                j2 = wells.characteristic_zero(s) ** 2
                val = info["k2_converged"]
                ck.add(f"k2_identity {s.label}", val if val is not None else math.nan, j2,
                       1e-5 * j2, passed=val is not None and abs(val - j2) <= 1e-5 * j2)
            else:
                ck.add(f"k2_divergent {s.label}", info["k2_divergent"], True, None,
                       passed=info["k2_divergent"])
        ck.run(f"k2 {s.label}", k2)

    n01 = StateSpec(BoundaryCondition.NEUMANN, 0, 1)

    def radial():
        kr = measures.radial_momentum_matrix_element(n01, 1)
        ck.add("kr_expectation N(0,1)", kr, -1j, 1e-10, passed=abs(kr + 1j) <= 1e-10)
        eps = (1e-3, 1e-5, 1e-7)
        y = [measures.radial_momentum_matrix_element(n01, 2, e).real for e in eps]
        slope = float(np.polyfit(np.log(1.0 / np.asarray(eps)), y, 1)[0])
        ck.add("kr2_log_slope N(0,1)", slope, 0.5, 1e-3)
        try:
            measures.radial_momentum_matrix_element(n01, 2, 0.0)
            flagged = False
        except DivergenceError:
            flagged = True
        ck.add("kr2_divergence_flag N(0,1)", flagged, True, None, passed=flagged)
    ck.run("radial momentum N(0,1)", radial)
    return ck


def cmd_profiles(config: RunConfig, points: int = 201, kmax: float = 30.0) -> int:
    r = np.linspace(0.0, 1.0, points)
    k = np.linspace(0.0, kmax, points)
    curves = []
    for s in config.states():
        curves.append((s, "position", r, wells.psi_radial(s, r)))
        curves.append((s, "momentum", k, wells.phi_radial(s, k)))
    if config.out is None or config.out == "-":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "space", "x", "value"])
        for s, space, xs, ys in curves:
            for x, y in zip(xs, ys):
                w.writerow([s.label, space, fmt(x), fmt(y)])
        sys.stdout.write(buf.getvalue())
        return EXIT_OK
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for s, space, xs, ys in curves:
        name = f"{s.bc.short}_{s.m}_{s.n}_{space}.csv"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value"])
        w.writerows([fmt(x), fmt(y)] for x, y in zip(xs, ys))
        (outdir / name).write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bc", default="dirichlet", help="dirichlet or neumann")
    common.add_argument("--m", default="0..3", help="magnetic numbers, e.g. 0..5 or 0,10,20")
    common.add_argument("--n", default="1..3", help="principal numbers, e.g. 1..4")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--tol", type=float, default=None, help="momentum quadrature tolerance")
    common.add_argument("--kmax", type=float, default=None,
                        help="momentum cutoff (table/verify) or plotting range (profiles)")

    p = argparse.ArgumentParser(prog="circwell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", parents=[common], help="compute one measure family on a grid")
    t.add_argument("--family", choices=tuple(FAMILIES), default="entropy")
    t.add_argument("--compare-reference", action="store_true",
                   help="add per-cell deltas against the embedded reference tables")

    v = sub.add_parser("verify", parents=[common], help="run the identity and invariant checks")
    v.add_argument("--perturb-zeros", type=float, default=0.0, metavar="REL",
                   help="test mode: scale every Bessel zero by (1 + REL)")

    f = sub.add_parser("profiles", parents=[common], help="export psi(r) and phi(k) curves")
    f.add_argument("--points", type=int, default=201)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    try:
        config = _config(args)
        if args.command == "table":
            return cmd_table(config, args.family, args.compare_reference)
        if args.command == "verify":
            return cmd_verify(config, args.perturb_zeros)
        kmax = args.kmax if args.kmax is not None else 30.0
        return cmd_profiles(config, args.points, kmax)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
