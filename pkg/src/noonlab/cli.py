"""Command-line front end: verification runs, sweeps and report emission.

Usage examples::

    noonlab verify --n 2 4 6 8 --phase-variant exact
    noonlab verify --n 3 5 --basis insensitive --threshold 0.4
    noonlab scan --n 2 --t 0.3 0.4 0.5 0.6 0.7 --format csv
    noonlab detector --n 2 --eta 0.5 --t 0.5 0.6 0.7 0.8 0.9 0.95
    noonlab estimate --n 1 4 9 --trials 100000 --seed 7
    noonlab scaling --n 2..64:2 --out scaling.csv --format csv

Flags override values from ``--config file.json``. Exit status: 0 success,
1 verification threshold missed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .estimation import RNG_ALGORITHM, ProbeKind, ProbeSpec, closed_form_uncertainty, monte_carlo_phase_estimate
from .fock import FockError
from .measurement import DetectorModel
from .protocols import (
    DetectionBasis,
    PhaseVariant,
    analytic_success_probability,
    asymptotic_probability,
    build_even_circuit,
    build_odd_circuit,
    optimal_transmission,
    resolve_phase_roots,
    run_circuit,
)

COMMANDS = ("verify", "scan", "detector", "estimate", "scaling")
DEFAULT_CAP = 8
DEFAULT_THRESHOLD = 1 - 1e-9

PHASE_VARIANTS = {"paper": "paper", "exact": "exact"}
BASES = {"diagonal": DetectionBasis.DIAGONAL, "insensitive": DetectionBasis.INSENSITIVE}


class ConfigError(ValueError):
    """Invalid configuration; reported with exit status 2."""


@dataclass
class RunConfig:
    command: str
    n: list[int] = field(default_factory=list)
    t: list[Any] = field(default_factory=lambda: ["optimal"])
    eta: list[float] = field(default_factory=lambda: [1.0])
    phase_variant: str = "paper"
    basis: str = "diagonal"
    resolving: bool = True
    kind: list[str] = field(default_factory=lambda: ["uncorrelated", "entangled"])
    phi: list[Any] = field(default_factory=lambda: ["auto"])
    trials: int = 100_000
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    cap: int = DEFAULT_CAP
    closed_form_only: bool = False
    out: str | None = None
    format: str = "json"
    workers: int = 1


CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


# --------------------------------------------------------------------- parsing


def _parse_int_tokens(tokens: Sequence[Any]) -> list[int]:
    """Integers, or ranges ``lo..hi`` / ``lo..hi:step`` (inclusive)."""
    out: list[int] = []
    for tok in tokens:
        if isinstance(tok, bool):
            raise ConfigError(f"n: not an integer: {tok!r}")
        if isinstance(tok, int):
            out.append(tok)
            continue
        text = str(tok)
        try:
            if ".." in text:
                span, _, step = text.partition(":")
                lo, hi = span.split("..")
                out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            else:
                out.append(int(text))
        except ValueError:
            raise ConfigError(f"n: cannot parse {text!r}") from None
    return out


def _float_range(text: str) -> list[float]:
    """Inclusive ``lo..hi:step``; points are rounded to 12 decimals so 0.1 steps stay clean."""
    span, _, step = text.partition(":")
    lo, hi = (float(x) for x in span.split(".."))
    if not step or float(step) <= 0 or hi < lo:
        raise ValueError(text)
    count = int(round((hi - lo) / float(step))) + 1
    return [round(lo + k * float(step), 12) for k in range(count)]


def _parse_float_tokens(tokens: Sequence[Any], name: str, allow: Sequence[str] = ()) -> list[Any]:
    """Floats, names from ``allow``, or inclusive ranges ``lo..hi:step``."""
    out: list[Any] = []
    for tok in tokens:
        if isinstance(tok, str) and tok in allow:
            out.append(tok)
            continue
        try:
            if isinstance(tok, str) and ".." in tok:
                out.extend(_float_range(tok))
            else:
                out.append(float(tok))
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: cannot parse {tok!r}") from None
    return out


def _listify(value: Any) -> list[Any]:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {cfg.command!r}")
    cfg.n = _parse_int_tokens(_listify(cfg.n))
    cfg.t = _parse_float_tokens(_listify(cfg.t), "t", allow=("optimal",))
    cfg.eta = _parse_float_tokens(_listify(cfg.eta), "eta")
    cfg.phi = _parse_float_tokens(_listify(cfg.phi), "phi", allow=("auto",))
    cfg.kind = [str(k) for k in _listify(cfg.kind)]
    if not cfg.n:
        raise ConfigError("n: empty range")
    if not cfg.t or not cfg.eta or not cfg.phi or not cfg.kind:
        raise ConfigError("t, eta, phi and kind must be non-empty")
    if any(n < 1 for n in cfg.n):
        raise ConfigError(f"n: values must be >= 1, got {cfg.n}")
    for t in cfg.t:
        if t != "optimal" and not 0.0 <= t <= 1.0:
            raise ConfigError(f"t: {t} outside [0, 1]")
    for eta in cfg.eta:
        if not 0.0 <= eta <= 1.0:
            raise ConfigError(f"eta: {eta} outside [0, 1]")
    if cfg.phase_variant not in PHASE_VARIANTS:
        raise ConfigError(f"phase_variant: expected paper or exact, got {cfg.phase_variant!r}")
    if cfg.basis not in BASES:
        raise ConfigError(f"basis: expected diagonal or insensitive, got {cfg.basis!r}")
    for k in cfg.kind:
        if k not in ("uncorrelated", "entangled"):
            raise ConfigError(f"kind: unknown probe kind {k!r}")
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"format: expected json or csv, got {cfg.format!r}")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ConfigError(f"trials: must be a positive integer, got {cfg.trials!r}")
    if not isinstance(cfg.seed, int):
        raise ConfigError(f"seed: must be an integer, got {cfg.seed!r}")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError(f"workers: must be a positive integer, got {cfg.workers!r}")
    if cfg.command in ("verify", "scan", "detector"):
        over = [n for n in cfg.n if n > cfg.cap]
        if over and not (cfg.command == "scan" and cfg.closed_form_only):
            raise ConfigError(f"n: {over} exceeds the simulation cap of {cfg.cap} (raise it with --cap)")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noonlab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"noonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON document with RunConfig fields")
        p.add_argument("--n", nargs="+", help="photon numbers: ints or lo..hi[:step]")
        p.add_argument("--t", nargs="+", help="transmissions or 'optimal'")
        p.add_argument("--eta", nargs="+", help="detector efficiencies")
        p.add_argument("--phase-variant", choices=sorted(PHASE_VARIANTS))
        p.add_argument("--basis", choices=sorted(BASES))
        p.add_argument("--resolving", dest="resolving", action="store_const", const=True)
        p.add_argument("--non-resolving", dest="resolving", action="store_const", const=False)
        p.add_argument("--kind", nargs="+", choices=["uncorrelated", "entangled"])
        p.add_argument("--phi", nargs="+", help="probe phases in radians, or 'auto' for pi/(2N)")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threshold", type=float, help="minimum fidelity for verify")
        p.add_argument("--cap", type=int, help="largest N for simulation commands")
        p.add_argument("--closed-form-only", dest="closed_form_only", action="store_const", const=True,
                       help="scan: skip simulation and emit closed-form columns only")
        p.add_argument("--out")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--workers", type=int)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be an object")
        unknown = sorted(set(doc) - CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"config: unknown keys {unknown}")
        if "command" in doc and doc["command"] != args.command:
            raise ConfigError(f"config: command {doc['command']!r} does not match {args.command!r}")
        values.update(doc)
    for name in CONFIG_FIELDS - {"command"}:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    values["command"] = args.command
    if args.command == "detector" and "resolving" not in values:
        values["resolving"] = False
    if args.command == "scaling" and "n" not in values:
        values["n"] = ["2..64:2"]
    if args.command in ("verify", "scan", "detector") and "n" not in values:
        values["n"] = [2]
    if args.command == "estimate" and "n" not in values:
        values["n"] = [1, 4, 9]
    return validate(RunConfig(**values))


# --------------------------------------------------------------------- rows


def _closed_form(N: int) -> tuple[float | None, str | None]:
    if N % 2 or N < 2:
        return None, None
    exact = analytic_success_probability(N)
    return float(exact), f"{exact.numerator}/{exact.denominator}"


def _resolve_t(t: Any, N: int) -> float:
    return optimal_transmission(max(N, 2)) if t == "optimal" else float(t)


def simulate_point(N: int, t: Any, eta: float, resolving: bool, phase_variant: str, basis: str) -> dict[str, Any]:
    """One protocol run; every CLI simulation row comes from here."""
    detector = DetectorModel(eta, resolving)
    tv = _resolve_t(t, N)
    if N % 2 == 0:
        variant = PhaseVariant.PAPER_EVEN if phase_variant == "paper" else PhaseVariant.EXACT_TARGET
        circuit = build_even_circuit(N, tv, resolve_phase_roots(N, variant), detector)
        basis_name = None
        variant_name = variant.value
    else:
        phases = resolve_phase_roots(N, PhaseVariant.PAPER_ODD) if N > 1 else None
        circuit = build_odd_circuit(N, tv, phases, BASES[basis], detector)
        basis_name = BASES[basis].value
        variant_name = PhaseVariant.PAPER_ODD.value
    report = run_circuit(circuit)
    closed, closed_exact = _closed_form(N)
    return {
        "N": N,
        "t": tv,
        "eta": eta,
        "resolving": resolving,
        "phase_variant": variant_name,
        "basis": basis_name,
        "elements": len(circuit.groups),
        "success_probability": report.success_probability,
        "fidelity": report.fidelity,
        "achieved_phase": report.achieved_phase,
        "closed_form": closed,
        "closed_form_exact": closed_exact,
        "ratio": report.success_probability / closed if closed else None,
    }


def _simulate_star(args: tuple) -> dict[str, Any]:
    return simulate_point(*args)


def _run_points(points: list[tuple], workers: int) -> list[dict[str, Any]]:
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate_star, points))
    return [simulate_point(*p) for p in points]


def cmd_verify(cfg: RunConfig) -> tuple[list[dict[str, Any]], int]:
    points = [
        (N, t, eta, cfg.resolving, cfg.phase_variant, cfg.basis)
        for N in cfg.n
        for t in cfg.t
        for eta in cfg.eta
    ]
    rows = _run_points(points, cfg.workers)
    for row in rows:
        row["passed"] = row["fidelity"] >= cfg.threshold
    status = 0 if all(r["passed"] for r in rows) else 1
    return rows, status


def cmd_scan(cfg: RunConfig) -> tuple[list[dict[str, Any]], int]:
    if cfg.closed_form_only:
        rows = []
        for N in cfg.n:
            for t in cfg.t:
                closed, closed_exact = _closed_form(N)
                tv = _resolve_t(t, N)
                rows.append(
                    {
                        "N": N,
                        "t": tv,
                        "closed_form": closed,
                        "closed_form_exact": closed_exact,
                        "tap_objective": tv ** (2 * N - 2) * (1 - tv) ** 2,
                    }
                )
        return rows, 0
    points = [
        (N, t, eta, cfg.resolving, cfg.phase_variant, cfg.basis)
        for N in cfg.n
        for t in cfg.t
        for eta in cfg.eta
    ]
    rows = _run_points(points, cfg.workers)
    for row in rows:
        row["tap_objective"] = row["t"] ** (2 * row["N"] - 2) * (1 - row["t"]) ** 2
    return rows, 0


def cmd_detector(cfg: RunConfig) -> tuple[list[dict[str, Any]], int]:
    points = [
        (N, t, eta, cfg.resolving, cfg.phase_variant, cfg.basis)
        for N in cfg.n
        for eta in cfg.eta
        for t in cfg.t
    ]
    rows = _run_points(points, cfg.workers)
    for row in rows:
        row["pi_N"] = asymptotic_probability(row["N"], row["eta"])
    return rows, 0


def cmd_estimate(cfg: RunConfig) -> tuple[list[dict[str, Any]], int]:
    rows = []
    for kind in cfg.kind:
        for N in cfg.n:
            for phi in cfg.phi:
                angle = math.pi / (2 * N) if phi == "auto" else float(phi)
                closed = closed_form_uncertainty(kind, N, angle)
                mc = monte_carlo_phase_estimate(ProbeSpec(ProbeKind(kind), N, angle), cfg.trials, cfg.seed, cfg.workers)
                rows.append(
                    {
                        "kind": kind,
                        "N": N,
                        "phi": angle,
                        "trials": cfg.trials,
                        "seed": cfg.seed,
                        "mean": closed.mean,
                        "variance": closed.variance,
                        "delta_phi": None if closed.singular else closed.delta_phi,
                        "mc_mean": mc.mean,
                        "mc_variance": mc.variance,
                        "mc_delta_phi": None if mc.singular else mc.delta_phi,
                        "singular": closed.singular or mc.singular,
                        "shot_noise_limit": 1 / math.sqrt(N),
                        "heisenberg_limit": 1 / N,
                    }
                )
    return rows, 0


def cmd_scaling(cfg: RunConfig) -> tuple[list[dict[str, Any]], int]:
    rows = []
    for N in cfg.n:
        for eta in cfg.eta:
            closed, closed_exact = _closed_form(N)
            asym = asymptotic_probability(N, eta)
            asym_ideal = asymptotic_probability(N, 1.0)
            rows.append(
                {
                    "N": N,
                    "eta": eta,
                    "closed_form": closed,
                    "closed_form_exact": closed_exact,
                    "asymptotic": asym,
                    "asymptotic_ideal": asym_ideal,
                    "ratio": closed / asym_ideal if closed is not None else None,
                }
            )
    return rows, 0


HANDLERS: dict[str, Callable[[RunConfig], tuple[list[dict[str, Any]], int]]] = {
    "verify": cmd_verify,
    "scan": cmd_scan,
    "detector": cmd_detector,
    "estimate": cmd_estimate,
    "scaling": cmd_scaling,
}


# --------------------------------------------------------------------- output


def report_header(cfg: RunConfig) -> dict[str, Any]:
    return {
        "artifact": "noonlab",
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
    }


def _csv_cell(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render(header: dict[str, Any], rows: list[dict[str, Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"header": header, "rows": rows}, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    columns: list[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def run(cfg: RunConfig) -> tuple[str, int]:
    rows, status = HANDLERS[cfg.command](cfg)
    return render(report_header(cfg), rows, cfg.format), status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        cfg = config_from_args(args)
        text, status = run(cfg)
    except (ConfigError, FockError) as exc:
        print(f"noonlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
