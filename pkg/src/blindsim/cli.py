"""Command-line front end: blind runs, bound sweeps and blindness sweeps.

Exit status: 0 success or expected outcome, 1 a check failed, 2 bad configuration.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import sys
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analyzer import PERFECT_TOL, REPORT_PRESETS, VIOLATION_TOL, AnalyzerError, blindness_sweep, expected_blind
from .linalg import trace_norm
from .mbqc import PatternError, build_brickwork, pattern_unitary
from .prep import PrepError, PrepStateFamily, check_weak, tripled_family
from .reductions.two_state import TwoStateError, two_state_bounds
from .states import EIGHT_ANGLES, PI, Angle, StateError, plus_dm
from .ubqc import BobBehavior, UBQCError, run_ubqc

UBQC_TOL = 1e-9
DEFAULT_SIZES = ((1, 1), (1, 2), (2, 1))
FAMILIES = ("honest8", "cubed", "nonweak", "custom")


class ConfigError(click.ClickException):
    exit_code = 2


def _versions() -> dict:
    return {"blindsim": __version__, "numpy": np.__version__, "click": metadata.version("click"), "python": platform.python_version()}


def _plain(x):
    if isinstance(x, Angle):
        return str(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(_plain(k)): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _emit(records: list[dict], fmt: str, out: str | None) -> None:
    if fmt == "csv":
        buf = io.StringIO()
        fields = list(records[0])
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: json.dumps(v, ensure_ascii=False) if isinstance(v, (dict, list)) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        text = "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in records)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _meta(command: str, seed: int, config: dict) -> dict:
    return {"record": "meta", "command": command, "seed": seed, "versions": _versions(), "config": _plain(config)}


@click.group()
def main() -> None:
    """Simulate blind delegated quantum computation and check its security claims."""


@main.command()
@click.option("--rows", type=int, default=2, show_default=True)
@click.option("--cols", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--deviation", type=click.Choice(["honest", "mixed"]), default="honest", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def ubqc(rows: int, cols: int, seed: int, deviation: str, fmt: str, out: str | None) -> None:
    """Run one blind computation on a random brickwork pattern and input."""
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    rng = np.random.default_rng(seed)
    try:
        pattern = build_brickwork(rows, cols)
    except PatternError as exc:
        raise ConfigError(str(exc)) from exc
    pattern = pattern.with_angles([Angle.k8(int(k)) for k in rng.integers(0, 8, size=len(pattern.measured))])
    d = 2**rows
    vec = rng.normal(size=d) + 1j * rng.normal(size=d)
    vec /= np.linalg.norm(vec)
    rho = np.outer(vec, vec.conj())
    bob = BobBehavior.replace_with_mixed(pattern) if deviation == "mixed" else None
    try:
        output, transcript, _ = run_ubqc(pattern, rho, rng, bob=bob)
    except UBQCError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    u = pattern_unitary(pattern)
    residual = 0.5 * trace_norm(output - u @ rho @ u.conj().T)
    ok = residual <= UBQC_TOL or deviation != "honest"
    config = {"rows": rows, "cols": cols, "deviation": deviation, "format": fmt}
    records = [_meta("ubqc", seed, config)] if fmt == "json" else []
    body = {
        "record": "ubqc",
        "rows": rows,
        "cols": cols,
        "angles": [pattern.angles[s] for s in pattern.measured],
        "deltas": list(transcript.deltas()),
        "outcomes": [e.bit for e in transcript.events if e.kind == "outcome"],
        "residual": float(residual),
        "tolerance": UBQC_TOL,
        "pass": bool(ok),
    }
    if fmt == "csv":
        body.update(seed=seed, versions=_versions(), config=config)
    records.append(_plain(body))
    _emit(records, fmt, out)
    sys.exit(0 if ok else 1)


def _parse_ns(text: str) -> list[int]:
    try:
        ns = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"--N expects comma-separated integers, got {text!r}") from exc
    if not ns:
        raise ConfigError("--N is empty")
    odd = [n for n in ns if n % 2 or n < 2]
    if odd:
        raise ConfigError(f"--N values must be even and at least 2: {odd}")
    return ns


@main.command()
@click.option("--N", "n_list", default="4,8,12", show_default=True, help="Comma-separated even qubit counts.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--representation", type=click.Choice(["auto", "full", "blocks"]), default="auto", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def bounds(n_list: str, seed: int, representation: str, fmt: str, out: str | None) -> None:
    """Exact distances for the two-state construction, one record per N."""
    ns = _parse_ns(n_list)
    config = {"N": ns, "representation": representation, "format": fmt}
    rows = []
    all_pass = True
    for n in ns:
        try:
            rec = two_state_bounds(n, representation)
        except TwoStateError as exc:
            raise ConfigError(str(exc)) from exc
        dist = rec.distribution
        row = {
            "N": n,
            "p0": dist[Angle(0)],
            "p_pi": dist[PI],
            "p_half": dist[Angle(Fraction(1, 2))],
            "p_3half": dist[Angle(Fraction(3, 2))],
            "eps_corr": rec.eps_corr,
        }
        for k, v in rec.values.items():
            if k != "eps_corr":
                row[k] = v
        row["purification_distances"] = list(rec.purification_distances)
        row["delta_chain"] = rec.delta_chain
        for k, v in rec.claimed_bounds.items():
            row[f"bound_{k}"] = v
        for k, v in rec.passes.items():
            row[f"pass_{k}"] = v
        row["method"] = rec.method
        all_pass &= all(rec.passes.values())
        rows.append(row)
    if fmt == "csv":
        for r in rows:
            r.update(seed=seed, versions=_versions(), config=config)
        records = [_plain(r) for r in rows]
    else:
        records = [_meta("bounds", seed, config)] + [_plain({"record": "bounds", **r}) for r in rows]
    _emit(records, fmt, out)
    sys.exit(0 if all_pass else 1)


def _nonweak_family() -> PrepStateFamily:
    zero = np.diag([1.0, 0.0]).astype(complex)
    return PrepStateFamily({a: zero if a in (Angle(0), PI) else plus_dm(a) for a in EIGHT_ANGLES})


def _entry(x) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)):
        return complex(x)
    raise ValueError(f"matrix entry {x!r} is neither a number nor a [re, im] pair")


def load_family(path: str) -> PrepStateFamily:
    """Read {"states": {"k/4": [[entry, ...], ...]}} where entries are numbers or [re, im] pairs."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        raw = data["states"]
        states = {Angle.parse(k): np.array([[_entry(x) for x in row] for row in m]) for k, m in raw.items()}
        return PrepStateFamily(states)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, StateError, PrepError) as exc:
        raise ConfigError(f"cannot load family from {path}: {exc}") from exc


@main.command()
@click.option("--family", type=click.Choice(FAMILIES), default="honest8", show_default=True)
@click.option("--file", "family_file", type=str, default=None, help="JSON family for --family custom.")
@click.option("--rows", type=int, default=None, help="Sweep a single size instead of the default set.")
@click.option("--cols", type=int, default=None)
@click.option("--deviation", type=click.Choice(("all",) + REPORT_PRESETS), default="all", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def blindness(family: str, family_file, rows, cols, deviation: str, seed: int, fmt: str, out: str | None) -> None:
    """Compare Bob's views of different computations under a preparation family."""
    if family == "custom":
        if not family_file:
            raise ConfigError("--family custom needs --file")
        fam = load_family(family_file)
    elif family_file:
        raise ConfigError("--file is only used with --family custom")
    else:
        fam = {"honest8": PrepStateFamily.honest, "cubed": tripled_family, "nonweak": _nonweak_family}[family]()
    if (rows is None) != (cols is None):
        raise ConfigError("give both --rows and --cols or neither")
    sizes = DEFAULT_SIZES if rows is None else ((rows, cols),)
    reports = REPORT_PRESETS if deviation == "all" else (deviation,)
    try:
        weak = check_weak(fam).accepted
        blind = expected_blind(fam)
    except PrepError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        sweep = blindness_sweep(sizes, {family: fam}, reports, seed=seed)
    except (AnalyzerError, PatternError, UBQCError) as exc:
        raise ConfigError(str(exc)) from exc
    worst = max(r.max_distance for r in sweep)
    ok = worst <= PERFECT_TOL if blind else worst >= VIOLATION_TOL
    config = {"family": family, "file": family_file, "sizes": [list(s) for s in sizes], "deviation": deviation, "format": fmt}
    cells = [
        {"record": "cell", "rows": r.rows, "cols": r.cols, "family": r.family, "reports": r.reports, "pairs": r.pairs, "max_distance": r.max_distance}
        for r in sorted(sweep, key=lambda r: (r.rows, r.cols, r.reports))
    ]
    summary = {
        "record": "summary",
        "weakly_correlated": weak,
        "eight_angles": len(fam.angles) == len(EIGHT_ANGLES),
        "expected": "blind" if blind else "violation",
        "max_distance": worst,
        "threshold": PERFECT_TOL if blind else VIOLATION_TOL,
        "consistent": ok,
    }
    if fmt == "csv":
        records = [_plain({**c, **{k: v for k, v in summary.items() if k != "record"}, "seed": seed, "versions": _versions(), "config": config}) for c in cells]
    else:
        records = [_meta("blindness", seed, config)] + [_plain(c) for c in cells] + [_plain(summary)]
    _emit(records, fmt, out)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
