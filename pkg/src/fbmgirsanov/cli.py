"""Command-line interface: ``fbmgirsanov {simulate,transform,density,verify,mle}``.

Paths are CSV files with header ``t,value``; every command writes a JSON
report (``report.json`` in ``--out``) and prints a one-line summary. Floats are
written with ``repr`` so a file read back gives the same doubles.

Exit codes: 0 ok, 1 verification failure, 2 usage, 3 numerical failure,
4 malformed input, 5 degenerate likelihood.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import PreconditionError, SampledPath, TimeGrid, as_hurst
from .fbm_sim import FouParams, RngSeed, euler_fou, fbm_paths_cholesky, fbm_paths_circulant, CHOLESKY_MAX_N
from .girsanov import DegenerateError, DriftSpec, density_for_drifted_path, fou_mle
from .transform import forward_values, reconstruct_values
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC, EXIT_INPUT, EXIT_DEGENERATE = range(6)
H_RANGE = (0.01, 0.99)
GRID_TOL = 1e-9


class InputFormatError(ValueError):
    pass


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# path files


def write_path(path: Path, t: np.ndarray, values: np.ndarray) -> None:
    lines = ["t,value"]
    lines += [f"{float(a)!r},{float(b)!r}" for a, b in zip(t, values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_path(path: Path) -> SampledPath:
    """Parse and validate a path file; raises :class:`InputFormatError`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from exc
    rows = text.splitlines()
    if not rows or rows[0].strip() != "t,value":
        raise InputFormatError(f"{path}: first line must be 't,value'")
    data = [r for r in rows[1:] if r.strip()]
    if len(data) < 2:
        raise InputFormatError(f"{path}: need at least two data rows")
    try:
        arr = np.array([[float(x) for x in r.split(",")] for r in data])
    except ValueError as exc:
        raise InputFormatError(f"{path}: non-numeric entry ({exc})") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputFormatError(f"{path}: every row must have two columns")
    if not np.all(np.isfinite(arr)):
        raise InputFormatError(f"{path}: non-finite value")
    t, v = arr[:, 0], arr[:, 1]
    n = len(t) - 1
    if t[0] != 0.0:
        raise InputFormatError(f"{path}: first time must be 0, got {t[0]!r}")
    T = t[-1]
    if not T > 0 or np.any(np.diff(t) <= 0):
        raise InputFormatError(f"{path}: times must be strictly increasing")
    grid = TimeGrid(n, float(T))
    if np.max(np.abs(t - grid.nodes)) > GRID_TOL * T:
        raise InputFormatError(f"{path}: times are not uniformly spaced")
    return SampledPath(grid, v)


# --------------------------------------------------------------------------
# argument types


def _hurst(text: str) -> float:
    try:
        H = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not H_RANGE[0] < H < H_RANGE[1]:
        raise argparse.ArgumentTypeError(f"H must lie in {H_RANGE}, got {H}")
    return H


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be finite")
    return v


def _positive(text: str) -> float:
    v = _finite(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _drift(text: str) -> DriftSpec:
    try:
        return DriftSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbmgirsanov", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate fBm or fOU paths")
    s.add_argument("--hurst", type=_hurst, required=True)
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--horizon", type=_positive, default=1.0)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--paths", type=_positive_int, default=1)
    s.add_argument("--model", choices=["fbm", "fou"], default="fbm")
    s.add_argument("--rho", type=_finite, default=0.0)
    s.add_argument("--mean", type=_finite, default=0.0)
    s.add_argument("--x0", type=_finite, default=0.0)
    s.add_argument("--out", type=Path, required=True)

    t = sub.add_parser("transform", help="compute Y, M, B and the reconstruction")
    t.add_argument("--in", dest="inp", type=Path, required=True)
    t.add_argument("--hurst", type=_hurst, required=True)
    t.add_argument("--emit", choices=["Y", "M", "B", "recon"], nargs="+", default=["Y", "M", "B"])
    t.add_argument("--source", choices=["path", "B"], default="path",
                   help="input is a path (default) or an innovation path B")
    t.add_argument("--reference", type=Path, help="path to compare the reconstruction with (--source B)")
    t.add_argument("--x0", type=_finite, default=0.0, help="subtracted from the input before transforming")
    t.add_argument("--out", type=Path, required=True)

    d = sub.add_parser("density", help="Girsanov log-density of a path")
    d.add_argument("--in", dest="inp", type=Path, required=True)
    d.add_argument("--hurst", type=_hurst, required=True)
    d.add_argument("--drift", type=_drift, required=True, help="'zero' or 'fou:rho,m'")
    d.add_argument("--x0", type=_finite, default=0.0)
    d.add_argument("--out", type=Path, required=True)

    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--suite", choices=sorted(SUITES), default="all")
    v.add_argument("--seed", type=_seed, default=1)
    v.add_argument("--fast", action="store_true")
    v.add_argument("--out", type=Path)

    m = sub.add_parser("mle", help="fOU drift estimate rhoHat")
    m.add_argument("--in", dest="inp", type=Path, required=True)
    m.add_argument("--hurst", type=_hurst, required=True)
    m.add_argument("--mean", type=_finite, default=0.0)
    m.add_argument("--x0", type=_finite, default=0.0)
    m.add_argument("--out", type=Path, required=True)
    return p


# --------------------------------------------------------------------------
# commands


def _params(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, DriftSpec):
            v = str(v)
        out["in" if k == "inp" else k] = v
    return out


def _write_report(out_dir: Path | None, args, results: dict, caught) -> None:
    report = {
        "command": args.command,
        "params": _params(args),
        "results": results,
        "warnings": [f"{w.category.__name__}: {w.message}" for w in caught],
        "version": __version__,
    }
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(text, encoding="utf-8", newline="\n")
    for w in caught:
        print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)


def _sampler(grid: TimeGrid) -> str:
    return "circulant" if grid.n & (grid.n - 1) == 0 else "cholesky"


def cmd_simulate(args) -> tuple[dict, str]:
    grid = TimeGrid(args.n, args.horizon)
    sampler = _sampler(grid)
    if sampler == "cholesky" and grid.n > CHOLESKY_MAX_N:
        raise UsageError(f"--n must be a power of two or at most {CHOLESKY_MAX_N}")
    seed = RngSeed(args.seed)
    draw = fbm_paths_circulant if sampler == "circulant" else fbm_paths_cholesky
    W = draw(grid, args.hurst, seed, args.paths)
    if args.model == "fou":
        paths = euler_fou(W, FouParams(args.rho, args.mean, args.x0), grid.dt)
    else:
        paths = args.x0 + W if args.x0 != 0.0 else W
    args.out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, row in enumerate(paths):
        name = f"path_{k:04d}.csv"
        write_path(args.out / name, grid.nodes, row)
        files.append(name)
    results = {"files": files, "sampler": sampler, "dt": grid.dt,
               "terminal_values": [float(x) for x in paths[:, -1]]}
    return results, f"simulate: wrote {len(files)} path(s) to {args.out}"


def cmd_transform(args) -> tuple[dict, str]:
    src = read_path(args.inp)
    grid, H = src.grid, as_hurst(args.hurst)
    results: dict = {}
    args.out.mkdir(parents=True, exist_ok=True)
    if args.source == "B":
        if src.values[0] != 0:
            raise PreconditionError("an innovation path must start at 0")
        if set(args.emit) - {"recon"}:
            raise UsageError("with --source B only --emit recon is available")
        R = reconstruct_values(src.values, grid, H)
        write_path(args.out / "recon.csv", grid.nodes, R)
        results["files"] = ["recon.csv"]
        if args.reference is not None:
            ref = read_path(args.reference)
            if ref.grid != grid:
                raise InputFormatError("reference path is on a different grid")
            W = ref.values - args.x0
            results["roundtrip_rel_l2_error"] = float(np.linalg.norm(R - W) / np.linalg.norm(W))
        return results, f"transform: reconstructed {args.inp}"
    W = src.values - args.x0
    if W[0] != 0:
        raise PreconditionError(f"path starts at {src.values[0]!r}; pass --x0 to shift it to 0")
    Y, M, B = forward_values(W, grid, H)
    out = {"Y": Y, "M": M, "B": B}
    files = []
    for name in ("Y", "M", "B"):
        if name in args.emit:
            write_path(args.out / f"{name}.csv", grid.nodes, out[name])
            files.append(f"{name}.csv")
    qv = float(np.sum(np.diff(M) ** 2))
    qv_theory = H.c2**2 * grid.T ** (2 - 2 * H.H)
    results.update(qv_M=qv, qv_M_theory=qv_theory, qv_rel_error=abs(qv / qv_theory - 1))
    if "recon" in args.emit:
        R = reconstruct_values(B, grid, H)
        write_path(args.out / "recon.csv", grid.nodes, R)
        files.append("recon.csv")
        norm = np.linalg.norm(W)
        results["roundtrip_rel_l2_error"] = float(np.linalg.norm(R - W) / norm) if norm > 0 else 0.0
    results["files"] = files
    return results, f"transform: qv_rel_error={results['qv_rel_error']:.4g}"


def cmd_density(args) -> tuple[dict, str]:
    X = read_path(args.inp)
    if X.values[0] != args.x0:
        raise PreconditionError(f"path starts at {X.values[0]!r}, but --x0 is {args.x0!r}")
    rep = density_for_drifted_path(X, args.drift, args.hurst, args.x0)
    results = {"logDensity": rep.logDensity, "itoSum": rep.itoSum, "l2NormSq": rep.l2NormSq,
               "singularFlag": bool(rep.singularFlag)}
    return results, f"density: logDensity={rep.logDensity!r}"


def cmd_mle(args) -> tuple[dict, str]:
    X = read_path(args.inp)
    if X.values[0] != args.x0:
        raise PreconditionError(f"path starts at {X.values[0]!r}, but --x0 is {args.x0!r}")
    rep = fou_mle(X, args.mean, args.x0, args.hurst)
    results = {"rhoHat": rep.rhoHat, "score": rep.score, "information": rep.information,
               "logLikAtHat": rep.logLikAtHat}
    return results, f"mle: rhoHat={rep.rhoHat!r}"


def cmd_verify(args) -> tuple[dict, str]:
    res = run_suite(args.suite, args.seed, args.fast, report=lambda r: print(r.line(), file=sys.stderr))
    failed = [r.key for r in res if not r.passed]
    results = {"checks": [r.as_json() for r in res], "passed": not failed, "failed": failed}
    summary = f"verify: {len(res) - len(failed)}/{len(res)} checks passed"
    return results, summary


COMMANDS = {"simulate": cmd_simulate, "transform": cmd_transform, "density": cmd_density,
            "verify": cmd_verify, "mle": cmd_mle}


def _failing_module(exc: BaseException) -> str:
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        p = Path(frame.filename)
        if p.parent.name == "fbmgirsanov" and p.stem != "cli":
            return p.stem
    return "cli"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            results, summary = COMMANDS[args.command](args)
        except InputFormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except PreconditionError as exc:
            print(f"error: {_failing_module(exc)}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except DegenerateError as exc:
            print(f"error: {_failing_module(exc)}: {exc}", file=sys.stderr)
            _write_report(getattr(args, "out", None), args, {"degenerate": str(exc)}, caught)
            return EXIT_DEGENERATE
        except UsageError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError, MemoryError) as exc:
            print(f"error: numerical failure in {_failing_module(exc)}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    _write_report(getattr(args, "out", None), args, results, caught)
    print(summary)
    if args.command == "verify" and not results["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
