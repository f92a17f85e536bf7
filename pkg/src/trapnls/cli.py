"""Command line entry point: ``trapnls {precompute-tensor,run,validate,inspect-cache}``.

Exit codes: 0 ok, 1 some acceptance check failed, 2 invalid input or
configuration, 3 non-finite values during an evolution, 4 I/O or cache error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NAN, EXIT_IO = 0, 1, 2, 3, 4


def _set_threads(n: int | None) -> None:
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory (overrides [paths] out)")
    common.add_argument("--cache", help="tensor cache file (overrides [paths] cache)")
    common.add_argument("--threads", type=int, help="BLAS/FFT thread count")
    common.add_argument("--seed", type=int, help="seed for random test fields")

    p = argparse.ArgumentParser(prog="trapnls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("precompute-tensor", parents=[common], help="write the interaction tensor cache")
    run = sub.add_parser("run", parents=[common], help="run one experiment or evolution")
    run.add_argument("experiment", nargs="?", help="experiment id (default: [run] experiment)")
    val = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    val.add_argument("--only", help="comma separated check numbers")
    ins = sub.add_parser("inspect-cache", parents=[common], help="print a cache header")
    ins.add_argument("path", nargs="?", help="cache file (default: --cache)")
    return p


def _load(args):
    from .config import load_config

    over = {("paths", "out"): args.out, ("paths", "cache"): args.cache,
            ("run", "threads"): args.threads, ("run", "seed"): args.seed}
    if getattr(args, "experiment", None):
        over[("run", "experiment")] = args.experiment
    return load_config(args.config, over)


def _write_outputs(cfg, report, out_dir: Path) -> list[Path]:
    from .cache import atomic_write, save_mixed, save_profile

    stem = f"{report.id}-{cfg.digest()}"
    paths = []
    if report.series:
        p = out_dir / f"{stem}.csv"
        atomic_write(p, report.csv_text().encode())
        paths.append(p)
    if report.records:
        p = out_dir / f"{stem}.jsonl"
        atomic_write(p, "".join(json.dumps(r, sort_keys=True) + "\n" for r in report.records).encode())
        paths.append(p)
    if report.snapshot:
        kind, t, state = report.snapshot
        b = state.basis
        if kind == "prf":
            p = out_dir / f"{stem}.prf"
            save_profile(p, b.d, b.n_max, state.dxi, float(t), state.coeffs)
        else:
            p = out_dir / f"{stem}.mxf"
            save_mixed(p, b.d, b.n_max, state.grid.L, float(t), state.physical())
        paths.append(p)
    p = out_dir / f"{stem}.json"
    atomic_write(p, report.json_text({"config": cfg.resolved()}).encode())
    paths.append(p)
    return paths


def cmd_precompute_tensor(cfg) -> int:
    from .cache import encode_tensor, read_tensor_header, atomic_write
    from .errors import ValidationError
    from .hermite import build_basis
    from .resonant import build_interaction_tensor

    spec = cfg.basis_spec()
    path = Path(cfg.get("paths", "cache"))
    if path.exists():
        head = read_tensor_header(path)
        if (head["d"], head["n_max"]) != (spec.d, spec.n_max):
            raise ValidationError(
                f"{path} holds d={head['d']}, n_max={head['n_max']} but the config asks for "
                f"d={spec.d}, n_max={spec.n_max}; remove it or choose another --cache"
            )
    tensor = build_interaction_tensor(build_basis(spec))
    atomic_write(path, encode_tensor(tensor))
    print(json.dumps({"cache": str(path), "d": spec.d, "n_max": spec.n_max, "count": tensor.count}))
    return EXIT_OK


def cmd_inspect_cache(path) -> int:
    from .cache import read_tensor_header

    print(json.dumps(read_tensor_header(path), sort_keys=True))
    return EXIT_OK


def cmd_run(cfg) -> int:
    from .errors import ValidationError
    from .runners import RUNNERS

    exp = cfg.experiment
    if exp not in RUNNERS:
        raise ValidationError(f"unknown experiment {exp!r}; choose from {', '.join(sorted(RUNNERS))}")
    report = RUNNERS[exp](cfg)
    for p in _write_outputs(cfg, report, Path(cfg.get("paths", "out"))):
        print(p)
    ok = report.verdicts.get("passed", True)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_validate(cfg, only=None) -> int:
    from .cache import atomic_write
    from .errors import ValidationError
    from .experiments import _plain
    from .validation import CHECKS, DEFAULTS, _params, run_validation

    params = {"seed": cfg.seed} | cfg.validate_params()
    unknown = sorted(set(params) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown keys in [validate]: {unknown}")
    if only is not None and not only <= {c[0] for c in CHECKS}:
        raise ValidationError(f"no such checks: {sorted(only - {c[0] for c in CHECKS})}")
    results = run_validation(params, only, progress=lambda r: print(r.line(), flush=True))
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    doc = {"config": cfg.resolved(), "parameters": _params(params),
           "checks": [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]}
    out = Path(cfg.get("paths", "out")) / f"validate-{cfg.digest()}.json"
    atomic_write(out, (json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n").encode())
    return EXIT_OK if n_pass == len(results) else EXIT_FAILED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    from .errors import CacheFormatError, NumericalAbort, ValidationError

    try:
        if args.command == "inspect-cache" and args.path:
            return cmd_inspect_cache(args.path)
        cfg = _load(args)
        if args.command == "precompute-tensor":
            return cmd_precompute_tensor(cfg)
        if args.command == "inspect-cache":
            return cmd_inspect_cache(cfg.get("paths", "cache"))
        if args.command == "run":
            return cmd_run(cfg)
        only = None
        if args.only:
            try:
                only = {int(x) for x in args.only.split(",") if x.strip()}
            except ValueError:
                raise ValidationError(f"--only expects comma separated integers, got {args.only!r}") from None
        return cmd_validate(cfg, only)
    except NumericalAbort as exc:
        return _fail(EXIT_NAN, exc, time=exc.time)
    except CacheFormatError as exc:
        return _fail(EXIT_IO, exc)
    except ValidationError as exc:
        return _fail(EXIT_INVALID, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)


def _fail(code: int, exc: Exception, **extra) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    doc.update({k: v for k, v in extra.items() if v is not None and not (isinstance(v, float) and math.isnan(v))})
    print(json.dumps(doc), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
