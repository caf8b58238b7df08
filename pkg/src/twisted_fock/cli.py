"""Command-line harness: ``verify``, ``experiment`` and ``eval``.

Configuration is a flat ``key=value`` file; any ``--key value`` pair on the
command line overrides it. Tolerances are set with ``tol.<check-name>``.
Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .conv import (
    DeltaIndex,
    PRESETS,
    algebra_convolve,
    boundedness_diagnostic,
    geller_basis,
    geller_constant,
    geller_gamma_ratio,
    preset_matrix,
    uncertainty_experiment,
    weight_bound_check,
)
from .fock import apply_U, gauss_bargmann
from .hermite import HermiteBasis
from .kernels import KernelParams, bergman_kernel, bergman_weight, fock_kernel, fock_weight, heat_kernel
from .suite import ANCHORS, Context, check_names, run_checks

EXPERIMENTS = ("uncertainty", "boundedness", "algebra", "geller")
EVAL_TARGETS = ("heat_kernel", "fock_weight", "bergman_weight", "fock_kernel", "bergman_kernel", "G", "UG")


class ConfigError(ValueError):
    """Malformed or inadmissible configuration (exit code 2)."""


@dataclass
class RunConfig:
    n: int = 1
    lam: float = 1.0
    K: int = 20
    Q: int = 64
    t: float = 0.5
    K_list: tuple[int, ...] = (8, 12, 16, 20)
    tolerances: dict[str, float] = field(default_factory=dict)
    experiment: str = "uncertainty"
    preset: str = "rank-one-rotated"
    out: str = "reports"
    seed: int = 42
    only: tuple[str, ...] = ()

    def validate(self) -> "RunConfig":
        if self.lam == 0:
            raise ConfigError("lambda != 0 is required (the twisted structure degenerates at lambda = 0)")
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if self.K < 1 or self.Q < 2 or self.t <= 0:
            raise ConfigError("K >= 1, Q >= 2 and t > 0 are required")
        if not self.K_list or any(b <= a for a, b in zip(self.K_list, self.K_list[1:])) or self.K_list[0] < 1:
            raise ConfigError("K_list must be a strictly increasing list of positive integers")
        if any(not v > 0 for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        unknown = set(self.tolerances) - set(check_names())
        if unknown:
            raise ConfigError(f"unknown check names in tolerances: {', '.join(sorted(unknown))}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        missing = [sel for sel in self.only if not select_checks((sel,))]
        if missing:
            raise ConfigError(f"no checks match: {', '.join(missing)}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        return self

    def context(self) -> Context:
        return Context(n=self.n, lam=self.lam, K=self.K, Q=self.Q, t=self.t, K_list=self.K_list, seed=self.seed)


def select_checks(selectors) -> list[str]:
    """Check names equal to a selector or starting with ``selector.``."""
    return [c for c in check_names() if any(c == s or c.startswith(s + ".") for s in selectors)]


_ALIASES = {"lambda": "lam", "k_list": "K_list", "k-list": "K_list", "k": "K", "q": "Q"}


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def apply_settings(cfg: RunConfig, items: dict[str, str]) -> RunConfig:
    """Apply string ``key -> value`` settings (config file or overrides) to ``cfg``."""
    for raw_key, value in items.items():
        key = raw_key.strip().replace("-", "_") if not raw_key.startswith("tol.") else raw_key.strip()
        key = _ALIASES.get(key, _ALIASES.get(key.lower(), key))
        value = value.strip()
        try:
            if key.startswith("tol."):
                cfg.tolerances[key[4:]] = float(value)
            elif key == "K_list":
                cfg.K_list = _parse_int_list(value)
            elif key in ("n", "K", "Q", "seed"):
                setattr(cfg, key, int(value))
            elif key in ("lam", "t"):
                setattr(cfg, key, float(value))
            elif key == "only":
                cfg.only = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key in ("experiment", "preset", "out"):
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"unknown configuration key {raw_key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {raw_key!r}: {value!r}") from exc
    return cfg


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    items: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        items[k.strip()] = v.strip()
    return items


def _overrides(extra: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            val = next(it, None)
            if val is None:
                raise ConfigError(f"missing value for --{key}")
        out[key] = val
    return out


def build_config(args: argparse.Namespace, extra: list[str]) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        apply_settings(cfg, read_config_file(args.config))
    settings = _overrides(extra)
    for name in ("seed", "preset", "out", "only"):
        if getattr(args, name, None) is not None:
            settings[name] = str(getattr(args, name))
    if getattr(args, "k_list", None):
        settings["K_list"] = args.k_list
    if getattr(args, "experiment", None):
        settings["experiment"] = args.experiment
    apply_settings(cfg, settings)
    return cfg.validate()


# reports


def environment_stamp() -> dict:
    return {
        "package": f"twisted_fock {__version__}",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "timestamp": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def _stamp_line(env: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in env.items())


def _fmt(v) -> str:
    return repr(float(v))


def write_report(report: dict, rows: list[tuple], header: tuple[str, ...], out_dir: str, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>-<timestamp>.json`` and ``.csv``; the CSV's first line is the environment stamp."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    jpath, cpath = out / f"{stem}-{stamp}.json", out / f"{stem}-{stamp}.csv"
    jpath.write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    cpath.write_text(render_csv(rows, header, report["environment"]))
    return jpath, cpath


def render_csv(rows: list[tuple], header: tuple[str, ...], env: dict) -> str:
    buf = io.StringIO()
    buf.write(_stamp_line(env) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(type(obj).__name__)


def _clean(v):
    """JSON-safe float (NaN and inf become strings)."""
    v = float(v)
    return v if np.isfinite(v) else str(v)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("TWISTED_FOCK_THREADS", "1")))
    except ValueError:
        return 1


# verify


def run_verify(cfg: RunConfig) -> tuple[dict, list[tuple], tuple[str, ...]]:
    if cfg.n != 1:
        raise ConfigError("verify runs at n = 1 (the Geller checks use n = 2 internally)")
    only = select_checks(cfg.only) if cfg.only else None
    results = run_checks(cfg.context(), cfg.tolerances, only=only, workers=_workers())
    records = []
    for r in results:
        rec = r.as_dict()
        rec["value"], rec["target"] = _clean(r.value), _clean(r.target)
        rec["anchor_text"] = ANCHORS.get(r.anchor, "plumbing")
        records.append(rec)
    failed = [r.name for r in results if r.status == "fail"]
    report = {
        "command": "verify",
        "config": _config_dict(cfg),
        "records": records,
        "summary": {"total": len(results), "failed": failed, "skipped": [r.name for r in results if r.status.startswith("skipped")]},
        "environment": environment_stamp(),
    }
    rows = [(r.name, r.status, r.value, r.target, r.tol) for r in results]
    return report, rows, ("check", "status", "value", "target", "tolerance")


def _config_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["K_list"] = list(cfg.K_list)
    d["only"] = list(cfg.only)
    return d


# experiments


def experiment_basis(cfg: RunConfig) -> HermiteBasis:
    K = max(cfg.K_list[-1] + 4, 40) if cfg.n == 1 else cfg.K_list[-1]
    return HermiteBasis(cfg.n, cfg.lam, K)


def _trace_rows(tr_phi, tr_U) -> list[tuple]:
    return [(K, a, b) for K, a, b in zip(tr_phi.K_list, tr_phi.norms, tr_U.norms)]


def _trace_dict(tr) -> dict:
    return {"K_list": list(tr.K_list), "norms": [_clean(v) for v in tr.norms], "skipped": list(tr.skipped), "verdict": tr.verdict}


def run_experiment(cfg: RunConfig) -> tuple[dict, list[tuple], tuple[str, ...]]:
    header = ("K", "norm_phi", "norm_Uphi")
    result: dict
    if cfg.experiment == "geller":
        B = HermiteBasis(2, cfg.lam, 12)
        deltas = [DeltaIndex(0, 0), DeltaIndex(1, 0), DeltaIndex(0, 1), DeltaIndex(1, 1)]
        K_values = tuple(range(6, 13))
        bounds = {f"{d.p},{d.q}": weight_bound_check(2, cfg.lam, d, K_values) for d in deltas}
        constants = {f"{d.p},{d.q}": [_clean(geller_constant(B, k, d)) if geller_basis(B, k, d)[1] else "nan" for k in range(B.K + 1)] for d in deltas}
        ratios = {f"{d.p},{d.q}": [_clean(geller_gamma_ratio(2, k, d, cfg.lam)) for k in range(max(d.p, d.q), B.K - d.p - d.q)] for d in deltas}
        result = {
            "weight_bounds": {k: {"norms": list(v.norms), "max": v.max, "spread": v.spread} for k, v in bounds.items()},
            "geller_constants": constants,
            "gamma_ratios": ratios,
        }
        header = ("K",) + tuple(f"weight_{k.replace(',', '')}" for k in bounds)
        rows = [(K,) + tuple(v.norms[i] for v in bounds.values()) for i, K in enumerate(K_values)]
    else:
        B = experiment_basis(cfg)
        M = preset_matrix(cfg.preset, B)
        if cfg.experiment == "uncertainty":
            rep = uncertainty_experiment(B, M, cfg.K_list, cfg.t, preset=cfg.preset)
            tr_phi, tr_U = rep.trace_phi, rep.trace_Uphi
            result = {
                "verdict": rep.verdict,
                "operator_norm": rep.op_norm,
                "pointwise_ratio": rep.witness_ratio,
                "spectral_C": None if rep.spectral_C is None else [_clean(v) for v in rep.spectral_C],
                "character_convention": "chi_(p,0)(e^{i theta}) = e^{-i p theta}, chi_(0,q)(e^{i theta}) = e^{i q theta}",
            }
        else:
            phi = gauss_bargmann(B, M, cfg.t)
            if cfg.experiment == "algebra":
                phi = algebra_convolve(phi, phi)
            tr_phi = boundedness_diagnostic(phi, cfg.K_list)
            tr_U = boundedness_diagnostic(apply_U(phi), cfg.K_list)
            result = {"verdict": tr_phi.verdict, "plateau_value": _clean(tr_phi.plateau_value), "operator_norm": float(np.linalg.norm(M, 2))}
        result["trace_phi"] = _trace_dict(tr_phi)
        result["trace_Uphi"] = _trace_dict(tr_U)
        rows = _trace_rows(tr_phi, tr_U)
    report = {
        "command": "experiment",
        "experiment": cfg.experiment,
        "anchor": "uncertainty/dichotomy" if cfg.experiment == "uncertainty" else "plumbing",
        "config": _config_dict(cfg),
        "result": result,
        "environment": environment_stamp(),
    }
    return report, rows, header


# eval


def parse_points(text: str, n: int) -> np.ndarray:
    """``"x1,u1;x2,u2"`` (complex entries allowed, e.g. ``0.1+0.2j``) into an (N, 2n) array."""
    try:
        pts = [[complex(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse points {text!r}") from exc
    arr = np.array(pts, dtype=complex)
    if arr.ndim != 2 or arr.shape[1] != 2 * n:
        raise ConfigError(f"each point needs {2 * n} comma-separated coordinates")
    return arr


def run_eval(cfg: RunConfig, target: str, points: str, ab: str | None) -> np.ndarray:
    pts = parse_points(points, cfg.n)
    params = KernelParams(cfg.lam, cfg.t, cfg.n)
    if target == "heat_kernel":
        return heat_kernel(params, pts)
    if target == "fock_weight":
        return fock_weight(params, pts)
    if target == "bergman_weight":
        return bergman_weight(params, pts)
    if target in ("fock_kernel", "bergman_kernel"):
        if ab is None:
            raise ConfigError(f"{target} needs --ab")
        q = parse_points(ab, cfg.n)
        if len(q) not in (1, len(pts)):
            raise ConfigError("--ab must hold one point or as many as --points")
        q = np.broadcast_to(q, pts.shape)
        fn = fock_kernel if target == "fock_kernel" else bergman_kernel
        return np.array([fn(params, p, a) for p, a in zip(pts, q)])
    B = HermiteBasis(cfg.n, cfg.lam, cfg.K)
    F = gauss_bargmann(B, preset_matrix(cfg.preset, B), cfg.t)
    return (F if target == "G" else apply_U(F))(pts)


# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twisted-fock", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--out", help="report directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--k-list", dest="k_list", help="comma-separated truncation levels")
    common.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    ver = sub.add_parser("verify", parents=[common], help="run the verification suite")
    ver.add_argument("--only", help="comma-separated check names or prefixes (e.g. hermite,U)")
    e = sub.add_parser("experiment", parents=[common], help="run one experiment")
    e.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    v = sub.add_parser("eval", parents=[common], help="evaluate a kernel or transform at points")
    v.add_argument("target", choices=EVAL_TARGETS)
    v.add_argument("--points", required=True, help='points as "x1,u1;x2,u2"')
    v.add_argument("--ab", help="second point for the reproducing kernels")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args, extra)
        if args.command == "eval":
            for val in run_eval(cfg, args.target, args.points, args.ab):
                print(f"{val.real:.16g} {val.imag:+.16g}j")
            return 0
        if args.command == "verify":
            report, rows, header = run_verify(cfg)
            stem = "verify"
        else:
            report, rows, header = run_experiment(cfg)
            stem = cfg.experiment
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    jpath, cpath = write_report(report, rows, header, cfg.out, stem)
    if args.command == "verify":
        for rec in report["records"]:
            print(f"{rec['status']:>15}  {rec['name']:<38} value={rec['value']!s:<24} tol={rec['tol']:g}")
        failed = report["summary"]["failed"]
        print(f"{len(report['records'])} checks, {len(failed)} failed; report {jpath}")
        return 1 if failed else 0
    res = report["result"]
    if "verdict" in res:
        print(f"{cfg.experiment} [{cfg.preset}]: verdict {res['verdict']}")
    for row in rows:
        print("  " + "  ".join(str(v) for v in row))
    print(f"report {jpath}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
