"""Command line front end: validate, break, certify, defect, example.

Exit codes: 0 success, 1 a mathematical check failed, 2 numerical
non-convergence, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .numerics import ConvergenceError, ExpsynthError, PreconditionError, StructuralError

log = logging.getLogger("expsynth")

EXIT_OK, EXIT_CHECK, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3

BREAKER_HEADER = ["k", "rho", "d", "g", "s", "t", "side", "c", "S_residual", "orth_residual"]
ROOTS_HEADER = ["n", "t_root", "eps", "in_Nk"]
PER_K_HEADER = ["k", "cond_i", "cond_ii", "C1", "Nk_size"]
EXAMPLE_HEADER = ["x", "G"]


class ConfigError(Exception):
    """Malformed or out-of-range configuration."""


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------

def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits."""
    pad, nxt = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{nxt}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(nxt + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(float(v)) if isinstance(v, (float, np.floating)) else
                    (str(bool(v)).lower() if isinstance(v, (bool, np.bool_)) else v) for v in row])
    return buf.getvalue()


def sibling(path: str | Path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix + p.suffix)


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass
class RunConfig:
    model: dict
    family: dict | None
    window: int = 2**20
    series_tol: float = 1e-10
    max_doublings: int = 40
    eta: float = 0.01
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    cell_length: float = 3.0
    s_rescale: float = 1.0
    weights: str = "model"
    c1_cap: float = 2.0**20
    defect_windows: list = field(default_factory=lambda: [2**14])
    json_path: str | None = None
    csv_path: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a JSON object")
        if "model" not in raw:
            raise ConfigError("missing key 'model'")
        model = raw["model"]
        if not isinstance(model, dict) or "kind" not in model:
            raise ConfigError("missing key 'model.kind'")
        trunc = raw.get("truncation", {})
        brk = raw.get("breaker", {})
        cert = raw.get("certifier", {})
        out = raw.get("output", {})
        defect = raw.get("defect", {})
        try:
            cfg = cls(
                model=model, family=raw.get("family"),
                window=int(trunc.get("window", 2**20)),
                series_tol=float(trunc.get("series_tol", 1e-10)),
                max_doublings=int(trunc.get("max_doublings", 40)),
                eta=float(brk.get("eta", 0.01)), fp_tol=float(brk.get("fp_tol", 1e-12)),
                fp_max_iter=int(brk.get("fp_max_iter", 200)),
                cell_length=float(brk.get("cell_length", 3.0)),
                s_rescale=float(brk.get("s_rescale", 1.0)),
                weights=str(cert.get("weights", "model")),
                c1_cap=float(cert.get("c1_cap", 2.0**20)),
                defect_windows=[int(n) for n in defect.get("windows", [2**14])],
                json_path=out.get("json"), csv_path=out.get("csv"))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"bad value: {exc}") from exc
        cfg.check()
        return cfg

    def check(self) -> None:
        def pow2(n):
            return n >= 2**10 and n & (n - 1) == 0
        if not pow2(self.window):
            raise ConfigError("'truncation.window' must be a power of two >= 1024")
        for key in ("series_tol", "fp_tol", "cell_length", "s_rescale", "c1_cap"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"'{key}' must be positive")
        if not 0 < self.eta < 1:
            raise ConfigError("'breaker.eta' must lie in (0, 1)")
        if self.max_doublings < 1 or self.fp_max_iter < 1:
            raise ConfigError("iteration limits must be positive")
        if self.weights not in ("model", "uniform"):
            raise ConfigError("'certifier.weights' must be 'model' or 'uniform'")
        if not all(pow2(n) for n in self.defect_windows):
            raise ConfigError("'defect.windows' must be powers of two >= 1024")
        if self.family is not None and not isinstance(self.family, dict):
            raise ConfigError("'family' must be an object")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(raw)


def build_model(cfg: RunConfig):
    from .genfun import model_from_config
    m = dict(cfg.model)
    if m.get("kind") == "pv":
        m.setdefault("tol", cfg.series_tol)
        m.setdefault("max_doublings", cfg.max_doublings)
    try:
        return model_from_config(m)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model config: {exc}") from exc


def build_family(cfg: RunConfig, model):
    from .spectra import IntervalFamily
    if cfg.family is None:
        if hasattr(model, "hypothesis_family"):
            return model.hypothesis_family()
        raise ConfigError("missing key 'family'")
    try:
        return IntervalFamily.from_config(cfg.family)
    except KeyError as exc:
        raise ConfigError(f"missing key 'family.{exc.args[0]}'") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad family config: {exc}") from exc


def emit(cfg: RunConfig, args, report: dict) -> None:
    path = args.out or cfg.json_path
    text = to_json(report) + "\n"
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def csv_path(cfg: RunConfig, args) -> str | None:
    return args.csv or cfg.csv_path


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, args) -> int:
    from .spectra import validate_family
    model = build_model(cfg)
    family = build_family(cfg, model)
    rep = validate_family(family)
    probe = np.asarray(model(np.array([0.3, 1.7, 10.25])), dtype=float)
    model_ok = bool(np.all(np.isfinite(probe)))
    out = {"command": "validate", "k_range": [int(family.k_offset), int(family.k_last)],
           "checks": [c.to_dict() for c in rep.checks],
           "model_finite": model_ok, "passed": bool(rep.passed and model_ok),
           "failed": rep.failed() + ([] if model_ok else ["model_finite"])}
    emit(cfg, args, out)
    return EXIT_OK if out["passed"] else EXIT_CHECK


def _breaker_config(cfg: RunConfig, model, family):
    from .breaker import BreakerConfig
    return BreakerConfig(model, family, (-cfg.window, cfg.window), eta=cfg.eta, fp_tol=cfg.fp_tol,
                         fp_max_iter=cfg.fp_max_iter, cell_length=cfg.cell_length,
                         s_rescale=cfg.s_rescale)


def _breaker_rows(run) -> list:
    rep, fam, side = run.report, run.state.family, run.side
    g = run.hypotheses.sums.g
    offset = list(run.hypotheses.sums.family.ks).index(fam.ks[0])
    rows = []
    for i, k in enumerate(fam.ks):
        rows.append([int(k), float(fam.rho[i]), float(fam.d[i]), float(g[offset + i]), float(side.s[i]),
                     float(rep.t[i]), rep.sides[i], float(rep.c[i]), float(rep.s_residuals[i]),
                     float(rep.orth_residuals[i])])
    return rows


def cmd_break(cfg: RunConfig, args) -> int:
    from .breaker import check_hypotheses, run_breaker
    model = build_model(cfg)
    family = build_family(cfg, model)
    bcfg = _breaker_config(cfg, model, family)
    try:
        run = run_breaker(bcfg)
    except (StructuralError, PreconditionError) as exc:
        try:
            hyp = check_hypotheses(bcfg).to_dict()
        except ExpsynthError:
            hyp = None
        emit(cfg, args, {"command": "break", "status": "hypothesis_failure", "error": str(exc),
                         "hypotheses": hyp})
        return EXIT_CHECK
    except ConvergenceError as exc:
        emit(cfg, args, {"command": "break", "status": "non_convergence", "error": str(exc)})
        return EXIT_CONVERGENCE
    rep = run.report
    out = {"command": "break", "status": "ok" if rep.residual_targets_met else "residual_targets_missed",
           "hypotheses": run.hypotheses.to_dict(), "report": rep.to_dict()}
    emit(cfg, args, out)
    if csv_path(cfg, args):
        write_atomic(csv_path(cfg, args), csv_text(BREAKER_HEADER, _breaker_rows(run)))
    return EXIT_OK if rep.residual_targets_met else EXIT_CHECK


def cmd_certify(cfg: RunConfig, args) -> int:
    from .certifier import KernelWeights, certify
    model = build_model(cfg)
    family = build_family(cfg, model)
    window = (-cfg.window, cfg.window)
    if cfg.weights == "uniform":
        weights = KernelWeights.uniform(family, window)
    else:
        weights = KernelWeights.from_model(model, window)
    rep = certify(weights, family, c1_cap=cfg.c1_cap)
    out = {"command": "certify", "weights": cfg.weights, "report": rep.to_dict()}
    emit(cfg, args, out)
    path = csv_path(cfg, args)
    if path:
        r = rep.roots
        write_atomic(path, csv_text(ROOTS_HEADER, zip([int(v) for v in r["n"]], r["t"], r["eps"], r["in_nk"])))
        rows = [[k, ci, cii, s["c1"], s["size"]] for k, ci, cii, s in zip(rep.ks, rep.cond_i, rep.cond_ii, rep.nk)]
        write_atomic(sibling(path, "_per_k"), csv_text(PER_K_HEADER, rows))
    return EXIT_OK if rep.passed else EXIT_CHECK


def parse_partition(spec: str | None) -> list | None:
    """'breaker' (default) uses the breaker's t_k; 't=x1,x2,...' lists them explicitly."""
    if spec is None or spec == "breaker":
        return None
    if spec.startswith("t="):
        try:
            ts = [float(v) for v in spec[2:].split(",") if v]
        except ValueError as exc:
            raise ConfigError(f"bad partition spec {spec!r}") from exc
        if not ts:
            raise ConfigError("empty partition")
        return ts
    raise ConfigError(f"bad partition spec {spec!r}")


def cmd_defect(cfg: RunConfig, args) -> int:
    from .breaker import run_breaker
    from .genfun import find_zeros
    from .pw_numerics import SampledPWVector, sample_biorth, structured_defect
    model = build_model(cfg)
    family = build_family(cfg, model)
    explicit = parse_partition(args.partition)
    windows = [args.window] if args.window else cfg.defect_windows
    if max(windows) > cfg.window:
        raise ConfigError("defect window exceeds 'truncation.window'")
    try:
        run = run_breaker(_breaker_config(cfg, model, family))
    except (StructuralError, PreconditionError) as exc:
        emit(cfg, args, {"command": "defect", "status": "hypothesis_failure", "error": str(exc)})
        return EXIT_CHECK
    except ConvergenceError as exc:
        emit(cfg, args, {"command": "defect", "status": "non_convergence", "error": str(exc)})
        return EXIT_CONVERGENCE
    tk = np.array(run.report.t if explicit is None else explicit)
    series = []
    for N in windows:
        zl = find_zeros(model, (-N - 0.75, N + 0.75))
        near = np.min(np.abs(zl.zeros[:, None] - tk[None, :]), axis=1) <= 1e-9
        lam1 = zl.zeros[~near]
        n = np.arange(-N, N + 1, dtype=float)
        sign = np.where(np.fmod(np.abs(n), 2) == 0, 1.0, -1.0)
        f = SampledPWVector(N, sign * run.fdata.a.at(n), "f")
        b = np.zeros(n.size)
        bn = run.state.b.n
        ok = np.abs(bn) <= N
        b[(bn[ok] + N).astype(int)] = run.state.b.values[ok]
        g = SampledPWVector(N, sign * b, "g")
        extra = [sample_biorth(model, float(t), N, zl) for t in tk]
        rep = structured_defect(lam1, extra, g, f)
        series.append(rep.to_dict())
    ok = all(r["lower_bound"] > 0 and r["candidate_residual"] >= r["lower_bound"] for r in series)
    emit(cfg, args, {"command": "defect", "status": "ok" if ok else "bound_not_positive",
                     "partition": [float(t) for t in tk], "series": series})
    path = csv_path(cfg, args)
    if path:
        write_atomic(path, csv_text(["N", "candidate_residual", "lower_bound", "complement_dim"],
                                    [[r["N"], r["candidate_residual"], r["lower_bound"], r["complement_dim"]]
                                     for r in series]))
    return EXIT_OK if ok else EXIT_CHECK


EXAMPLES = {
    "simple_example": {"kind": "simple_example"},
    "kadets": {"kind": "kadets", "delta0": 0.5, "delta": 0.75,
               "rho": {"kind": "powers_of_two", "k_min": 1, "k_max": 40}},
}


def cmd_example(cfg: RunConfig | None, args) -> int:
    from .genfun import find_zeros, model_from_config
    name = args.name
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}")
    model = model_from_config(cfg.model if cfg is not None else EXAMPLES[name])
    lo, hi = args.range
    x = np.linspace(lo, hi, args.points)
    gx = np.asarray(model(x), dtype=float)
    n = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=float)
    gn = np.asarray(model(n), dtype=float)
    zl = find_zeros(model, (lo, hi))
    base = args.csv or (cfg.csv_path if cfg else None) or f"{name}.csv"
    write_atomic(base, csv_text(EXAMPLE_HEADER, zip(x.tolist(), gx.tolist())))
    write_atomic(sibling(base, "_integers"), csv_text(EXAMPLE_HEADER, zip(n.tolist(), gn.tolist())))
    write_atomic(sibling(base, "_zeros"), csv_text(["zero", "G_prime"], zip(zl.zeros.tolist(), zl.derivs.tolist())))
    out = {"command": "example", "name": name, "range": [float(lo), float(hi)], "points": int(args.points),
           "zero_count": len(zl), "files": [str(base), str(sibling(base, "_integers")), str(sibling(base, "_zeros"))]}
    if args.out:
        write_atomic(args.out, to_json(out) + "\n")
    else:
        sys.stdout.write(to_json(out) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expsynth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--out", help="JSON report path (default: stdout)")
        sp.add_argument("--csv", help="CSV series path")
        sp.add_argument("--window", type=int, help="override the truncation window N")

    common(sub.add_parser("validate", help="structural checks of the interval family"))
    common(sub.add_parser("break", help="construct the annihilating pair"))
    common(sub.add_parser("certify", help="check the certifier conditions"))
    sp = sub.add_parser("defect", help="projection residual of the mixed system")
    common(sp)
    sp.add_argument("--partition", help="'breaker' or 't=x1,x2,...'")
    sp = sub.add_parser("example", help="plot data for the example models")
    common(sp, config_required=False)
    sp.add_argument("name", choices=sorted(EXAMPLES))
    sp.add_argument("--range", type=float, nargs=2, default=(-40.0, 40.0), metavar=("LO", "HI"))
    sp.add_argument("--points", type=int, default=4001)
    return p


COMMANDS = {"validate": cmd_validate, "break": cmd_break, "certify": cmd_certify,
            "defect": cmd_defect, "example": cmd_example}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and args.command != "defect" and args.window:
            cfg.window = args.window
            cfg.check()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"expsynth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"expsynth: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ExpsynthError as exc:
        print(f"expsynth: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
