"""Command line front end: ``conefrac <subcommand> [--config PATH] ...``.

Exit status: 0 when everything passes, 1 when a verification case fails, 2 on
a configuration error.  Reports are deterministic JSON; wall-clock timings go
to a ``.timing.json`` sidecar so that reruns produce identical report bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .densities import DetPower, PathwayParams, density_from_config
from .exceptions import CapExceeded, ConfigError, DomainError, EnvelopeError, PoleError
from .mtransform import MTransformQuery, m_transform
from .operators import KINDS, OperatorSpec, apply_operator
from .pdcore import as_pd, batch_logdet, batch_trace
from .special import log_gamma_p
from .suites import SUITES, lemma21_row, lemma22_table, pathway_operator_table, run_suite
from .zonal import build_zonal_table

log = logging.getLogger("conefrac")

BUILD_ID = f"conefrac-v{__version__}"
MIN_N = 100


# -- config ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    suites: list
    seed: int
    n: int | None = None
    workers: int = 1
    out: str | None = None
    formats: tuple = ("json", "csv")
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d, seed=None, workers=None, out=None, formats=None):
        suites = d.get("suites", d.get("suite"))
        if isinstance(suites, str):
            suites = [suites]
        if not suites:
            raise ConfigError("field 'suites': at least one suite name is required")
        unknown = [s for s in suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"field 'suites': unknown suite(s) {unknown}; known: {sorted(SUITES)}")
        seed = d.get("seed") if seed is None else seed
        if seed is None:
            raise ConfigError("field 'seed': a seed is required (no entropy default)")
        n = d.get("n")
        if n is not None and int(n) < MIN_N:
            raise ConfigError(f"field 'n': must be at least {MIN_N}, got {n}")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("field 'params': must be an object keyed by suite name")
        return cls(
            suites=list(suites), seed=int(seed), n=None if n is None else int(n),
            workers=int(workers if workers is not None else d.get("workers", 1)),
            out=out or d.get("out"), formats=tuple(formats or d.get("formats", ("json", "csv"))),
            params=params,
        )

    def suite_config(self, name):
        cfg = dict(self.params.get(name, {}))
        cfg.setdefault("seed", self.seed)
        if self.n is not None:
            cfg.setdefault("n", self.n)
        cfg["workers"] = self.workers
        return cfg


def load_config(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


# -- output helpers ----------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def csv_text(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, dict)):
        return json.dumps(_jsonable(v), sort_keys=True)
    return v


def _out_dir(args, cfg=None):
    out = args.out or os.environ.get("CONEFRAC_OUT") or (cfg or {}).get("out")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
    return out


def _emit(text, out, filename):
    if out:
        path = Path(out) / filename
        path.write_text(text)
        log.info("wrote %s", path)
    else:
        sys.stdout.write(text)


def _formats(args):
    if args.format is None:
        return None
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    bad = [f for f in formats if f not in ("json", "csv")]
    if bad:
        raise ConfigError(f"--format: unknown format(s) {bad}")
    return formats


# -- subcommands -------------------------------------------------------------

def run_gamma(args):
    cfg = load_config(args.config)
    grid = cfg.get("grid")
    if grid is None:
        grid = [(p, a) for p in args.p for a in args.alpha]
    rows = []
    for p, a in grid:
        try:
            rows.append({"p": int(p), "alpha": float(a), "log_gamma_p": log_gamma_p(int(p), a),
                         "status": "ok"})
        except DomainError:
            rows.append({"p": int(p), "alpha": float(a), "log_gamma_p": None,
                         "status": "domain_error"})
    _emit(csv_text(rows, ["p", "alpha", "log_gamma_p", "status"]), _out_dir(args), "gamma.csv")
    return 0


def run_zonal(args):
    cfg = load_config(args.config)
    kmax = int(cfg.get("kmax", args.kmax))
    p = int(cfg.get("p", args.p))
    table = build_zonal_table(kmax, p)
    rows = [{"degree": K.weight, "partition": K.label(), "monomial": " ".join(map(str, L)),
             "coefficient": str(c)} for K, L, c in table.rows()]
    _emit(csv_text(rows, ["degree", "partition", "monomial", "coefficient"]), _out_dir(args),
          f"zonal_k{kmax}_p{p}.csv")
    return 0


def _density(cfg, key="density"):
    d = cfg.get(key)
    if d is None:
        raise ConfigError(f"field '{key}': a density object is required")
    if isinstance(d, str):
        d = {k: v for k, v in cfg.items() if k not in ("points", "s", "n", "seed", "output")}
    try:
        return density_from_config(d)
    except KeyError as exc:
        raise ConfigError(f"field '{key}': {exc}") from exc


def run_density(args):
    cfg = load_config(args.config)
    dens = _density(cfg)
    result = {"density": dens.label, "params": dens.params, "log_pdf": [], "m_transform": []}
    for pt in cfg.get("points", []):
        result["log_pdf"].append({"X": pt, "log_pdf": dens.log_pdf(np.asarray(pt, dtype=float))})
    for s in cfg.get("s", []):
        est = m_transform(MTransformQuery(s=float(s), f=dens))
        result["m_transform"].append({"s": s, "value": est.estimate})
    _emit(dumps(result), _out_dir(args, cfg), "density.json")
    return 0


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("field 'seed': a seed is required (no entropy default)")
    return int(seed)


def run_sample(args):
    cfg = load_config(args.config)
    dens = _density(cfg)
    if not dens.can_sample:
        raise ConfigError(f"density {dens.label} has no sampler")
    n = int(cfg.get("n", 1000))
    seed = _seed(args, cfg)
    X = dens.rvs(size=n, rng=seed)
    out = _out_dir(args, cfg)
    if cfg.get("output", "stats") == "draws":
        lines = "".join(json.dumps({"p": dens.p, "data": x.tolist()}) + "\n" for x in X)
        _emit(lines, out, "draws.jsonl")
    else:
        rows = [{"index": i, "logdet": ld, "trace": tr}
                for i, (ld, tr) in enumerate(zip(batch_logdet(X), batch_trace(X)))]
        _emit(csv_text(rows, ["index", "logdet", "trace"]), out, "sample.csv")
    return 0


def _integrand_from(cfg):
    f = cfg.get("f")
    if f is None:
        raise ConfigError("field 'f': integrand required (density object or {'det_power': lambda})")
    if isinstance(f, dict) and "det_power" in f:
        return DetPower(float(f["det_power"]))
    return _density({"density": f})


def _operator_spec(cfg):
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"field 'kind': expected one of {KINDS}, got {kind!r}")
    params = dict(cfg.get("params", {}))
    pathway = None
    if kind in ("pathway1", "pathway2"):
        pathway = PathwayParams(
            gamma=params["gamma"], eta=params["eta"], q=params["q"],
            scale=params.get("a", params.get("A", 1.0)),
            kind="first" if kind == "pathway1" else "second", p=int(params.get("p", 1)),
        )
    return OperatorSpec(
        kind=kind, zeta=float(params.get("zeta", 0.0)), alpha=float(params.get("alpha", 1.0)),
        pathway=pathway, a_eta=params.get("a_eta"), gamma=params.get("gamma"),
        a_list=tuple(params.get("a_list", ())), b_list=tuple(params.get("b_list", ())),
        A_h=params.get("A_h"), kmax=int(params.get("kmax", 8)),
    )


def run_operator(args):
    cfg = load_config(args.config)
    try:
        spec = _operator_spec(cfg)
    except KeyError as exc:
        raise ConfigError(f"field 'params': missing {exc}") from exc
    f = _integrand_from(cfg)
    if "U" not in cfg:
        raise ConfigError("field 'U': evaluation point required")
    U = as_pd(np.asarray(cfg["U"], dtype=float))
    n = int(cfg.get("n", 100_000))
    if n < MIN_N:
        raise ConfigError(f"field 'n': must be at least {MIN_N}")
    ev = apply_operator(spec, f, U, n, _seed(args, cfg), workers=args.workers or 1,
                        method=cfg.get("method"))
    result = {"spec": cfg, "evaluation": ev.to_dict(), "build": BUILD_ID}
    _emit(dumps(result), _out_dir(args, cfg), "operator.json")
    return 0


CASE_COLUMNS = ["suite", "index", "lhs", "rhs", "se", "pass", "method", "params"]


def run_verify(args):
    raw = load_config(args.config)
    if args.suite:
        raw = dict(raw, suites=args.suite)
    cfg = ExperimentConfig.from_dict(raw, seed=args.seed, workers=args.workers, out=args.out,
                                     formats=_formats(args))
    out = _out_dir(args, {"out": cfg.out})
    status = 0
    for name in cfg.suites:
        t0 = time.perf_counter()
        report = run_suite(name, cfg.suite_config(name))
        wall = time.perf_counter() - t0
        payload = {
            "suite": name,
            "build": BUILD_ID,
            "seed": cfg.seed,
            "config": cfg.suite_config(name),
            "cases": [c.to_dict() for c in report.cases],
            "passed": report.passed,
        }
        payload["config"].pop("workers")
        stem = f"verify_{name}"
        if "json" in cfg.formats:
            _emit(dumps(payload), out, f"{stem}.json")
        if "csv" in cfg.formats:
            rows = [dict(c.to_dict(), suite=name, index=i) for i, c in enumerate(report.cases)]
            _emit(csv_text(rows, CASE_COLUMNS), out, f"{stem}.csv")
        if out:
            timing = {"suite": name, "wall_seconds": wall, "workers": cfg.workers}
            (Path(out) / f"{stem}.timing.json").write_text(dumps(timing))
        log.info("%s: %d cases, %s (%.1fs)", name, len(report.cases),
                 "pass" if report.passed else "FAIL", wall)
        if not report.passed:
            status = 1
    return status


def run_pathway_study(args):
    cfg = load_config(args.config)
    study = cfg.get("study", "lemma22")
    m_values = cfg.get("m_values")
    if study == "lemma22":
        rows = lemma22_table(float(cfg.get("a", 1.0)), float(cfg.get("eta", 1.0)),
                             cfg.get("eigenvalues", [1.0]), m_values)
    elif study == "lemma21":
        rows = [lemma21_row(int(cfg.get("p", 1)), float(cfg.get("gamma", 1.0)),
                            float(cfg.get("a", 1.0)), float(cfg.get("eta", 1.0)), omq,
                            cfg.get("kind", "second"))
                for omq in cfg.get("one_minus_q", [1e-1, 1e-2, 1e-3, 1e-4])]
        _emit(csv_text(rows, list(rows[0])), _out_dir(args, cfg), "pathway_lemma21.csv")
        return 0
    elif study == "operator":
        p = int(cfg.get("p", 1))
        f = _density({"density": cfg.get("f", {"density": "matrix_gamma", "p": p,
                                                "shape": p + 1.0})})
        U = np.asarray(cfg.get("U", np.eye(p)), dtype=float)
        rows = pathway_operator_table(
            cfg.get("kind", "second"), p, float(cfg.get("gamma", 1.0)), float(cfg.get("eta", 1.0)),
            float(cfg.get("a", 1.0)), f, U, int(cfg.get("n", 20_000)), _seed(args, cfg), m_values,
            args.workers or 1,
        )
    else:
        raise ConfigError(f"field 'study': expected lemma21, lemma22 or operator, got {study!r}")
    columns = ["m", "q", "value", "limit", "abs_error", "error_ratio"]
    _emit(csv_text(rows, columns), _out_dir(args, cfg), f"pathway_{study}.csv")
    return 0


def run_report(args):
    out = args.out or os.environ.get("CONEFRAC_OUT")
    if not out or not Path(out).is_dir():
        raise ConfigError("report needs --out (or CONEFRAC_OUT) pointing at a directory of reports")
    rows = []
    for path in sorted(Path(out).glob("verify_*.json")):
        if path.name.endswith(".timing.json"):
            continue
        data = json.loads(path.read_text())
        cases = data.get("cases", [])
        rows.append({"suite": data.get("suite"), "cases": len(cases),
                     "failed": sum(not c["pass"] for c in cases), "passed": data.get("passed")})
    sys.stdout.write(csv_text(rows, ["suite", "cases", "failed", "passed"]))
    return 0 if all(r["passed"] for r in rows) else 1


# -- parser ------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", help="output directory (default: stdout); env CONEFRAC_OUT")
    common.add_argument("--format", help="comma separated subset of json,csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="conefrac", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=BUILD_ID)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gamma", parents=[common], help="log Gamma_p over a grid")
    g.add_argument("--p", type=int, nargs="+", default=[1, 2])
    g.add_argument("--alpha", type=float, nargs="+", default=[1.0, 2.5])
    g.set_defaults(func=run_gamma)

    z = sub.add_parser("zonal", parents=[common], help="zonal polynomial coefficient table (CSV)")
    z.add_argument("--kmax", type=int, default=4)
    z.add_argument("--p", type=int, default=2)
    z.set_defaults(func=run_zonal)

    sub.add_parser("density", parents=[common], help="evaluate a catalog density").set_defaults(
        func=run_density)
    sub.add_parser("sample", parents=[common], help="draw from a catalog density").set_defaults(
        func=run_sample)
    sub.add_parser("operator", parents=[common], help="evaluate an operator at a point").set_defaults(
        func=run_operator)

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", nargs="+", help=f"suite names: {', '.join(SUITES)}")
    v.set_defaults(func=run_verify)

    sub.add_parser("pathway-study", parents=[common], help="q -> 1 convergence tables").set_defaults(
        func=run_pathway_study)
    sub.add_parser("report", parents=[common], help="summarize reports in --out").set_defaults(
        func=run_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (DomainError, CapExceeded, PoleError, EnvelopeError) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
