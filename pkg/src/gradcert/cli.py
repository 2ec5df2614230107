"""Batch front-end: analyze → certify → simulate → report, driven by one JSON config.

Config grammar (JSON object; unknown top-level keys are rejected)::

    run_id      str, output subdirectory (default: config file stem)
    field       {"name": catalog name, "params": {...}}
    pipeline    theorem1 | theorem2 | theorem3 | annulus | pli_only | lognorm_only
    seed        int (default 0)
    alpha       {"family": sqrt_mu|power|log, ...} or "fit_power" or "fit_gpli"
    rates       {"nu", "eps", "m", "nu_local", "beta", "margin", "delta"}
    regions     {"analysis": region, "certify": [region, ...], "compact": region}
    analyze     {"m_values": [...], "exp_gradient": {"lo", "hi", "n", "scale"}}
    simulate    {"mode": pairs|points, "n": int, "half_width": float, "horizon": float,
                 "tail_level": float, "transient": float}
    tolerances  {"L_tol", "rate_tol"}
    output      default output root when --out is not given

A region is a Region dict, e.g. {"kind": "cube", "half_width": 10} (dim defaults
to the field dimension) or {"kind": "shell", "center": [0], "inner": 1, "radius": 4}.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import curvature, lognorm, pli, verify
from .certificate import Certificate, jsonable, verdict_rank
from .fields import catalog_get, catalog_names
from .flow import StepControls
from .metric import (HypothesisError, build_theorem1_metric,
                     build_theorem2_metric, build_theorem3_metric)
from .region import Region, SamplePlan

__all__ = ["ConfigError", "RunConfig", "load_config", "main"]

PIPELINES = ("theorem1", "theorem2", "theorem3", "annulus", "pli_only", "lognorm_only")
TOP_KEYS = {"run_id", "field", "pipeline", "seed", "alpha", "rates", "regions", "analyze",
            "simulate", "tolerances", "output"}
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3

NEEDS = {"theorem1": ("alpha", "rates.nu"), "theorem2": ("rates.m", "rates.nu_local"),
         "theorem3": ("rates.m", "rates.nu"), "annulus": ("rates.nu", "regions.compact"),
         "pli_only": (), "lognorm_only": ("rates.nu",)}


class ConfigError(ValueError):
    """Invalid config; the message carries the source line when it can be located."""


def _line_of(text, path):
    """1-based line of the last key in ``path``, searching keys in order."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


class RunConfig:
    """Validated config document plus the raw text for line-anchored errors."""

    def __init__(self, data, text="", source="<config>"):
        self.data, self.text, self.source = data, text, source
        self._validate()

    def error(self, path, msg):
        line = _line_of(self.text, path)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {'.'.join(map(str, path))}: {msg}")

    def get(self, dotted, default=None):
        node = self.data
        for key in dotted.split("."):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def _validate(self):
        d = self.data
        if not isinstance(d, dict):
            raise ConfigError(f"{self.source}:1: top level must be an object")
        for key in d:
            if key not in TOP_KEYS:
                raise self.error([key], f"unknown key (allowed: {', '.join(sorted(TOP_KEYS))})")
        fs = d.get("field")
        if not isinstance(fs, dict) or "name" not in fs:
            raise self.error(["field"], "needs an object with 'name'")
        if fs["name"] not in catalog_names():
            raise self.error(["field", "name"],
                             f"unknown field {fs['name']!r}; known: {', '.join(catalog_names())}")
        try:
            self.field = catalog_get(fs["name"], fs.get("params", {}))
        except (KeyError, ValueError) as exc:
            raise self.error(["field", "params"], str(exc)) from None
        if d.get("pipeline") not in PIPELINES:
            raise self.error(["pipeline"], f"must be one of {', '.join(PIPELINES)}")
        if not isinstance(d.get("seed", 0), int):
            raise self.error(["seed"], "must be an integer")
        self.check_pipeline()
        self.regions = {}
        for name, spec in (d.get("regions") or {}).items():
            specs = spec if isinstance(spec, list) else [spec]
            try:
                self.regions[name] = [self._region(s) for s in specs]
            except (TypeError, ValueError, KeyError) as exc:
                raise self.error(["regions", name], f"bad region: {exc}") from None
        try:
            self.alpha = self._alpha()
        except (TypeError, ValueError, KeyError) as exc:
            raise self.error(["alpha"], str(exc)) from None

    def check_pipeline(self):
        for need in NEEDS[self.pipeline]:
            if self.get(need) is None:
                raise self.error(need.split(".")[:1], f"pipeline {self.pipeline} requires {need}")
        for key in ("nu", "eps", "m", "nu_local", "beta", "margin", "delta"):
            v = self.get(f"rates.{key}")
            if v is not None and (not isinstance(v, (int, float)) or v <= 0):
                raise self.error(["rates", key], "must be a positive number")

    def _region(self, spec):
        spec = dict(spec)
        if spec["kind"] == "cube":
            spec.setdefault("dim", self.field.dim)
        if spec.get("plan") is None:
            spec["plan"] = SamplePlan.default(self.field.dim, self.seed)
        region = Region.from_dict(spec)
        if region.dim != self.field.dim:
            raise ValueError(f"region dimension {region.dim} != field dimension {self.field.dim}")
        return region

    def _alpha(self):
        a = self.data.get("alpha")
        if a is None or a in ("fit_power", "fit_gpli"):
            return a
        if not isinstance(a, dict) or "family" not in a:
            raise ValueError("alpha must be a family object, 'fit_power' or 'fit_gpli'")
        return pli.ComparisonFunction.from_dict(a)

    @property
    def pipeline(self):
        return self.data["pipeline"]

    @property
    def seed(self):
        return int(self.data.get("seed", 0))

    @property
    def run_id(self):
        return str(self.data.get("run_id") or Path(self.source).stem)

    def region(self, name, default_hw=10.0):
        if name in self.regions:
            return self.regions[name]
        return [Region.cube(default_hw, self.field.dim,
                            plan=SamplePlan.default(self.field.dim, self.seed))]


def load_config(path, seed=None, pipeline=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if isinstance(data, dict):
        if seed is not None:
            data["seed"] = int(seed)
        if pipeline is not None:
            data["pipeline"] = pipeline
    return RunConfig(data, text, str(path))


# -- file output -------------------------------------------------------------------
def _atomic_write(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Outputs:
    def __init__(self, root, run_id):
        self.dir = Path(root) / run_id
        self.written = []

    def certificate(self, name, cert):
        self.written.append((name, cert))
        _atomic_write(self.dir / "certificates" / f"{name}.json", cert.to_json() + "\n")

    def csv(self, sub, name, header, rows):
        _atomic_write(self.dir / sub / f"{name}.csv", _csv_text(header, rows))

    def json(self, rel, obj):
        _atomic_write(self.dir / rel, json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")

    def exit_code(self):
        if not self.written:
            return EXIT_PASS
        worst = max(verdict_rank(c.verdict) for _, c in self.written)
        return {0: EXIT_PASS, 1: EXIT_INCONCLUSIVE, 2: EXIT_FAIL}[worst]


def _region_tag(region):
    if region.kind == "box":
        return f"box{max(abs(v) for v in list(region.lower) + list(region.upper)):g}"
    return f"{region.kind}{region.radius:g}"


def _inconclusive(cfg, claim, hypothesis, region=None):
    return Certificate(claim=claim, verdict="inconclusive", margin=float("nan"),
                       region=None if region is None else region.to_dict(),
                       field_spec=cfg.field.describe(),
                       details={"hypothesis": hypothesis, "pipeline": cfg.pipeline})


# -- stages ------------------------------------------------------------------------
def _resolve_alpha(cfg):
    if isinstance(cfg.alpha, pli.ComparisonFunction) or cfg.alpha is None:
        return cfg.alpha
    region = cfg.region("analysis")[0]
    if cfg.alpha == "fit_power":
        return pli.fit_power_alpha(cfg.field, region)
    return pli.ComparisonFunction.sqrt_mu(pli.fit_gpli_mu(cfg.field, region))


def cmd_analyze(cfg, out):
    field = cfg.field
    region = cfg.region("analysis")[0]
    X = region.samples(field)
    lmin = np.atleast_1d(field.lambda_min(X))
    gap = np.atleast_1d(field.gap(X))
    gn = np.atleast_1d(field.grad_norm(X))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gap > 0, gn**2 / gap, np.nan)
    order = np.lexsort(X.T[::-1])
    cols = [f"x{i}" for i in range(field.dim)]
    out.csv("series", "lambda_min_scan", cols + ["lambda_min", "gap", "grad_norm", "pl_ratio"],
            (list(X[i]) + [lmin[i], gap[i], gn[i], ratio[i]] for i in order))

    if cfg.pipeline == "lognorm_only":
        out.certificate(f"analyze_lognorm_{_region_tag(region)}",
                        lognorm.strong_convexity_iff_contraction(field, region,
                                                                 cfg.get("rates.nu")))
        return out.exit_code()

    mu_hat = pli.fit_gpli_mu(field, region)
    alpha = _resolve_alpha(cfg)
    if alpha is None:
        alpha = pli.ComparisonFunction.sqrt_mu(mu_hat) if mu_hat > 0 else None
    if alpha is not None:
        cert = pli.check_kinf_pli(field, alpha, region)
        details = dict(cert.details, gpli_mu_hat=mu_hat)
        out.certificate("analyze_pli", _with(cert, details=details))
    else:
        out.certificate("analyze_pli", Certificate(
            claim="pli", verdict="fail", margin=mu_hat, region=region.to_dict(),
            witnesses=[{"reason": "sampled gPLI constant is not positive", "mu_hat": mu_hat}],
            field_spec=field.describe(), details={"gpli_mu_hat": mu_hat}))

    eg = cfg.get("analyze.exp_gradient")
    if eg is not None:
        pts = np.geomspace(float(eg.get("lo", 1e-3)), float(eg.get("hi", 1e6)),
                           int(eg.get("n", 1000)))
        Xe = field.x_star + pts[:, None] * np.eye(field.dim)[0]
        out.certificate("analyze_exp_gradient",
                        pli.check_exp_gradient_bound(field, Xe, float(eg.get("scale", 2.0))))

    # the metric pipelines only report the concavity class their construction needs
    kinds = {"theorem2": ("state_bounded",), "theorem3": ("magnitude_bounded",)}.get(
        cfg.pipeline, ("state_bounded", "magnitude_bounded"))
    m_values = cfg.get("analyze.m_values")
    if m_values is None and cfg.get("rates.m") is not None:
        m_values = [cfg.get("rates.m")]
    for m in m_values or []:
        cls = curvature.classify_concavity(field, float(m), region)
        for kind in kinds:
            out.certificate(f"analyze_{kind}_m{m:g}", getattr(cls, kind))
    return out.exit_code()


def _with(cert, **changes):
    return replace(cert, **changes)


def build_metric(cfg):
    """(metric, certified rate) for the metric pipelines; raises HypothesisError."""
    field, r = cfg.field, cfg.get
    if cfg.pipeline == "theorem1":
        alpha = _resolve_alpha(cfg)
        hull = max(cfg.region("certify"), key=lambda g: np.max(np.abs(g.bounding_box()[1])))
        metric, _ = build_theorem1_metric(field, alpha, r("rates.nu"), eps=r("rates.eps"),
                                          delta=r("rates.delta"),
                                          margin=r("rates.margin", 0.1), region=hull)
    elif cfg.pipeline == "theorem2":
        metric = build_theorem2_metric(field, r("rates.m"), r("rates.nu_local"),
                                       cfg.region("analysis")[0])
    elif cfg.pipeline == "theorem3":
        alpha = _resolve_alpha(cfg) or pli.fit_power_alpha(field, cfg.region("analysis")[0])
        metric = build_theorem3_metric(field, alpha, r("rates.m"), r("rates.nu"),
                                       eps=r("rates.eps"), delta=r("rates.delta"),
                                       beta=r("rates.beta"))
    else:
        raise ValueError(f"pipeline {cfg.pipeline} builds no metric")
    return metric, float(metric.provenance["rate"])


def _metric_or_inconclusive(cfg, out, stage):
    try:
        return build_metric(cfg)
    except HypothesisError as exc:
        out.certificate(f"{stage}_hypothesis", _inconclusive(cfg, "contraction_region", str(exc)))
        return None, None


def cmd_certify(cfg, out):
    field = cfg.field
    tol = float(cfg.get("tolerances.L_tol", verify.L_TOL))
    if cfg.pipeline == "lognorm_only":
        for k, r in enumerate(cfg.region("certify")):
            out.certificate(f"certify_lognorm_{k}_{_region_tag(r)}",
                            lognorm.strong_convexity_iff_contraction(field, r, cfg.get("rates.nu"),
                                                                     tol))
        return out.exit_code()
    if cfg.pipeline == "pli_only":
        alpha = _resolve_alpha(cfg) or pli.ComparisonFunction.sqrt_mu(
            pli.fit_gpli_mu(field, cfg.region("analysis")[0]))
        for k, r in enumerate(cfg.region("certify")):
            out.certificate(f"certify_pli_{k}_{_region_tag(r)}", pli.check_kinf_pli(field, alpha, r))
        return out.exit_code()
    if cfg.pipeline == "annulus":
        K = cfg.region("compact")[0]
        try:
            cert = verify.annulus_ies_check(field, K, cfg.get("rates.nu"), seed=cfg.seed, tol=tol)
        except ValueError as exc:
            cert = _inconclusive(cfg, "annulus_ies", str(exc), K)
        out.certificate("certify_annulus_ies", cert)
        return out.exit_code()

    metric, rate = _metric_or_inconclusive(cfg, out, "certify")
    if metric is None:
        return out.exit_code()
    lv, g, gp = metric.table()
    out.csv("metrics", "metric", ["s", "g", "g_prime"], zip(lv, g, gp))
    out.json("metrics/metric.json", metric.header())
    for k, r in enumerate(cfg.region("certify")):
        tag = _region_tag(r)
        try:
            cert = verify.certify_region(field, metric, r, rate, tol=tol, seed=cfg.seed)
        except ValueError as exc:
            cert = _inconclusive(cfg, "contraction_region", str(exc), r)
        out.certificate(f"certify_{k}_{tag}", cert)
        X = r.samples(field)
        L = verify.curly_L(field, metric, X)
        order = np.lexsort(X.T[::-1])
        out.csv("series", f"L_scan_{k}_{tag}", [f"x{i}" for i in range(field.dim)] + ["L", "rate"],
                (list(X[i]) + [L[i], -rate] for i in order))
    return out.exit_code()


def _simulation_starts(cfg):
    s = cfg.get("simulate", {}) or {}
    mode = s.get("mode", "pairs")
    n = int(s.get("n", 20))
    hw = float(s.get("half_width", 10.0))
    rng = np.random.default_rng(cfg.seed)
    shape = (n, 2, cfg.field.dim) if mode == "pairs" else (n, cfg.field.dim)
    return mode, rng.uniform(-hw, hw, size=shape), hw


def cmd_simulate(cfg, out):
    field = cfg.field
    s = cfg.get("simulate", {}) or {}
    mode, starts, hw = _simulation_starts(cfg)
    horizon = float(s.get("horizon", 30.0))
    metric, rate, bound = None, None, None
    if cfg.pipeline in ("theorem1", "theorem2", "theorem3"):
        metric, rate = _metric_or_inconclusive(cfg, out, "simulate")
        if metric is None:
            return out.exit_code()
        if cfg.pipeline == "theorem1":
            metric = metric.with_bounds(field, Region.cube(hw, field.dim))
        if mode == "pairs":
            bound = 0.5 * metric.log_ratio
    elif cfg.get("rates.nu") is not None and cfg.pipeline == "lognorm_only":
        rate = float(cfg.get("rates.nu"))
    fits = verify.decay_experiment(field, starts, horizon, mode, StepControls(),
                                   float(s.get("transient", 0.2)), verify.DIST_FLOOR,
                                   s.get("tail_level"), metric if rate is not None else None)
    cert = verify.empirical_decay(field, starts, horizon, mode, metric=metric, rate=rate,
                                  log_overshoot_bound=bound, tail_level=s.get("tail_level"),
                                  transient=float(s.get("transient", 0.2)),
                                  rate_tol=float(cfg.get("tolerances.rate_tol", verify.RATE_TOL)),
                                  fits=fits)
    cert = _with(cert, grid={"kind": "random", "seed": cfg.seed, "counts": [len(fits)]},
                 region=Region.cube(hw, field.dim).to_dict())
    out.certificate(f"simulate_{mode}", cert)
    for k, f in enumerate(fits):
        out.csv("series", f"distance_{mode}_{k:03d}", ["t", "distance"],
                zip(f.times, f.distance))
    return out.exit_code()


def cmd_report(cfg, out):
    cdir = out.dir / "certificates"
    missing = []
    certs = sorted(cdir.glob("*.json")) if cdir.is_dir() else []
    if not certs:
        missing.append(str(cdir / "*.json"))
    series = out.dir / "series"
    lam = series / "lambda_min_scan.csv"
    if missing:
        raise FileNotFoundError("missing artifacts (run analyze/certify/simulate first): "
                                + ", ".join(missing))
    merged, verdicts = {}, {}
    for p in certs:
        d = json.loads(p.read_text())
        merged[p.stem] = d
        verdicts[p.stem] = d["verdict"]
    fig = out.dir / "figures"
    absent = []
    if lam.exists():
        _atomic_write(fig / "lambda_min_vs_x.csv", lam.read_text())
    else:
        absent.append("lambda_min_vs_x (run analyze)")
    rows = []
    for p in sorted(series.glob("L_scan_*.csv")):
        with p.open() as fh:
            r = csv.reader(fh)
            header = next(r)
            rows.extend([p.stem[len("L_scan_"):]] + row for row in r)
    if rows:
        _atomic_write(fig / "L_vs_x.csv", _csv_text(["region"] + header, rows))
    else:
        absent.append("L_vs_x (run certify on a metric pipeline)")
    rows = []
    for p in sorted(series.glob("distance_*.csv")):
        with p.open() as fh:
            r = csv.reader(fh)
            next(r)
            rows.extend([p.stem[len("distance_"):]] + row for row in r)
    if rows:
        _atomic_write(fig / "distance_vs_t.csv", _csv_text(["run", "t", "distance"], rows))
    else:
        absent.append("distance_vs_t (run simulate)")
    worst = max(verdicts.values(), key=verdict_rank)
    summary = {"run_id": cfg.run_id, "pipeline": cfg.pipeline, "field": cfg.field.describe(),
               "seed": cfg.seed, "n_certificates": len(certs), "verdicts": verdicts,
               "overall": worst, "certificates": merged,
               "figures": sorted(p.name for p in fig.glob("*.csv")), "figures_missing": absent}
    out.json("summary.json", summary)
    return {"pass": EXIT_PASS, "inconclusive": EXIT_INCONCLUSIVE, "fail": EXIT_FAIL}[worst]


COMMANDS = {"analyze": cmd_analyze, "certify": cmd_certify, "simulate": cmd_simulate,
            "report": cmd_report}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "inconclusive"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="gradcert",
                                description="Sampled contraction certificates for gradient flows.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", default=None, help="output root (default: config 'output' or ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--pipeline", choices=PIPELINES, default=None,
                   help="override the config pipeline")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.pipeline)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(args.out or cfg.get("output", "out"), cfg.run_id)
    try:
        code = COMMANDS[args.command](cfg, out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, cert in out.written:
        print(f"{name}: {cert.summary()}")
    if args.command == "report":
        print(f"summary: {out.dir / 'summary.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
