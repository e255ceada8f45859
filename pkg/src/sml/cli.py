"""Command-line front end: config parsing, experiment dispatch, deterministic
CSV/JSON emission.

Exit codes: 0 = success with all asserted properties passing, 1 = config or
I/O error (single-line diagnostic on stderr), 2 = property failure (with a
machine-readable failure report in the output directory).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, graph_laplacian as gl, heat_pca, kernels, perturbation, spectral
from .errors import ConfigError, SpectralLabError

log = logging.getLogger("sml")

SUBCOMMANDS = ("sample", "spectrum", "laplacian", "pca", "corollary1",
               "corollary2", "approx-error", "concentration", "bounds-suite",
               "eig-sums")

_MANIFOLD_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["circle", "torus", "two_circles"]},
        "dim": {"type": "integer", "minimum": 1},
        "separation": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["family"],
    "additionalProperties": False,
}

_BASE_PROPERTIES = {
    "manifold": _MANIFOLD_SCHEMA,
    "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 1},
               "minItems": 1},
    "t_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                          "maximum": 1.0}, "minItems": 1},
    "replicates": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer"},
    "j_values": {"type": "array", "items": {"type": "integer", "minimum": 1},
                 "minItems": 1},
    "kernel": {"enum": list(kernels.KERNEL_KINDS)},
    "truncation_eps": {"type": "number", "exclusiveMinimum": 0},
    "regularizer_power": {"type": "integer", "minimum": 1},
    "parallel": {"type": "integer", "minimum": 1},
}


def _schema(extra_properties=None, required=("manifold",)):
    props = dict(_BASE_PROPERTIES)
    props.update(extra_properties or {})
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


SCHEMAS = {
    "sample": _schema({"count": {"type": "integer", "minimum": 1}}),
    "spectrum": _schema({"count": {"type": "integer", "minimum": 1}}),
    "laplacian": _schema({"export_matrices": {"type": "boolean"}}),
    "pca": _schema(),
    "corollary1": _schema(),
    "corollary2": _schema(),
    "approx-error": _schema(),
    "concentration": _schema({
        "checks": {"type": "array",
                   "items": {"enum": ["degree", "reduction", "bernstein", "hilbert"]},
                   "minItems": 1},
        "dimension": {"type": "integer", "minimum": 2},
        "trials": {"type": "integer", "minimum": 1},
        "u_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "decay": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "y_values": {"type": "array", "items": {"type": "number", "minimum": 1}},
    }),
    "bounds-suite": _schema({"instances": {"type": "integer", "minimum": 1}},
                            required=()),
    "eig-sums": _schema(),
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class OutputWriter:
    """CSV/JSON emission with fixed field order and round-trip floats."""

    def __init__(self, out_dir: Path, reproducible: bool):
        self.out_dir = out_dir
        self.reproducible = reproducible
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, fieldnames, records) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if not self.reproducible:
                fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fieldnames)
            for rec in records:
                writer.writerow([_fmt(rec.get(k)) for k in fieldnames])
        log.info("wrote %s (%d rows)", path, len(records))
        return path

    def json(self, name: str, payload) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        log.info("wrote %s", path)
        return path

    def json_lines(self, name: str, lines) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
        log.info("wrote %s (%d lines)", path, len(lines))
        return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, experiments.RateFit):
        return obj.to_dict()
    raise TypeError(f"not JSON serializable: {type(obj)}")


class PropertyFailure(Exception):
    """An asserted property failed; carries the machine-readable report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def _load_config(args, command) -> tuple:
    if args.config is None:
        if command == "bounds-suite":
            raw = {}
        else:
            raise ConfigError("--config PATH is required for this subcommand")
    else:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config}: {exc}") from exc
    import jsonschema
    try:
        jsonschema.validate(raw, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc

    if args.seed is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw and os.environ.get("SML_SEED"):
        try:
            raw["seed"] = int(os.environ["SML_SEED"])
        except ValueError as exc:
            raise ConfigError(f"SML_SEED is not an integer: {exc}") from exc
    if args.parallel is not None:
        raw["parallel"] = args.parallel
    elif "parallel" not in raw:
        raw["parallel"] = max(1, os.cpu_count() or 1)

    extra_keys = {"sample": ("count",), "spectrum": ("count",),
                  "laplacian": ("export_matrices",),
                  "concentration": ("checks",)}.get(command, ())
    cfg = None
    if command != "bounds-suite":
        cfg = experiments.config_from_dict(raw, extra_keys=extra_keys)
    return raw, cfg


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_sample(raw, cfg, out: OutputWriter):
    n = raw.get("count", cfg.n_grid[-1])
    cloud = cfg.manifold.sample_uniform(n, cfg.seed)
    d, p = cloud.intrinsic.shape[1], cloud.ambient.shape[1]
    fields = (["index", "component"]
              + [f"intrinsic_{a}" for a in range(d)]
              + [f"ambient_{a}" for a in range(p)])
    records = []
    for i in range(n):
        rec = {"index": i, "component": int(cloud.component_labels[i])}
        rec.update({f"intrinsic_{a}": cloud.intrinsic[i, a] for a in range(d)})
        rec.update({f"ambient_{a}": cloud.ambient[i, a] for a in range(p)})
        records.append(rec)
    out.csv("sample.csv", fields, records)
    return {"n": n, "seed": cfg.seed, "manifold": cfg.manifold.family}


def _cmd_spectrum(raw, cfg, out: OutputWriter):
    count = raw.get("count", 64)
    mus = cfg.manifold.eigenvalues(count)
    records = [{"j": j + 1, "mu": float(mus[j])} for j in range(count)]
    out.csv("spectrum.csv", ["j", "mu"], records)
    return {"count": count, "manifold": cfg.manifold.family}


def _cmd_laplacian(raw, cfg, out: OutputWriter):
    model = cfg.manifold
    n = cfg.n_grid[-1]
    t = cfg.t_grid[0]
    cloud = model.sample_uniform(n, cfg.seed)
    spec = kernels.KernelSpec(cfg.kernel, t, model.d)
    w = kernels.build_kernel_matrix(cloud, spec, eps=cfg.truncation_eps)
    lap = gl.build_laplacian(w)
    dec = spectral.eigh(lap.matrix)
    records = [{"j": j + 1, "lambda": float(dec.eigenvalues[j])} for j in range(n)]
    out.csv("laplacian_eigenvalues.csv", ["j", "lambda"], records)
    if raw.get("export_matrices"):
        idx_fields = [f"c{k}" for k in range(n)]
        out.csv("kernel_matrix.csv", idx_fields,
                [{f"c{k}": w.entries[i, k] for k in range(n)} for i in range(n)])
        out.csv("laplacian_matrix.csv", idx_fields,
                [{f"c{k}": lap.matrix[i, k] for k in range(n)} for i in range(n)])

    norm_l = max(abs(dec.eigenvalues[0]), abs(dec.eigenvalues[-1]))
    lam1_ok = abs(dec.eigenvalues[0]) <= 1e-10 * norm_l
    ones_residual = float(np.abs(lap.matrix @ np.ones(n)).max())
    ones_ok = ones_residual <= 1e-10 * norm_l
    if not (lam1_ok and ones_ok):
        raise PropertyFailure("graph Laplacian invariants failed", {
            "lambda_1": float(dec.eigenvalues[0]),
            "ones_residual": ones_residual,
            "norm": float(norm_l),
        })
    return {"n": n, "t": t, "kernel": cfg.kernel,
            "lambda_1": float(dec.eigenvalues[0]),
            "lambda_2": float(dec.eigenvalues[1])}


def _cmd_pca(raw, cfg, out: OutputWriter):
    model = cfg.manifold
    n = cfg.n_grid[-1]
    t = cfg.t_grid[0]
    cloud = model.sample_uniform(n, cfg.seed)
    f = heat_pca.feature_matrix(cloud, t, eps=cfg.truncation_eps)
    j_max = min(max(cfg.j_values), f.rank, n)
    records = heat_pca.empirical_vs_population(f, j_max)
    out.csv("pca.csv", ["j", "mu_j", "lambda_hat", "eig_gap", "proj_dist",
                        "n", "t", "seed"], records)
    trick = heat_pca.kernel_trick_check(f)
    summary = {"kernel_trick": json.loads(trick.to_json()),
               "rank": f.rank, "tail_mass": f.tail_mass}
    if not trick.passed:
        raise PropertyFailure("kernel trick check failed", summary)
    return summary


def _cmd_corollary1(raw, cfg, out: OutputWriter):
    res = experiments.corollary1_sweep(cfg)
    out.csv("corollary1.csv", ["n", "t", "seed", "j", "lambda", "mu", "abs_err"],
            res.records)
    return {"fits": {k: v.to_dict() for k, v in res.fits.items()},
            "summary": res.summary}


def _cmd_corollary2(raw, cfg, out: OutputWriter):
    res = experiments.corollary2_sweep(cfg)
    out.csv("corollary2.csv", ["n", "t", "seed", "j", "procrustes_dist"],
            res.records)
    return {"fits": {k: v.to_dict() for k, v in res.fits.items()},
            "summary": res.summary}


def _cmd_approx_error(raw, cfg, out: OutputWriter):
    model = cfg.manifold
    n = cfg.n_grid[-1]
    cloud = model.sample_uniform(n, cfg.seed)
    records = []
    failures = []
    for t in cfg.t_grid:
        for scan in (kernels.kernel_residual_scan, kernels.heat_geodesic_residual_scan):
            rep = scan(cloud, t, power=cfg.regularizer_power, eps=cfg.truncation_eps)
            rec = {"scan": rep.name, "t": t, "K": cfg.regularizer_power,
                   "C_mult": rep.context["C_mult"], "C_add": rep.context["C_add"],
                   "pass": rep.passed}
            records.append(rec)
            if not rep.passed:
                failures.append(rec)
    out.csv("approx_error.csv", ["scan", "t", "K", "C_mult", "C_add", "pass"],
            records)
    if failures:
        raise PropertyFailure("additive residual constant exceeded 1", failures)
    return {"scans": records}


def _cmd_concentration(raw, cfg, out: OutputWriter):
    checks = raw.get("checks", ["degree", "reduction", "bernstein", "hilbert"])
    summary = {}
    failures = {}
    if "degree" in checks:
        res = experiments.degree_concentration(cfg)
        out.csv("degree_concentration.csv", ["n", "t", "seed", "max_degree_dev"],
                res.records)
        summary["degree"] = {"fits": res.fits, "summary": res.summary}
    if "reduction" in checks:
        res = experiments.reduction_chain(cfg)
        out.csv("reduction_chain.csv",
                ["t", "n", "seed", "j", "step1_gap", "step2_gap", "step2_bound",
                 "step3_gap", "c3_constant"], res.records)
        summary["reduction"] = res.summary
        if res.summary["max_step1_gap"] > 1e-9:
            failures["reduction_step1"] = res.summary["max_step1_gap"]
        if res.summary["step2_violations"]:
            failures["reduction_step2"] = res.summary["step2_violations"]
    if "bernstein" in checks:
        res = experiments.operator_bernstein_mc(cfg)
        out.csv("operator_bernstein.csv",
                ["u", "empirical_tail", "bound", "vacuous", "violation",
                 "n", "dimension", "trials"], res.records)
        summary["bernstein"] = res.summary
        if res.summary["violations"]:
            failures["bernstein_violations"] = res.summary["violations"]
    if "hilbert" in checks:
        res = experiments.hilbert_norm_mc(cfg)
        out.csv("hilbert_norm.csv",
                ["n", "y", "quantile", "bound_scale", "c_fitted", "trials"],
                res.records)
        summary["hilbert"] = res.summary
    if failures:
        raise PropertyFailure("concentration checks failed", failures)
    return summary


def _cmd_bounds_suite(raw, cfg, out: OutputWriter):
    instances = raw.get("instances", 10_000)
    seed = raw.get("seed", 20240901)
    results = perturbation.run_property_suites(n_instances=instances, seed=seed)
    lines = []
    total_violations = 0
    for name, res in results.items():
        total_violations += res.violations
        lines.append(json.dumps({
            "suite": name, "instances": res.instances,
            "violations": res.violations, "skipped": res.skipped,
            "worst_slack": res.worst_slack, "extras": res.extras,
        }, sort_keys=True))
    out.json_lines("bounds_suite.jsonl", lines)
    summary = {name: {"violations": res.violations, "skipped": res.skipped,
                      "worst_slack": res.worst_slack}
               for name, res in results.items()}
    if total_violations:
        raise PropertyFailure(f"{total_violations} bound violations", summary)
    return summary


def _cmd_eig_sums(raw, cfg, out: OutputWriter):
    res = experiments.eigenvalue_sum_check(cfg.manifold, cfg.t_grid)
    out.csv("eig_sums.csv", ["t", "s1", "s2", "s3", "scaled_s1", "scaled_s2",
                             "scaled_s3"], res.records)
    return res.summary


_COMMANDS = {
    "sample": _cmd_sample,
    "spectrum": _cmd_spectrum,
    "laplacian": _cmd_laplacian,
    "pca": _cmd_pca,
    "corollary1": _cmd_corollary1,
    "corollary2": _cmd_corollary2,
    "approx-error": _cmd_approx_error,
    "concentration": _cmd_concentration,
    "bounds-suite": _cmd_bounds_suite,
    "eig-sums": _cmd_eig_sums,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sml",
        description="Spectral manifold laboratory: graph Laplacians, heat-kernel "
                    "PCA and perturbation-bound experiments on analytic manifolds.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", default="sml-out",
                       help="output directory (created if absent)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--reproducible", action="store_true",
                       help="suppress the timestamped CSV header line")
        p.add_argument("--schema", action="store_true",
                       help="print this subcommand's config JSON schema and exit")
        p.add_argument("--parallel", type=int, default=None,
                       help="worker threads for replicate sweeps")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose > 1 else
        logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.schema:
        json.dump(SCHEMAS[args.command], sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    try:
        raw, cfg = _load_config(args, args.command)
        out = OutputWriter(Path(args.out), args.reproducible)
        summary = _COMMANDS[args.command](raw, cfg, out)
        out.json("summary.json", {"command": args.command, "status": "ok",
                                  "result": summary})
        return 0
    except PropertyFailure as exc:
        out = OutputWriter(Path(args.out), args.reproducible)
        out.json("failure_report.json", {"command": args.command,
                                         "status": "property_failure",
                                         "message": str(exc),
                                         "details": exc.report})
        print(f"sml {args.command}: property failure: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"sml {args.command}: {exc}", file=sys.stderr)
        return 1
    except SpectralLabError as exc:
        print(f"sml {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"sml {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
