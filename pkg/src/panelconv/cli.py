"""Command-line front end.

Four subcommands, all driven by JSON config files:

    panelconv estimate   --config cfg.json --out results/
    panelconv simulate   --config cfg.json --out mc/ --jobs 4 --seed 7
    panelconv bias-table --config cfg.json --out tables/
    panelconv two-step   --config cfg.json --out results/

Every output table records the SHA-256 hash of the config it came from and
the seed in force, so results can be traced back to their inputs. Outputs
contain no timestamps: rerunning a command with the same config and seed
reproduces them byte for byte. Monte Carlo replications are always written
in replication order, whatever order workers finish in. Set PANELCONV_LOG
to DEBUG/INFO/WARNING to control logging.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bias import (
    barro_asymptotic_bias,
    nickell_bias_approx,
    twfe_bias_stationary_factor,
    twfe_limit_trended,
)
from .dgp import DgpError, DgpSpec, FactorSpec, replication_seed, simulate_panel
from .estimators import (
    barro_estimate,
    dccemg_estimate,
    dccep_estimate,
    fe_gte_estimate,
    half_panel_jackknife,
    twfe_estimate,
)
from .lstsq import KernelError
from .panel import (
    PanelError,
    SeriesTransform,
    apply_transform,
    load_country_csv,
    load_long_csv,
    restrict,
    write_long_csv,
)
from .twostep import filtered_intercepts, time_invariant_effects

__all__ = ["main"]

logger = logging.getLogger("panelconv.cli")

_ESTIMATORS = {
    "twfe": twfe_estimate,
    "fe-gte": fe_gte_estimate,
    "dccep": dccep_estimate,
    "dccemg": dccemg_estimate,
}


class ConfigError(ValueError):
    """Raised when a config file cannot be used."""


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------


def _load_config(path: str) -> tuple[dict, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    digest = hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return cfg, digest


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, meta: dict, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}: {meta[k]}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def _resolve(base: Path, p: str) -> str:
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def _build_panel(cfg: dict, base: Path):
    if "data" not in cfg:
        raise ConfigError("config needs a 'data' entry (path to a long CSV)")
    panel = load_long_csv(_resolve(base, cfg["data"]))
    for t in cfg.get("transforms", ()):
        try:
            tr = SeriesTransform(
                kind=t["kind"],
                source=t["source"],
                target=t.get("target", t["source"] + "_" + t["kind"]),
                k=int(t.get("k", 1)),
            )
        except KeyError as e:
            raise ConfigError(f"transform entry is missing {e}") from None
        panel = apply_transform(panel, tr)
    r = cfg.get("restrict")
    if r:
        outcome = cfg.get("outcome")
        if outcome is None:
            raise ConfigError("'restrict' needs a top-level 'outcome'")
        if "min_T" in r:
            panel = restrict(panel, outcome, min_T=int(r["min_T"]))
        elif "balanced_window" in r:
            w = r["balanced_window"]
            panel = restrict(panel, outcome, balanced_window=(int(w[0]), int(w[1])))
        else:
            raise ConfigError("'restrict' needs 'min_T' or 'balanced_window'")
    return panel


def _load_groups(spec, base: Path) -> dict:
    if isinstance(spec, dict):
        return spec
    path = _resolve(base, spec)
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"country", "group"} <= set(reader.fieldnames):
            raise ConfigError(f"{path} needs 'country' and 'group' columns")
        for row in reader:
            groups[row["country"]] = row["group"]
    return groups


def _run_method(panel, outcome: str, m: dict, base: Path):
    name = m.get("name")
    if name == "barro":
        return barro_estimate(
            panel,
            outcome,
            year0=int(m["year0"]),
            year1=int(m["year1"]),
            covariates=tuple(m.get("covariates", ())),
            ppp_var=m.get("ppp_var"),
            method=m.get("method", "linear"),
        )
    if name not in _ESTIMATORS:
        raise ConfigError(
            f"unknown method {name!r}; choose from "
            f"{sorted([*_ESTIMATORS, 'barro'])}"
        )
    fn = _ESTIMATORS[name]
    kwargs: dict = {"covariates": tuple(m.get("covariates", ()))}
    if m.get("lags") is not None:
        kwargs["lags"] = int(m["lags"])
    if name in ("dccep", "dccemg") and m.get("csa_lags") is not None:
        kwargs["csa_lags"] = int(m["csa_lags"])
    if name == "dccemg":
        kwargs["homogeneous_covariates"] = tuple(m.get("homogeneous_covariates", ()))
    elif m.get("se_kind"):
        kwargs["se_kind"] = m["se_kind"]
    if name == "fe-gte":
        kwargs["groups"] = _load_groups(m["groups"], base)
    if m.get("jackknife"):
        return half_panel_jackknife(fn, panel, outcome, **kwargs)
    return fn(panel, outcome, **kwargs)


def _report_record(rep) -> dict:
    if hasattr(rep, "year0"):  # cross-section result
        rec = {
            "method": rep.method,
            "outcome": rep.outcome,
            "window": [rep.year0, rep.year1],
            "nobs": rep.nobs,
            "divergent": rep.divergent,
            "coefficients": {
                n: [float(c), float(s)]
                for n, c, s in zip(rep.names, rep.coefficients, rep.std_errors)
            },
            "initial_level_coef": list(rep.initial_coef),
            "phi": list(rep.phi),
            "mean_lag": list(rep.mean_lag),
            "theta": {k: list(v) for k, v in rep.theta.items()},
        }
        if rep.ppp_gap_coef is not None:
            rec["ppp_gap_coef"] = list(rep.ppp_gap_coef)
        return rec
    return {
        "method": rep.method,
        "outcome": rep.outcome,
        "se_kind": rep.se_kind,
        "nobs": rep.nobs,
        "n_countries": rep.n_countries,
        "T": [rep.T_min, rep.T_ave, rep.T_max],
        "p": rep.p,
        "q": rep.q,
        "coefficients": {
            n: [float(c), float(s)]
            for n, c, s in zip(rep.names, rep.coefficients, rep.std_errors)
        },
        "phi": list(rep.phi),
        "mean_lag": list(rep.mean_lag),
        "level_ar": rep.level_ar.tolist() if np.isfinite(rep.phi.value) else None,
        "long_run": {k: list(v) for k, v in rep.long_run.items()},
    }


def _coef_rows(label: str, rep) -> list[list]:
    rows = []
    for n, c, s in zip(rep.names, rep.coefficients, rep.std_errors):
        rows.append([label, "coefficient", n, float(c), float(s)])
    rows.append([label, "derived", "phi", rep.phi.value, rep.phi.se])
    rows.append([label, "derived", "mean_lag", rep.mean_lag.value, rep.mean_lag.se])
    for k, v in getattr(rep, "long_run", {}).items():
        rows.append([label, "derived", f"long_run:{k}", v.value, v.se])
    for k, v in getattr(rep, "theta", {}).items():
        rows.append([label, "derived", f"theta:{k}", v.value, v.se])
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_estimate(cfg: dict, digest: str, out: Path, base: Path, args) -> int:
    outcome = cfg.get("outcome")
    if not outcome:
        raise ConfigError("config needs an 'outcome'")
    methods = cfg.get("methods")
    if not methods:
        raise ConfigError("config needs a nonempty 'methods' list")
    panel = _build_panel(cfg, base)
    records, rows = [], []
    for i, m in enumerate(methods):
        rep = _run_method(panel, outcome, m, base)
        label = m.get("label") or f"{i}:{rep.method}"
        records.append({"label": label, **_report_record(rep)})
        rows.extend(_coef_rows(label, rep))
    meta = {"config_hash": digest, "seed": args.seed}
    _write_json(out / "estimates.json", {"meta": meta, "results": records})
    _write_csv(
        out / "estimates.csv",
        meta,
        ["label", "kind", "term", "estimate", "se"],
        rows,
    )
    print(f"wrote {out / 'estimates.json'} ({len(records)} fits)")
    return 0


def _mc_record(spec_dict: dict, rep_index: int, master_seed: int, methods, base: str):
    spec = DgpSpec.from_dict(spec_dict)
    spec = dataclasses.replace(spec, seed=replication_seed(master_seed, rep_index))
    panel, truth = simulate_panel(spec)
    out = {
        "replication": rep_index,
        "seed": spec.seed,
        "true_phi_mean": float(np.mean(1.0 - truth.draw.rho)),
    }
    fits = {}
    for i, m in enumerate(methods):
        rep = _run_method(panel, "y", m, Path(base))
        label = m.get("label") or f"{i}:{rep.method}"
        fits[label] = {
            "phi": rep.phi.value,
            "phi_se": rep.phi.se,
            "mean_lag": rep.mean_lag.value,
        }
    out["fits"] = fits
    return out, panel


def _cmd_simulate(cfg: dict, digest: str, out: Path, base: Path, args) -> int:
    if "dgp" not in cfg:
        raise ConfigError("config needs a 'dgp' entry")
    try:
        spec = DgpSpec.from_dict(cfg["dgp"])
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad 'dgp' entry: {e}") from None
    n_reps = int(cfg.get("replications", 1))
    if n_reps < 1:
        raise ConfigError("'replications' must be >= 1")
    methods = cfg.get("methods", [])
    export = cfg.get("export_panels", "first")
    if export not in ("first", "all", "none"):
        raise ConfigError("'export_panels' must be 'first', 'all' or 'none'")
    master_seed = args.seed if args.seed is not None else spec.seed
    spec_dict = spec.to_dict()

    payloads = [
        (spec_dict, r, master_seed, methods, str(base)) for r in range(n_reps)
    ]
    results = []
    if args.jobs > 1 and n_reps > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for rec, panel in pool.map(_mc_worker, payloads, chunksize=1):
                results.append((rec, panel))
    else:
        results = [_mc_worker(p) for p in payloads]

    for rec, panel in results:
        r = rec["replication"]
        if export == "all" or (export == "first" and r == 0):
            write_long_csv(panel, str(out / f"panel_{r:04d}.csv"))

    labels = list(results[0][0]["fits"].keys()) if results else []
    rows = []
    for rec, _ in results:
        for label in labels:
            f = rec["fits"][label]
            rows.append(
                [
                    rec["replication"],
                    rec["seed"],
                    label,
                    f["phi"],
                    f["phi_se"],
                    f["mean_lag"],
                    rec["true_phi_mean"],
                ]
            )
    meta = {"config_hash": digest, "seed": master_seed}
    _write_csv(
        out / "replications.csv",
        meta,
        ["replication", "rep_seed", "label", "phi", "phi_se", "mean_lag", "true_phi_mean"],
        rows,
    )
    summary: dict = {
        "meta": meta,
        "replications": n_reps,
        "true_phi_mean": float(np.mean([rec["true_phi_mean"] for rec, _ in results])),
        "methods": {},
    }
    for label in labels:
        phis = np.array([rec["fits"][label]["phi"] for rec, _ in results], dtype=float)
        ses = np.array([rec["fits"][label]["phi_se"] for rec, _ in results], dtype=float)
        good = np.isfinite(phis)
        summary["methods"][label] = {
            "n_finite": int(good.sum()),
            "phi_mean": float(phis[good].mean()) if good.any() else None,
            "phi_sd": float(phis[good].std(ddof=1)) if good.sum() > 1 else None,
            "phi_se_mean": float(ses[good].mean()) if good.any() else None,
        }
    _write_json(out / "summary.json", summary)
    print(f"wrote {out / 'replications.csv'} ({n_reps} replications)")
    return 0


def _mc_worker(payload):
    spec_dict, rep_index, master_seed, methods, base = payload
    return _mc_record(spec_dict, rep_index, master_seed, methods, base)


def _cmd_bias_table(cfg: dict, digest: str, out: Path, base: Path, args) -> int:
    grid = cfg.get("grid")
    if not grid or "rho0" not in grid:
        raise ConfigError("config needs a 'grid' with at least 'rho0'")

    def as_list(v):
        return [v] if isinstance(v, (int, float)) else list(v)

    rho0s = as_list(grid["rho0"])
    Ts = as_list(grid.get("T", [30]))
    regimes = cfg.get(
        "regimes",
        ["cross-section-initial-level", "within-small-T"],
    )
    r = float(cfg.get("dispersion_ratio", 1.0))
    kappa_sq = float(cfg.get("kappa_sq", 1.0))
    mu = float(cfg.get("mu", 0.02))
    factor = FactorSpec(**cfg.get("factor", {"kind": "stationary-ar1", "a": 0.5}))

    header = ["rho0", "T", *regimes]
    rows = []
    for rho0 in rho0s:
        for T in Ts:
            row: list = [rho0, T]
            for regime in regimes:
                if regime == "cross-section-initial-level":
                    row.append(barro_asymptotic_bias(rho0, int(T), r).value)
                elif regime == "within-small-T":
                    row.append(nickell_bias_approx(rho0, int(T)).value)
                elif regime == "twfe-stationary-factor":
                    row.append(twfe_bias_stationary_factor(rho0, kappa_sq, factor).value)
                elif regime == "twfe-trended-collapse":
                    row.append(twfe_limit_trended(rho0, mu).value)
                else:
                    raise ConfigError(f"unknown regime {regime!r}")
            rows.append(row)

    meta = {"config_hash": digest, "seed": args.seed}
    fmt = cfg.get("format", "csv")
    if fmt == "csv":
        _write_csv(out / "bias_table.csv", meta, header, rows)
        target = out / "bias_table.csv"
    elif fmt == "json":
        target = out / "bias_table.json"
        _write_json(
            target,
            {"meta": meta, "rows": [dict(zip(header, row)) for row in rows]},
        )
    elif fmt == "markdown":
        target = out / "bias_table.md"
        lines = ["| " + " | ".join(header) + " |"]
        lines.append("|" + "|".join(["---"] * len(header)) + "|")
        for row in rows:
            lines.append(
                "| " + " | ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row) + " |"
            )
        lines.append("")
        for k in sorted(meta):
            lines.append(f"{k}: {meta[k]}")
        target.write_text("\n".join(lines) + "\n")
    else:
        raise ConfigError("'format' must be csv, json or markdown")
    print(f"wrote {target} ({len(rows)} grid points)")
    return 0


def _cmd_two_step(cfg: dict, digest: str, out: Path, base: Path, args) -> int:
    outcome = cfg.get("outcome")
    if not outcome:
        raise ConfigError("config needs an 'outcome'")
    if "characteristics" not in cfg:
        raise ConfigError("config needs a 'characteristics' CSV path")
    panel = _build_panel(cfg, base)
    covariates = tuple(cfg.get("covariates", ()))
    fspec = cfg.get("filter", {})
    fname = fspec.get("method", "dccep")
    if fname not in _ESTIMATORS:
        raise ConfigError(f"unknown filter method {fname!r}")
    kwargs: dict = {"covariates": covariates}
    if fspec.get("lags") is not None:
        kwargs["lags"] = int(fspec["lags"])
    if fname in ("dccep", "dccemg") and fspec.get("csa_lags") is not None:
        kwargs["csa_lags"] = int(fspec["csa_lags"])
    if fname == "fe-gte":
        kwargs["groups"] = _load_groups(fspec["groups"], base)
    fn = _ESTIMATORS[fname]
    if fspec.get("jackknife", True):
        dynamics = half_panel_jackknife(fn, panel, outcome, **kwargs)
    else:
        dynamics = fn(panel, outcome, **kwargs)
    fi = filtered_intercepts(
        panel, outcome, covariates=covariates, dynamics=dynamics
    )
    table = load_country_csv(_resolve(base, cfg["characteristics"]))
    res = time_invariant_effects(fi, table, variables=cfg.get("variables"))

    meta = {"config_hash": digest, "seed": args.seed}
    payload = {
        "meta": meta,
        "filter": _report_record(dynamics),
        "intercepts": fi.as_mapping(),
        "effects": {
            "names": list(res.names),
            "coefficients": {
                n: [float(c), float(s)]
                for n, c, s in zip(res.names, res.coefficients, res.std_errors)
            },
            "nobs": res.nobs,
            "se_kind": res.se_kind,
            "dropped": list(res.dropped),
        },
    }
    _write_json(out / "twostep.json", payload)
    rows = [
        ["effects", "coefficient", n, float(c), float(s)]
        for n, c, s in zip(res.names, res.coefficients, res.std_errors)
    ]
    rows += _coef_rows("filter", dynamics)
    _write_csv(
        out / "twostep.csv", meta, ["stage", "kind", "term", "estimate", "se"], rows
    )
    print(f"wrote {out / 'twostep.json'} (n={res.nobs})")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="panelconv",
        description="Panel convergence analysis: estimation, simulation, "
        "bias tables and two-step regressions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("estimate", _cmd_estimate),
        ("simulate", _cmd_simulate),
        ("bias-table", _cmd_bias_table),
        ("two-step", _cmd_two_step),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)

    level = os.environ.get("PANELCONV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))

    try:
        cfg, digest = _load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = Path(args.config).resolve().parent
    try:
        return args.fn(cfg, digest, out, base, args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PanelError, KernelError, DgpError, ValueError) as e:
        diag = {
            "command": args.command,
            "config_hash": digest,
            "error": type(e).__name__,
            "message": str(e),
        }
        _write_json(out / "error.json", diag)
        print(f"error [{type(e).__name__}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
