"""Batch front door: seeded ensembles, diagnostics and enumeration checks.

One JSON config document drives every command; individual fields can be
overridden with flags.  Identical (command, config, seed) runs produce
byte-identical outputs regardless of the worker count.

Exit codes: 0 ok, 1 runtime failure, 2 config error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import diagnostics as diag
from . import enumeration as enum_
from .assembly import exact_path_probability, iter_ensemble, replica_rng, sample_polymer
from .contacts import (
    Disordered,
    Homogeneous,
    Periodic,
    load_charges,
    load_custom_weights,
    make_law,
    set_probability,
)
from .excursions import build_kernel, path_probability
from .output import write_csv, write_json, write_sidecar
from .walk import WalkParams

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_ORACLE = 3


class ConfigError(ValueError):
    pass


class OracleMismatch(RuntimeError):
    pass


DEFAULT_CONFIG = {
    "p": 0.3,
    "family": {"type": "homogeneous", "beta": 0.0},
    "N": [100],
    "replicas": 1000,
    "seed": 0,
    "out": "out",
    "workers": 0,  # 0 -> machine parallelism
    "mode": "exact",
    "rational": False,
    "signed_excursions": False,
    "ensemble_format": "csv",
    "batch_size": 10000,
    "delta_grid": [2.0**-k for k in range(0, 9)],
    "gamma": 0.5,
    "a_grid": [0.25 * j for j in range(0, 41)],
    "n_max": 200,
    "n_list": [2, 10, 100, 1000, 3000, 6000],
    "mc_samples": 10000,
    "quantiles": [0.5, 0.9, 0.99, 1.0],
    "oracle_samples": 0,
    "oracle_tol": 1e-10,
    "kernel_tol": 1e-12,
    "kernel_t_max": 12,
    "chi2_significance": 1e-3,
}


def _fail(field, msg):
    raise ConfigError(f"config field '{field}': {msg}")


def _as_int_list(value, field):
    if isinstance(value, (int, np.integer)):
        value = [int(value)]
    try:
        out = [int(v) for v in value]
    except (TypeError, ValueError):
        _fail(field, f"expected an integer or list of integers, got {value!r}")
    if not out:
        _fail(field, "must be nonempty")
    return out


def _as_float_list(value, field):
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        _fail(field, f"expected a list of numbers, got {value!r}")
    if not out:
        _fail(field, "must be nonempty")
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path}: top level must be a JSON object")
    if "config" in doc and "command" in doc:  # a sidecar: unwrap
        doc = doc["config"]
    return doc


def resolve_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if args.config:
        try:
            user = load_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            _fail(sorted(unknown)[0], "unknown field")
        cfg.update(user)
    for flag in ("p", "seed", "out", "workers", "mode", "replicas", "gamma",
                 "n_max", "mc_samples", "oracle_samples"):
        v = getattr(args, flag.replace("-", "_"), None)
        if v is not None:
            cfg[flag] = v
    if getattr(args, "N", None):
        cfg["N"] = _as_int_list(args.N, "N")
    if getattr(args, "beta", None) is not None:
        fam = dict(cfg["family"])
        fam["beta"] = args.beta
        cfg["family"] = fam
    if getattr(args, "delta_grid", None):
        cfg["delta_grid"] = _as_float_list(args.delta_grid, "delta_grid")
    if getattr(args, "a_grid", None):
        cfg["a_grid"] = _as_float_list(args.a_grid, "a_grid")
    if getattr(args, "n_list", None):
        cfg["n_list"] = _as_int_list(args.n_list, "n_list")
    if getattr(args, "signed", False):
        cfg["signed_excursions"] = True
    if getattr(args, "format", None):
        cfg["ensemble_format"] = args.format
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    p = cfg["p"]
    if not isinstance(p, (int, float)) or not (0.0 < float(p) <= 0.5):
        _fail("p", f"must lie in (0, 1/2], got {p}")
    cfg["p"] = float(p)
    cfg["N"] = _as_int_list(cfg["N"], "N")
    if min(cfg["N"]) < 1:
        _fail("N", "system sizes must be >= 1")
    for field in ("replicas", "seed", "n_max", "mc_samples", "batch_size"):
        if not isinstance(cfg[field], (int, np.integer)) or isinstance(cfg[field], bool):
            _fail(field, f"must be an integer, got {cfg[field]!r}")
    if cfg["replicas"] < 1:
        _fail("replicas", "must be >= 1")
    if not (0 <= cfg["seed"] < 2**64):
        _fail("seed", "must fit in 64 bits")
    if cfg["workers"] is None or not isinstance(cfg["workers"], (int, np.integer)):
        _fail("workers", "must be an integer (0 = machine parallelism)")
    if cfg["mode"] not in ("exact", "mc"):
        _fail("mode", f"must be 'exact' or 'mc', got {cfg['mode']!r}")
    if cfg["ensemble_format"] not in ("csv", "npy"):
        _fail("ensemble_format", f"must be 'csv' or 'npy', got {cfg['ensemble_format']!r}")
    cfg["delta_grid"] = _as_float_list(cfg["delta_grid"], "delta_grid")
    if min(cfg["delta_grid"]) <= 0.0 or max(cfg["delta_grid"]) > 1.0:
        _fail("delta_grid", "deltas must lie in (0, 1]")
    cfg["a_grid"] = _as_float_list(cfg["a_grid"], "a_grid")
    if min(cfg["a_grid"]) < 0.0:
        _fail("a_grid", "thresholds must be >= 0")
    cfg["n_list"] = _as_int_list(cfg["n_list"], "n_list")
    if not isinstance(cfg["gamma"], (int, float)) or cfg["gamma"] <= 0.0:
        _fail("gamma", f"must be positive, got {cfg['gamma']!r}")
    cfg["gamma"] = float(cfg["gamma"])
    fam = cfg["family"]
    if not isinstance(fam, dict) or "type" not in fam:
        _fail("family", "must be an object with a 'type'")
    if fam["type"] not in ("homogeneous", "periodic", "disordered", "custom"):
        _fail("family.type", f"unknown family {fam['type']!r}")


def build_family(cfg: dict):
    fam = cfg["family"]
    kind = fam["type"]
    if kind == "homogeneous":
        return Homogeneous(beta=float(fam.get("beta", 0.0)))
    if kind == "periodic":
        betas = fam.get("betas")
        if not betas:
            _fail("family.betas", "periodic family needs a nonempty list")
        return Periodic(betas=tuple(float(b) for b in betas))
    if kind == "disordered":
        charges = None
        if fam.get("charges_file"):
            charges = tuple(load_charges(fam["charges_file"]))
        return Disordered(
            beta=float(fam.get("beta", 0.0)),
            lam=float(fam.get("lambda", 0.0)),
            seed=int(fam.get("charges_seed", cfg["seed"])),
            gaussian=bool(fam.get("gaussian", False)),
            charges=charges,
        )
    if kind == "custom":
        if not fam.get("weights_file"):
            _fail("family.weights_file", "custom family needs a weight table")
        return load_custom_weights(fam["weights_file"])
    raise AssertionError(kind)


def _workers(cfg) -> int:
    w = int(cfg["workers"])
    return w if w > 0 else (os.cpu_count() or 1)


def _outdir(cfg) -> str:
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_sample(cfg) -> int:
    walk = WalkParams(cfg["p"])
    family = build_family(cfg)
    out = _outdir(cfg)
    for n in cfg["N"]:
        law = make_law(n, family, walk)
        path = sample_polymer(law, walk, replica_rng(cfg["seed"], 0),
                              cfg["signed_excursions"])
        print(",".join(str(int(v)) for v in path))
        fname = os.path.join(out, f"sample_N{n}.csv")
        write_csv(fname, ["step", "value"],
                  ([i + 1, int(v)] for i, v in enumerate(path)))
        write_sidecar(fname, "sample", cfg)
    return EXIT_OK


def cmd_ensemble(cfg) -> int:
    walk = WalkParams(cfg["p"])
    family = build_family(cfg)
    out = _outdir(cfg)
    for n in cfg["N"]:
        law = make_law(n, family, walk)
        if cfg["ensemble_format"] == "csv":
            fname = os.path.join(out, f"ensemble_N{n}.csv")
            import csv as _csv

            with open(fname, "w", newline="") as fh:
                wr = _csv.writer(fh, lineterminator="\n")
                wr.writerow(["replica"] + [f"y{i}" for i in range(1, n + 1)])
                for lo, block in iter_ensemble(
                    law, walk, cfg["replicas"], cfg["seed"],
                    workers=_workers(cfg), signed=cfg["signed_excursions"],
                    batch=cfg["batch_size"],
                ):
                    for off, row in enumerate(block):
                        wr.writerow([lo + off] + [int(v) for v in row])
            write_sidecar(fname, "ensemble", cfg)
        else:
            for lo, block in iter_ensemble(
                law, walk, cfg["replicas"], cfg["seed"],
                workers=_workers(cfg), signed=cfg["signed_excursions"],
                batch=cfg["batch_size"],
            ):
                fname = os.path.join(out, f"ensemble_N{n}_{lo:08d}.npy")
                np.save(fname, block)
                write_sidecar(fname, "ensemble", cfg)
    return EXIT_OK


def cmd_partition(cfg) -> int:
    walk = WalkParams(cfg["p"])
    family = build_family(cfg)
    out = _outdir(cfg)
    for n in cfg["N"]:
        law = make_law(n, family, walk)
        pt = law.partition()
        fname = os.path.join(out, f"partition_N{n}.csv")
        rows = [
            {"i": i, "Z": float(pt.z[i]), "log_Z": float(pt.log_z[i])}
            for i in range(n + 1)
        ]
        rows.append({"i": "total", "Z": pt.total, "log_Z": pt.log_total})
        write_csv(fname, ["i", "Z", "log_Z"], rows)
        write_sidecar(fname, "partition", cfg)
    return EXIT_OK


def cmd_diagnose(cfg, which: str) -> int:
    walk = WalkParams(cfg["p"])
    family = build_family(cfg)
    out = _outdir(cfg)
    if which == "modulus":
        curves = diag.modulus_curves(
            walk, family, cfg["N"], cfg["replicas"], cfg["delta_grid"],
            cfg["seed"], quantiles=cfg["quantiles"], workers=_workers(cfg),
            signed=cfg["signed_excursions"],
        )
        fname = os.path.join(out, "modulus_curves.csv")
        write_csv(fname, ["N", "delta", "quantile", "gamma", "gamma_tilde"], curves.rows)
        write_sidecar(fname, "diagnose modulus", cfg)
    elif which == "c-of-a":
        if cfg["mode"] == "mc":
            rng = replica_rng(cfg["seed"], 0)
            rows = []
            for n in cfg["n_list"]:
                for a in cfg["a_grid"]:
                    est, err = diag.c_of_a(walk, n, a, mode="mc",
                                           samples=cfg["mc_samples"], rng=rng)
                    rows.append({"n": n, "a": a, "value": est, "stderr": err})
            fname = os.path.join(out, "c_values_mc.csv")
            write_csv(fname, ["n", "a", "value", "stderr"], rows)
            write_sidecar(fname, "diagnose c-of-a", cfg)
        else:
            table = diag.c_table(walk, cfg["n_max"], cfg["a_grid"])
            fname = os.path.join(out, "c_values.csv")
            write_csv(fname, ["n", "a", "value"], table.rows())
            write_sidecar(fname, "diagnose c-of-a", cfg)
            fsup = os.path.join(out, "c_functional.csv")
            write_csv(fsup, ["a", "C", "argmax_n"], table.sup_rows())
            write_sidecar(fsup, "diagnose c-of-a", cfg)
    elif which == "lemma":
        n_grid = [n for n in range(2, cfg["n_max"] + 1)]
        table = diag.lemma_table(walk, n_grid, cfg["a_grid"])
        fname = os.path.join(out, "lemma.csv")
        write_csv(fname, ["n", "a", "f", "bound"], table.rows())
        write_sidecar(fname, "diagnose lemma", cfg)
        write_json(os.path.join(out, "lemma_summary.json"),
                   {"max_bound": table.max_bound(), "n_max": cfg["n_max"]})
    elif which == "ck":
        table = diag.ck_series(walk, cfg["n_list"])
        fname = os.path.join(out, "ck.csv")
        write_csv(fname, ["n", "value"], table.rows())
        write_sidecar(fname, "diagnose ck", cfg)
        fratio = os.path.join(out, "ck_ratios.csv")
        write_csv(fratio, ["n", "ratio"], table.doubling_ratios())
        write_sidecar(fratio, "diagnose ck", cfg)
    elif which == "tightness":
        grid = diag.tightness_sweep(
            walk, family, cfg["N"], cfg["replicas"], cfg["delta_grid"],
            cfg["gamma"], cfg["seed"], workers=_workers(cfg),
            signed=cfg["signed_excursions"],
        )
        for suffix, rows in (("gamma", grid.rows_gamma), ("gamma_tilde", grid.rows_tilde)):
            fname = os.path.join(out, f"tightness_{suffix}.csv")
            write_csv(fname, ["N", "delta", "gamma", "exceedance", "stderr"], rows)
            write_sidecar(fname, "diagnose tightness", cfg)
    else:
        raise ConfigError(f"unknown diagnose target {which!r}")
    return EXIT_OK


def _oracle_rows(cfg):
    """Exhaustive cross-checks at enumeration scale; yields report rows."""
    walk = WalkParams(cfg["p"])
    family = build_family(cfg)
    tol = float(cfg["oracle_tol"])
    ktol = float(cfg["kernel_tol"])
    rows = []

    def check(name, n, t, value, tolerance):
        rows.append({
            "check": name, "N": n, "t": t, "value": float(value),
            "tolerance": tolerance, "passed": bool(value <= tolerance),
        })

    for t in range(1, int(cfg["kernel_t_max"]) + 1):
        for kind in ("bulk", "final"):
            ref = enum_.excursion_law_bruteforce(walk, t, kind)
            kern = build_kernel(walk, t, kind)
            tv = 0.0
            for pathvals, pr in ref.items():
                tv += abs(path_probability(kern, pathvals) - pr)
            tv *= 0.5
            check(f"kernel_tv_{kind}", 0, t, tv, ktol)
            edev = abs(
                math.exp(kern.log_event_probability)
                - enum_.event_probability_bruteforce(walk, t, kind)
            )
            check(f"event_probability_{kind}", 0, t, edev, ktol)

    for n in cfg["N"]:
        if n > 12:
            raise ConfigError(f"oracle command is enumeration-scale, N <= 12 (got {n})")
        law = make_law(n, family, walk)
        ref_sets = enum_.contact_law_bruteforce(law)
        dev = 0.0
        for contacts, pr in ref_sets.items():
            dev = max(dev, abs(set_probability(law, contacts) - pr))
        check("contact_set_probability_dev", n, 0, dev, tol)
        total = sum(
            set_probability(law, contacts) for contacts in ref_sets
        )
        check("contact_set_total_mass_dev", n, 0, abs(total - 1.0), tol)

        ref_paths = enum_.polymer_law_bruteforce(law, walk)
        total = 0.0
        dev = 0.0
        for pathvals, pr in ref_paths.items():
            mine = exact_path_probability(law, walk, np.asarray(pathvals))
            dev = max(dev, abs(mine - pr))
            total += mine
        check("path_probability_dev", n, 0, dev, tol)
        check("path_total_mass_dev", n, 0, abs(total - 1.0), tol)

        if cfg["oracle_samples"] > 0:
            m = int(cfg["oracle_samples"])
            counts: dict = {}
            for lo, block in iter_ensemble(law, walk, m, cfg["seed"],
                                           workers=_workers(cfg),
                                           batch=cfg["batch_size"]):
                for row in block:
                    key = tuple(int(v) for v in row)
                    counts[key] = counts.get(key, 0) + 1
            pval = enum_.multinomial_chi2(ref_paths, counts, m)
            rows.append({
                "check": "sampler_chi2_pvalue", "N": n, "t": 0, "value": pval,
                "tolerance": cfg["chi2_significance"],
                "passed": bool(pval >= cfg["chi2_significance"]),
            })
    return rows


def cmd_oracle(cfg) -> int:
    rows = _oracle_rows(cfg)
    out = _outdir(cfg)
    fname = os.path.join(out, "oracle_report.csv")
    write_csv(fname, ["check", "N", "t", "value", "tolerance", "passed"], rows)
    write_sidecar(fname, "oracle", cfg)
    bad = [r for r in rows if not r["passed"]]
    for r in bad:
        print(f"FAIL {r['check']} N={r['N']} t={r['t']}: "
              f"{r['value']} vs {r['tolerance']}", file=sys.stderr)
    if bad:
        raise OracleMismatch(f"{len(bad)} oracle check(s) out of tolerance")
    print(f"oracle: {len(rows)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file (or a sidecar)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--mode", choices=["exact", "mc"])
    sp.add_argument("--p", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("-N", "--N", type=int, nargs="+")
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--delta-grid", dest="delta_grid", type=float, nargs="+")
    sp.add_argument("--a-grid", dest="a_grid", type=float, nargs="+")
    sp.add_argument("--n-list", dest="n_list", type=int, nargs="+")
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--mc-samples", dest="mc_samples", type=int)
    sp.add_argument("--oracle-samples", dest="oracle_samples", type=int)
    sp.add_argument("--signed", action="store_true")
    sp.add_argument("--format", choices=["csv", "npy"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pinwalk",
        description="exact/Monte-Carlo engine for pinned path measures and "
                    "their tightness diagnostics",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("sample", "ensemble", "partition", "oracle"):
        _add_common(sub.add_parser(name))
    dg = sub.add_parser("diagnose")
    dg.add_argument("which", choices=["modulus", "c-of-a", "lemma", "ck", "tightness"])
    _add_common(dg)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "ensemble":
            return cmd_ensemble(cfg)
        if args.command == "partition":
            return cmd_partition(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, args.which)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
