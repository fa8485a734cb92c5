"""Configuration file parsing, output emission and the command line.

The configuration is a flat INI file with four sections; unknown keys are
rejected and every value is range-checked.  All outputs are CSV with
'#'-prefixed metadata headers and fixed 12-significant-digit formatting, so
repeated runs with the same configuration and seeds are byte-identical; a
JSON manifest lists each emitted file with its SHA-256 hash.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .bathbuilder import AnisotropyMode, EPBathSpec, FarBathSpec
from .config import DonorConfig
from .constants import GAMMA_E, GAMMA_N_SI29
from .epcensus import FILTERED, ISOTROPIC, ep_density_profile
from .experiment import (
    Model,
    RunSpec,
    SweepAxis,
    T2Method,
    convergence_sweep,
    default_time_grid,
    ensemble_average,
    j_trend_study,
    run_decay,
)

log = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


def _positive(x):
    return x > 0


def _fraction(x):
    return 0.0 <= x <= 1.0


def _unit_interval_open(x):
    return 0.0 < x <= 1.0


# key -> (type, default, validator or None, provenance)
_SCHEMA = {
    "donor": {
        "a0_angstrom": (float, 5.43, _positive, "model: Si lattice constant"),
        "p": (float, 0.0467, _fraction, "model: natural 29Si abundance"),
        "ionization_energy_ev": (float, 0.044, _positive,
                                 "model: P donor ionization energy"),
        "kl_a_angstrom": (float, 25.09, _positive,
                          "external: de Sousa & Das Sarma, PRB 68, 115322"),
        "kl_b_angstrom": (float, 14.43, _positive,
                          "external: de Sousa & Das Sarma, PRB 68, 115322"),
        "eta": (float, 186.0, _positive,
                "external: de Sousa & Das Sarma, PRB 68, 115322"),
        "gamma_e_rad_per_s_per_t": (float, GAMMA_E, _positive,
                                    "external: CODATA"),
        "gamma_n_rad_per_s_per_t": (float, GAMMA_N_SI29, _positive,
                                    "external: 29Si tables"),
        "b0_tesla": (float, 0.35, _positive, "external: X-band convention"),
        "b_direction": (str, "1 0 0", None, "model: field along [100]"),
        "r0_angstrom": (float, 20.0, _positive,
                        "model: hyperfine dipolar-tail cutoff"),
    },
    "lattice": {
        "extent_cells": (int, 0, lambda x: x >= 0, "derived when 0"),
        "seed": (int, 12345, None, "artifact"),
    },
    "model": {
        "kind": (str, "far_bath", None, "artifact"),
        "qubit_target_j_hz": (float, 0.0, lambda x: x >= 0, "artifact"),
        "n_realizations": (int, 100, _positive, "model: ensemble size"),
        "t2_method": (str, "one_over_e", None, "artifact"),
        "exclude_direct_partner_outliers": (bool, True, None, "model"),
        "t_min_s": (float, 1e-4, _positive, "artifact"),
        "t_max_s": (float, 10.0, _positive, "artifact"),
        "t_points": (int, 200, lambda x: x >= 2, "artifact"),
        "r_min_angstrom": (float, 50.0, _positive, "model: far-bath window"),
        "r_max_angstrom": (float, 350.0, _positive, "model: far-bath window"),
        "pair_sep_max_angstrom": (float, 50.0, _positive,
                                  "model: far-bath pair separation"),
        "c12_min_hz": (float, 0.01, _positive, "model: intrabath window"),
        "c12_max_hz": (float, 1.0, _positive, "model: intrabath window"),
        "sample_fraction": (float, 0.005, _unit_interval_open, "artifact"),
        "n_strata": (int, 10, _positive, "artifact"),
        "oversample_exponent": (float, 2.0, lambda x: x >= 0, "artifact"),
        "anisotropy_mode": (str, "isotropic", None, "model"),
        "qubit_proximity_cells": (int, 3, _positive,
                                  "model: dipolar proximity to the qubit"),
        "max_pairs": (int, 500, _positive, "model: retained pair budget"),
    },
    "output": {
        "directory": (str, "out", None, "artifact"),
        "precision": (int, 12, lambda x: 2 <= x <= 17, "artifact"),
    },
}

_MODEL_NAMES = {m.value: m for m in Model}
_T2_NAMES = {m.value: m for m in T2Method}
_ANISO_NAMES = {"isotropic": AnisotropyMode.ISOTROPIC,
                "anisotropy_filtered": AnisotropyMode.FILTERED,
                "filtered": AnisotropyMode.FILTERED}


@dataclass
class AppConfig:
    donor: DonorConfig
    run: RunSpec
    seed: int
    out_dir: str
    precision: int
    values: dict = field(default_factory=dict)   # flat effective key/values


def _coerce(raw: str, typ, section: str, key: str):
    try:
        if typ is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} "
                          f"as {typ.__name__}") from exc


def parse_config(path: str) -> AppConfig:
    """Read, validate and default-fill a configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            typ, _default, validator, _prov = _SCHEMA[section][key]
            val = _coerce(raw, typ, section, key)
            if validator is not None and not validator(val):
                raise ConfigError(f"[{section}] {key} = {val!r} out of range")
            values[(section, key)] = val
    for section, keys in _SCHEMA.items():
        for key, (typ, default, _validator, prov) in keys.items():
            if (section, key) not in values:
                values[(section, key)] = default
                log.info("default applied: %s.%s = %r  [%s]",
                         section, key, default, prov)

    return _build_app_config(values)


def _build_app_config(values: dict) -> AppConfig:
    def v(section, key):
        return values[(section, key)]

    b_dir = tuple(float(tok) for tok in str(v("donor", "b_direction")).split())
    if len(b_dir) != 3 or all(c == 0 for c in b_dir):
        raise ConfigError("[donor] b_direction must be three numbers, "
                          "not all zero")
    try:
        donor = DonorConfig(
            a0=v("donor", "a0_angstrom"), p=v("donor", "p"),
            ionization_energy_ev=v("donor", "ionization_energy_ev"),
            kl_a=v("donor", "kl_a_angstrom"), kl_b=v("donor", "kl_b_angstrom"),
            eta=v("donor", "eta"),
            gamma_e=v("donor", "gamma_e_rad_per_s_per_t"),
            gamma_n=v("donor", "gamma_n_rad_per_s_per_t"),
            b0=v("donor", "b0_tesla"), b_direction=b_dir,
            r0=v("donor", "r0_angstrom"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    kind = v("model", "kind")
    if kind not in _MODEL_NAMES:
        raise ConfigError(f"[model] kind = {kind!r}; expected one of "
                          f"{sorted(_MODEL_NAMES)}")
    t2name = v("model", "t2_method")
    if t2name not in _T2_NAMES:
        raise ConfigError(f"[model] t2_method = {t2name!r}; expected one of "
                          f"{sorted(_T2_NAMES)}")
    aniso = v("model", "anisotropy_mode")
    if aniso not in _ANISO_NAMES:
        raise ConfigError(f"[model] anisotropy_mode = {aniso!r}; expected one "
                          f"of {sorted(_ANISO_NAMES)}")
    if not v("model", "r_min_angstrom") < v("model", "r_max_angstrom"):
        raise ConfigError("[model] r_min_angstrom must be below "
                          "r_max_angstrom")
    if not v("model", "c12_min_hz") < v("model", "c12_max_hz"):
        raise ConfigError("[model] c12_min_hz must be below c12_max_hz")
    if not v("model", "t_min_s") < v("model", "t_max_s"):
        raise ConfigError("[model] t_min_s must be below t_max_s")

    far = FarBathSpec(
        r_min=v("model", "r_min_angstrom"), r_max=v("model", "r_max_angstrom"),
        pair_sep_max=v("model", "pair_sep_max_angstrom"),
        c12_min=v("model", "c12_min_hz"), c12_max=v("model", "c12_max_hz"),
        sample_fraction=v("model", "sample_fraction"),
        n_strata=v("model", "n_strata"),
        oversample_exponent=v("model", "oversample_exponent"),
    )
    ep = EPBathSpec(
        anisotropy_mode=_ANISO_NAMES[aniso],
        qubit_proximity_cells=v("model", "qubit_proximity_cells"),
        max_pairs=v("model", "max_pairs"),
    )
    run = RunSpec(
        model=_MODEL_NAMES[kind],
        qubit_target_j_hz=v("model", "qubit_target_j_hz"),
        n_realizations=v("model", "n_realizations"),
        t_grid=default_time_grid(v("model", "t_min_s"), v("model", "t_max_s"),
                                 v("model", "t_points")),
        t2_method=_T2_NAMES[t2name],
        exclude_direct_partner_outliers=v(
            "model", "exclude_direct_partner_outliers"),
        far=far, ep=ep,
        extent_cells=v("lattice", "extent_cells"),
    )
    return AppConfig(donor=donor, run=run, seed=v("lattice", "seed"),
                     out_dir=v("output", "directory"),
                     precision=v("output", "precision"), values=values)


def effective_config_text(app: AppConfig) -> str:
    """Canonical INI text of every effective value (round-trips losslessly)."""
    lines = []
    for section in _SCHEMA:
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            val = app.values[(section, key)]
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def config_hash(app: AppConfig) -> str:
    return hashlib.sha256(effective_config_text(app).encode()).hexdigest()


# ---------------------------------------------------------------------------
# output emission
# ---------------------------------------------------------------------------

def _format_cell(value, precision: int) -> str:
    if isinstance(value, float):
        return f"%.{precision - 1}e" % value
    if value is None:
        return ""
    return str(value)


def emit_outputs(results, out_dir, precision: int = 12,
                 header_meta=()) -> dict:
    """Write result CSVs plus a manifest of (file, sha256).

    `results` is a list of dicts: {"name", "columns", "rows", "meta"}.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"version": __version__, "files": []}
    for item in results:
        name = item["name"]
        lines = [f"# {h}" for h in header_meta]
        lines += [f"# {k} = {item['meta'][k]}" for k in sorted(
            item.get("meta", {}))]
        lines.append(",".join(item["columns"]))
        for row in item["rows"]:
            lines.append(",".join(_format_cell(c, precision) for c in row))
        text = "\n".join(lines) + "\n"
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        manifest["files"].append({
            "file": name,
            "sha256": hashlib.sha256(text.encode()).hexdigest(),
        })
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _curve_result(name: str, curve) -> dict:
    meta = {k: v for k, v in curve.meta.items()}
    return {"name": name, "columns": ("t_total_s", "L"),
            "rows": list(zip(curve.times.tolist(), curve.values.tolist())),
            "meta": meta}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_decay(app: AppConfig, args) -> int:
    spec = app.run
    seeds = [app.seed + k for k in range(spec.n_realizations)]
    header = [f"config_sha256 = {config_hash(app)}",
              f"seeds = {seeds}", f"version = {__version__}"]
    result = ensemble_average(spec, seeds, app.donor, threads=args.threads)
    results = [_curve_result(f"decay_{spec.model.value}.csv", result.curve)]
    results.append({
        "name": "summary.csv",
        "columns": ("model", "J_hz", "seed_count", "T2n_s", "method"),
        "rows": [(spec.model.value, spec.qubit_target_j_hz,
                  len(seeds) - result.n_excluded, result.t2n_s,
                  result.method.value)],
        "meta": {"n_excluded": result.n_excluded},
    })
    emit_outputs(results, app.out_dir, app.precision, header)
    print(f"T2n = {result.t2n_s:.4g} s ({result.method.value}, "
          f"{len(seeds) - result.n_excluded} seeds, "
          f"{result.n_excluded} excluded) -> {app.out_dir}")
    return 0


def _cmd_sweep(app: AppConfig, args) -> int:
    axis = SweepAxis.BATH_RADIUS if args.axis == "radius" else SweepAxis.C12_WINDOW
    values = [float(tok) for tok in args.values.split(",")]
    out = convergence_sweep(app.run, axis, values, app.donor, seed=app.seed)
    header = [f"config_sha256 = {config_hash(app)}",
              f"version = {__version__}"]
    emit_outputs([{
        "name": f"sweep_{args.axis}.csv",
        "columns": ("axis", "value", "T2n_s"),
        "rows": [(r["axis"], r["value"], r["t2n_s"]) for r in out["rows"]],
        "meta": {"converged_at": out["converged_at"]},
    }], app.out_dir, app.precision, header)
    print(f"converged_at = {out['converged_at']}")
    return 0


def _cmd_census(app: AppConfig, args) -> int:
    from .epcensus import MULTIPLICITIES, shell_counts_closed_form, \
        expected_pairs_per_shell
    rows = []
    modes = {"isotropic": ISOTROPIC, "filtered": FILTERED}
    for mode_name in (args.modes.split(",") if args.modes else ["isotropic"]):
        mode = modes[mode_name.strip()]
        for row in ep_density_profile(args.n_max, app.donor.p, mode,
                                      app.donor.a0):
            census = shell_counts_closed_form(row.extent)
            for ns in MULTIPLICITIES:
                rows.append((mode, row.extent, row.radius, ns,
                             census.shells[ns],
                             expected_pairs_per_shell(ns, app.donor.p),
                             row.per_ns[ns]))
            rows.append((mode, row.extent, row.radius, 0, 0, 0.0, row.total))
    header = [f"config_sha256 = {config_hash(app)}",
              f"version = {__version__}"]
    emit_outputs([{
        "name": "census.csv",
        "columns": ("mode", "N", "R_angstrom", "ns", "shells", "zeta",
                    "density"),
        "rows": rows,
        "meta": {"note": "ns = 0 rows carry the per-N total density"},
    }], app.out_dir, app.precision, header)
    print(f"census -> {app.out_dir}/census.csv ({len(rows)} rows)")
    return 0


def _cmd_trend(app: AppConfig, args) -> int:
    j_values = [float(tok) * 1e6 for tok in args.j_mhz.split(",")]
    seeds = [app.seed + k for k in range(app.run.n_realizations)]
    out = j_trend_study(app.run, j_values, app.donor, seeds,
                        threads=args.threads)
    header = [f"config_sha256 = {config_hash(app)}",
              f"version = {__version__}"]
    emit_outputs([{
        "name": "j_trend.csv",
        "columns": ("model", "J_hz", "seed_count", "T2n_s", "method"),
        "rows": [(app.run.model.value, r["j_hz"], len(seeds) - r["n_excluded"],
                  r["t2n_s"], app.run.t2_method.value) for r in out["rows"]],
        "meta": {"slope_s_per_hz": out["slope_s_per_hz"]},
    }], app.out_dir, app.precision, header)
    print(f"slope = {out['slope_s_per_hz']:.4g} s/Hz")
    return 0


def _apply_overrides(app: AppConfig, args) -> AppConfig:
    run = app.run
    if getattr(args, "model", None):
        if args.model not in _MODEL_NAMES:
            raise ConfigError(f"--model {args.model!r}; expected one of "
                              f"{sorted(_MODEL_NAMES)}")
        run = replace(run, model=_MODEL_NAMES[args.model])
    seed = args.seed if getattr(args, "seed", None) is not None else app.seed
    out_dir = args.out if getattr(args, "out", None) else app.out_dir
    return AppConfig(donor=app.donor, run=run, seed=seed, out_dir=out_dir,
                     precision=app.precision, values=app.values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frozencore",
        description="Hahn-echo decoherence of proximate nuclear spins near "
                    "a donor in natural silicon")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--model", default=None,
                       choices=sorted(_MODEL_NAMES))
        p.add_argument("--threads", type=int, default=0,
                       help="0 = auto (serial)")

    p = sub.add_parser("decay", help="ensemble decay curve and T2")
    common(p)
    p = sub.add_parser("sweep", help="far-bath convergence sweep")
    common(p)
    p.add_argument("--axis", choices=("radius", "c12"), required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p = sub.add_parser("census", help="equivalent-site shell census tables")
    common(p)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--modes", default="isotropic,filtered")
    p = sub.add_parser("trend", help="T2 versus qubit hyperfine coupling")
    common(p)
    p.add_argument("--j-mhz", required=True,
                   help="comma-separated couplings in MHz")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        app = _apply_overrides(parse_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        handler = {"decay": _cmd_decay, "sweep": _cmd_sweep,
                   "census": _cmd_census, "trend": _cmd_trend}[args.command]
        return handler(app, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
