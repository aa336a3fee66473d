"""Command-line driver.

Subcommands: ``train``, ``measure``, ``oracle``, ``check-gradients``,
``j-fit``.  Run options come from an INI config file, overridden by
environment variables (``TBVMC_<SECTION>_<KEY>``), overridden in turn by
command-line flags.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import pathlib
import sys

import numpy as np

from .ansatz import AnsatzConfig, BackflowNet
from .errors import ConfigError, NumericalError, TbvmcError
from .gradcheck import check_gradients
from .local_energy import SemistochasticConfig
from .optimizers import MarchHyper
from .sampler import SamplerConfig
from .spin import HARTREE_TO_INVCM, OrbitalSet, SpinStatePoint, yamaguchi_j
from .training import (
    OptimizerSettings,
    RunSettings,
    run_measure,
    run_oracle,
    run_train,
    write_trace_csv,
)

ENV_PREFIX = "TBVMC"

_SCHEMA = {
    "paths": {"fcidump", "checkpoint_in", "checkpoint_out", "output_dir"},
    "sector": {"n_electrons", "two_sz"},
    "ansatz": {"t", "d_f", "l_e", "n_h", "d_atten", "l_m", "d_mlp", "n_det"},
    "sampler": {"n_chains", "burn_in", "thin", "batch_size"},
    "local_energy": {"mode", "epsilon_det", "n_candidate_samples", "threads"},
    "optimizer": {
        "adam_steps",
        "adam_lr",
        "plateau_window",
        "plateau_tol",
        "eta",
        "beta1",
        "beta2",
        "lambda",
        "epsilon_clip",
        "norm_constraint",
        "partition",
    },
    "run": {
        "seed",
        "max_steps",
        "summary_window",
        "measure_samples",
        "oracle_state",
    },
    "measure": {"orbital_sets"},
}


def _read_config_file(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        out[section.lower()] = {
            k.lower(): v for k, v in parser.items(section)
        }
    return out


def _apply_env(values: dict, environ=None):
    environ = os.environ if environ is None else environ
    for section, keys in _SCHEMA.items():
        for key in keys:
            name = f"{ENV_PREFIX}_{section.upper()}_{key.upper()}"
            if name in environ:
                values.setdefault(section, {})[key] = environ[name]
    return values


def _apply_overrides(values: dict, overrides):
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, val = item.split("=", 1)
        section, key = dotted.split(".", 1)
        values.setdefault(section.lower(), {})[key.lower()] = val
    return values


def _validate_keys(values: dict):
    for section, items in values.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in items:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")


def _get(values, section, key, default=None):
    return values.get(section, {}).get(key, default)


def _coerce(raw, kind, label):
    if raw is None:
        return None
    try:
        if kind is bool:
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {raw!r} for {label}") from None


def _parse_orbital_sets(raw: str | None):
    if not raw:
        return []
    sets = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigError(f"orbital set {chunk!r} must look like name=0,1,2")
        name, idx = chunk.split("=", 1)
        try:
            orbitals = tuple(int(i) for i in idx.split(",") if i.strip() != "")
        except ValueError:
            raise ConfigError(f"bad orbital list in set {chunk!r}") from None
        sets.append(OrbitalSet(name.strip(), orbitals))
    return sets


def build_settings(values: dict) -> RunSettings:
    _validate_keys(values)
    fcidump = _get(values, "paths", "fcidump")
    if not fcidump:
        raise ConfigError("paths.fcidump is required")
    seed = _coerce(_get(values, "run", "seed"), int, "run.seed")
    if seed is None:
        raise ConfigError("run.seed is mandatory (no wall-clock default)")
    n_electrons = _coerce(_get(values, "sector", "n_electrons"), int, "sector.n_electrons")
    if n_electrons is None:
        raise ConfigError("sector.n_electrons is required")

    ansatz_kwargs = {}
    for key in _SCHEMA["ansatz"]:
        raw = _get(values, "ansatz", key)
        if raw is not None:
            ansatz_kwargs[key] = _coerce(raw, int, f"ansatz.{key}")
    try:
        ansatz = AnsatzConfig(**ansatz_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    sampler = SamplerConfig(
        n_chains=_coerce(_get(values, "sampler", "n_chains", 64), int, "sampler.n_chains"),
        burn_in=_coerce(_get(values, "sampler", "burn_in"), int, "sampler.burn_in"),
        thin=_coerce(_get(values, "sampler", "thin"), int, "sampler.thin"),
    )
    try:
        le = SemistochasticConfig(
            epsilon_det=_coerce(
                _get(values, "local_energy", "epsilon_det", 1e-8),
                float,
                "local_energy.epsilon_det",
            ),
            n_candidate_samples=_coerce(
                _get(values, "local_energy", "n_candidate_samples", 0),
                int,
                "local_energy.n_candidate_samples",
            ),
            mode=_get(values, "local_energy", "mode", "exact"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    march = MarchHyper(
        eta=_coerce(_get(values, "optimizer", "eta", 0.1), float, "optimizer.eta"),
        beta1=_coerce(_get(values, "optimizer", "beta1", 0.95), float, "optimizer.beta1"),
        beta2=_coerce(_get(values, "optimizer", "beta2", 0.995), float, "optimizer.beta2"),
        lam=_coerce(_get(values, "optimizer", "lambda", 0.001), float, "optimizer.lambda"),
        epsilon_clip=_coerce(
            _get(values, "optimizer", "epsilon_clip", 1e8), float, "optimizer.epsilon_clip"
        ),
        norm_constraint=_coerce(
            _get(values, "optimizer", "norm_constraint", 0.1),
            float,
            "optimizer.norm_constraint",
        ),
    )
    optimizer = OptimizerSettings(
        adam_steps=_coerce(_get(values, "optimizer", "adam_steps", -1), int, "optimizer.adam_steps"),
        adam_lr=_coerce(_get(values, "optimizer", "adam_lr", 1e-3), float, "optimizer.adam_lr"),
        plateau_window=_coerce(
            _get(values, "optimizer", "plateau_window", 200), int, "optimizer.plateau_window"
        ),
        plateau_tol=_coerce(
            _get(values, "optimizer", "plateau_tol", 1e-4), float, "optimizer.plateau_tol"
        ),
        march=march,
        partition=_coerce(_get(values, "optimizer", "partition", 1), int, "optimizer.partition"),
    )

    settings = RunSettings(
        fcidump=fcidump,
        n_electrons=n_electrons,
        two_sz=_coerce(_get(values, "sector", "two_sz", 0), int, "sector.two_sz"),
        seed=seed,
        output_dir=_get(values, "paths", "output_dir", "run"),
        checkpoint_in=_get(values, "paths", "checkpoint_in"),
        checkpoint_out=_get(values, "paths", "checkpoint_out"),
        ansatz=ansatz,
        batch_size=_coerce(_get(values, "sampler", "batch_size", 256), int, "sampler.batch_size"),
        sampler=sampler,
        local_energy=le,
        le_threads=_coerce(_get(values, "local_energy", "threads", 1), int, "local_energy.threads"),
        optimizer=optimizer,
        max_steps=_coerce(_get(values, "run", "max_steps", 500), int, "run.max_steps"),
        summary_window=_coerce(
            _get(values, "run", "summary_window", 200), int, "run.summary_window"
        ),
        orbital_sets=_parse_orbital_sets(_get(values, "measure", "orbital_sets")),
        oracle_state=_coerce(
            _get(values, "run", "oracle_state", False), bool, "run.oracle_state"
        ),
        measure_samples=_coerce(
            _get(values, "run", "measure_samples", 4096), int, "run.measure_samples"
        ),
    )
    if not os.path.exists(settings.fcidump):
        raise ConfigError(f"FCIDUMP file {settings.fcidump} does not exist")
    if settings.checkpoint_in and not os.path.exists(settings.checkpoint_in):
        raise ConfigError(f"checkpoint {settings.checkpoint_in} does not exist")
    return settings


def _collect_values(args) -> dict:
    values: dict = {}
    if args.config:
        values = _read_config_file(args.config)
    _apply_env(values)
    _apply_overrides(values, getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        values.setdefault("run", {})["seed"] = str(args.seed)
    if getattr(args, "threads", None) is not None:
        values.setdefault("local_energy", {})["threads"] = str(args.threads)
    if getattr(args, "partition", None) is not None:
        values.setdefault("optimizer", {})["partition"] = str(args.partition)
    if getattr(args, "output", None) is not None:
        values.setdefault("paths", {})["output_dir"] = args.output
    if getattr(args, "fcidump", None) is not None:
        values.setdefault("paths", {})["fcidump"] = args.fcidump
    return values


def _cmd_train(args) -> int:
    settings = build_settings(_collect_values(args))
    out = pathlib.Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not settings.checkpoint_out:
        settings.checkpoint_out = str(out / "checkpoint.bin")
    result = run_train(settings)
    write_trace_csv(out / "trace.csv", result.trace)
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(
        f"trained {result.summary['steps']} steps: "
        f"E = {result.summary['energy']:.8f} +/- {result.summary['energy_stderr']:.2e} Ha"
    )
    print(f"trace: {out / 'trace.csv'}  checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_measure(args) -> int:
    settings = build_settings(_collect_values(args))
    if args.oracle_state:
        settings.oracle_state = True
    out = pathlib.Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_measure(settings)
    path = out / "observables.json"
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for rec in records:
        print(
            f"{rec['observable']}: {rec['value']:+.8f} +/- {rec['stderr']:.2e}"
        )
    print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    settings = build_settings(_collect_values(args))
    out = pathlib.Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oracle.json"
    record = run_oracle(settings, path, top_k=args.top_k)
    print(f"sector dimension {record['dimension']}, E0 = {record['e0']:.10f} Ha")
    print(f"wrote {path}")
    return 0


def _cmd_check_gradients(args) -> int:
    cfg = AnsatzConfig(
        t=2, d_f=8, l_e=2, n_h=2, d_atten=8, l_m=2, d_mlp=8, n_det=2
    )
    from .determinants import SpinSector, enumerate_sector

    sector = SpinSector(args.n_electrons, 0)
    configs = list(enumerate_sector(sector, args.n_orbitals))
    worst_overall = 0.0
    for seed in range(args.seeds):
        net = BackflowNet(2 * args.n_orbitals, args.n_electrons, cfg, seed=seed)
        worst = check_gradients(net, configs, h=args.step)
        worst_overall = max(worst_overall, worst)
        print(f"seed {seed}: max relative error {worst:.3e}")
    ok = worst_overall < args.tolerance
    print(f"worst overall {worst_overall:.3e} ({'PASS' if ok else 'FAIL'})")
    if not ok:
        raise NumericalError(
            f"gradient check failed: {worst_overall:.3e} >= {args.tolerance}"
        )
    return 0


def _cmd_j_fit(args) -> int:
    try:
        with open(args.points) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read points file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"points file is not valid JSON: {exc}") from None
    try:
        points = [SpinStatePoint(energy=float(p["energy"]), s2=float(p["s2"])) for p in data]
    except (TypeError, KeyError) as exc:
        raise ConfigError(
            "points file must be a list of {'energy': Ha, 's2': value}"
        ) from None
    j, r2 = yamaguchi_j(points)
    result = {
        "j_hartree": j,
        "j_per_cm": j * HARTREE_TO_INVCM,
        "r_squared": r2,
        "n_points": len(points),
    }
    print(json.dumps(result, indent=1, sort_keys=True))
    if args.output:
        out = pathlib.Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "j_fit.json", "w") as fh:
            json.dump(result, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--seed", type=int, help="master random seed")
    sub.add_argument("--threads", type=int, help="local-energy worker threads")
    sub.add_argument("--partition", type=int, help="optimizer worker count P")
    sub.add_argument("--output", help="output directory")
    sub.add_argument("--fcidump", help="FCIDUMP path (overrides config)")
    sub.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override a single config value",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbvmc",
        description="Transformer-backflow variational Monte Carlo engine",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="optimize a wavefunction")
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("measure", help="energy and spin observables")
    _add_common(p)
    p.add_argument(
        "--oracle-state",
        action="store_true",
        help="measure the exact ground state instead of a checkpoint",
    )
    p.set_defaults(func=_cmd_measure)

    p = subs.add_parser("oracle", help="exact diagonalization fixture")
    _add_common(p)
    p.add_argument("--top-k", type=int, default=8, help="coefficients to keep")
    p.set_defaults(func=_cmd_oracle)

    p = subs.add_parser("check-gradients", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--n-orbitals", type=int, default=2)
    p.add_argument("--n-electrons", type=int, default=2)
    p.add_argument("--step", type=float, default=1e-5, help="finite-difference step")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=_cmd_check_gradients)

    p = subs.add_parser("j-fit", help="exchange constant from spin-state points")
    p.add_argument("points", help="JSON list of {'energy', 's2'} records")
    p.add_argument("--output", help="directory for j_fit.json")
    p.set_defaults(func=_cmd_j_fit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, TbvmcError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
