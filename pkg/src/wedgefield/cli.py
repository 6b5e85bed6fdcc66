"""Command line driver for the deformed free-field experiments.

Every command prints one JSON document holding the resolved configuration
and the results; ``limit`` prints JSON Lines (a header, one line per scale,
a summary). Exit code 2 flags a bad configuration, 3 a numerical failure or
a failed check; both still print a diagnostic document.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from wedgefield import __version__, checks
from wedgefield import testfn as tf
from wedgefield.errors import ConfigError, WedgefieldError
from wedgefield.freefield import MassShellMeasure, vacuum_functional
from wedgefield.geometry import (
    NoncommMatrix,
    OrbitParams,
    orbit_params_of,
    reference_theta,
    theta_from_json,
    theta_to_json,
)
from wedgefield.locality import (
    LocalityConfig,
    default_spectators,
    replica_config,
    undeformed_locality_experiment,
    wedge_locality_experiment,
)
from wedgefield.moyal import tensor, u_theta_multiplier
from wedgefield.scattering import (
    SHELL_TOL,
    SMatrixInput,
    deformed_s_matrix_element,
    ordered_configuration,
    parse_amplitude,
    phase_shift,
    wedge_ordering_check,
)

PATH_KEYS = ("config", "output", "csv_path")


# ------------------------------------------------------------ plumbing


def _jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def _dump(doc, pretty: bool = True) -> str:
    if pretty:
        return json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False)
    return json.dumps(_jsonable(doc), sort_keys=True, separators=(",", ":"), allow_nan=False)


def _write(text: str, path: str | None) -> None:
    if path is None:
        click.echo(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _threads() -> int:
    raw = os.environ.get("WEDGEFIELD_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"WEDGEFIELD_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"WEDGEFIELD_THREADS must be a positive integer, got {raw!r}")
    return n


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _resolve(ctx: click.Context, kw: dict) -> dict:
    """Flags given on the command line win over the config file, which wins over defaults."""
    file_cfg = _load_config(kw.get("config"))
    known = {p.name for p in ctx.command.params}
    unknown = sorted(set(file_cfg) - known - {"theta", "packets", "f1", "f2"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for name, value in kw.items():
        if name in PATH_KEYS:
            continue
        source = ctx.get_parameter_source(name)
        if name in file_cfg and source in (click.core.ParameterSource.DEFAULT, None):
            param = next(p for p in ctx.command.params if p.name == name)
            try:
                value = param.type_cast_value(ctx, file_cfg[name])
            except click.BadParameter as exc:
                raise ConfigError(f"config key {name!r}: {exc.message}") from exc
        out[name] = value
    for extra in ("theta", "packets", "f1", "f2"):
        if extra in file_cfg and extra not in known:
            out[extra] = file_cfg[extra]
    return out


def _diagnostic(command: str, cfg: dict | None, kind: str, exc: BaseException) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": cfg,
        "error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)},
    }


def _drive(ctx: click.Context, command: str, kw: dict, parse, run, emit=None) -> None:
    """Resolve the config, parse it (errors exit 2), run it (errors exit 3) and print."""
    output = kw.get("output")
    cfg = None
    try:
        cfg = _resolve(ctx, kw)
        objs = parse(cfg)
    except (ValueError, TypeError, KeyError) as exc:
        _write(_dump(_diagnostic(command, cfg, "config", exc)), output)
        ctx.exit(2)
    except (WedgefieldError, ArithmeticError, RuntimeError) as exc:
        # building the measure certifies its rule, which can fail numerically
        _write(_dump(_diagnostic(command, cfg, "numeric", exc)), output)
        ctx.exit(3)
    try:
        result = run(objs)
    except (WedgefieldError, ArithmeticError, RuntimeError, ValueError) as exc:
        _write(_dump(_diagnostic(command, cfg, "numeric", exc)), output)
        ctx.exit(3)
    if emit is not None:
        ok = emit(cfg, result)
    else:
        doc = {"command": command, "version": __version__, "config": cfg, "results": result}
        _write(_dump(doc), output)
        ok = result.get("pass", True) is not False
    if not ok:
        ctx.exit(3)


def _floats(text, count: tuple[int, ...] | None = None, name: str = "value") -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"{name}: expected comma separated numbers, got {text!r}") from exc
    if count is not None and len(vals) not in count:
        raise ConfigError(f"{name}: expected {' or '.join(map(str, count))} numbers, got {len(vals)}")
    return vals


def _parse_theta(spec, fallback: OrbitParams) -> tuple[NoncommMatrix, OrbitParams]:
    """``ke,km``, six upper entries, a JSON object, or nothing (the fallback orbit)."""
    if spec is None:
        return reference_theta(fallback), fallback
    if isinstance(spec, str) and spec.strip().startswith("{"):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"theta: {exc}") from exc
    if isinstance(spec, dict):
        try:
            theta, params = theta_from_json(spec)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"theta: {exc}") from exc
        return theta, params if params is not None else orbit_params_of(theta)
    vals = _floats(spec, (2, 6), "theta")
    if len(vals) == 2:
        params = OrbitParams(*vals)
        return reference_theta(params), params
    theta = NoncommMatrix(np.array(vals))
    return theta, orbit_params_of(theta)


def _parse_packets(spec, name: str = "packets") -> list:
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: {exc}") from exc
    if not isinstance(spec, list) or not spec:
        raise ConfigError(f"{name}: expected a non-empty JSON list of packets")
    try:
        return tf.functions_from_json(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _shell_momentum(text, mass: float, name: str) -> np.ndarray:
    vals = _floats(text, (3, 4), name)
    if len(vals) == 3:
        k = np.array(vals)
        return np.concatenate([[math.sqrt(mass * mass + k @ k)], k])
    v = np.array(vals)
    if v[0] <= 0 or abs(v[0] ** 2 - v[1:] @ v[1:] - mass * mass) > SHELL_TOL * max(1.0, v[0] ** 2):
        raise ConfigError(f"{name} is not on the positive mass shell m = {mass}")
    return v


def _measure(cfg: dict) -> MassShellMeasure:
    return MassShellMeasure(
        float(cfg["mass"]), cutoff=float(cfg["cutoff"]), nodes=int(cfg["nodes"]), min_nodes=int(cfg["min_nodes"])
    )


def common_options(fn):
    @click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random generator.")
    @click.option("--config", type=click.Path(dir_okay=False), default=None, help="JSON file of option values.")
    @click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Write to a file, not stdout.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)

    return wrapper


def measure_options(mass=1.0, cutoff=6.0, nodes=48, min_nodes=32):
    def deco(fn):
        fn = click.option("--min-nodes", type=int, default=min_nodes, show_default=True,
                          help="Nodes on axes clipped to a momentum box.")(fn)
        fn = click.option("--nodes", type=int, default=nodes, show_default=True,
                          help="Gauss-Legendre nodes per axis reaching the cutoff.")(fn)
        fn = click.option("--cutoff", type=float, default=cutoff, show_default=True,
                          help="Momentum cutoff per axis.")(fn)
        fn = click.option("--mass", type=float, default=mass, show_default=True, help="Field mass.")(fn)
        return fn

    return deco


# ------------------------------------------------------------ commands


@click.group()
@click.version_option(__version__, prog_name="wedgefield")
def main():
    """Experiments with Moyal-twisted tensor products of free-field test functions."""


@main.command()
@common_options
@click.option("--kappa-e", type=float, default=1.0, show_default=True)
@click.option("--kappa-m", type=float, default=0.0, show_default=True)
@click.option("--check", is_flag=True, help="Also sample the section and the wedge properties.")
@click.option("--samples", type=int, default=50, show_default=True)
@click.pass_context
def orbit(ctx, **kw):
    """Orbit invariants, section residuals and wedge checks."""

    def parse(cfg):
        if cfg["samples"] < 1:
            raise ConfigError("samples must be positive")
        return OrbitParams(cfg["kappa_e"], cfg["kappa_m"]), cfg

    def run(objs):
        params, cfg = objs
        out = checks.orbit_report(params, samples=cfg["samples"], seed=cfg["seed"], check=cfg["check"])
        ok = out["invariantResidual"] < 1e-10
        if cfg["check"]:
            ok &= out["conjugatedInvariantResidual"] < 1e-10
            ok &= out["sectionResidual"] is None or out["sectionResidual"] < 1e-8
            ok &= bool(out["w1DistinctNotNested"]) and bool(out["w2CausalComplement"])
            ok &= out.get("w3OppositeTheta", True) and out["w4MinSlack"] >= -1e-12
        out["pass"] = bool(ok)
        return out

    _drive(ctx, "orbit", kw, parse, run)


@main.command()
@common_options
@click.option("--samples", type=int, default=1000, show_default=True, help="Random momentum tuples.")
@click.option("--pairs", type=int, default=20, show_default=True, help="Random test-function draws.")
@click.pass_context
def identities(ctx, **kw):
    """Residuals of the structural kernel identities and the continuity bound."""

    def parse(cfg):
        if cfg["samples"] < 1 or cfg["pairs"] < 1:
            raise ConfigError("samples and pairs must be positive")
        return cfg

    def run(cfg):
        suite = checks.identity_suite(samples=cfg["samples"], pairs=cfg["pairs"], seed=cfg["seed"])
        cont = checks.continuity_check(samples=cfg["samples"], seed=cfg["seed"])
        suite["continuity"] = cont
        suite["pass"] = bool(suite["pass"] and cont["pass"])
        return suite

    _drive(ctx, "identities", kw, parse, run)


@main.command()
@common_options
@click.option("--packets", default=None, help="JSON list of factors; default is the reference four-point tensor.")
@click.option("--theta", default=None, help="ke,km or six upper entries or a JSON theta object.")
@measure_options(cutoff=8.0, nodes=32, min_nodes=48)
@click.pass_context
def npoint(ctx, **kw):
    """Deformed vacuum expectation of a product of field factors."""

    def parse(cfg):
        spec = cfg.get("packets")
        factors = checks.reference_limit_factors() if spec is None else _parse_packets(spec)
        theta, params = _parse_theta(cfg.get("theta"), OrbitParams(0.5, 0.3))
        cfg["packets"] = [f.to_json() for f in factors]
        cfg["theta"] = theta_to_json(theta, params)
        return factors, theta, _measure(cfg)

    def run(objs):
        factors, theta, mu = objs
        F = tensor(*factors)
        val, err = vacuum_functional(u_theta_multiplier(F, theta), mu)
        base, base_err = vacuum_functional(F, mu)
        return {
            "degree": len(factors),
            "value": val,
            "estimate": err,
            "undeformed": base,
            "undeformedEstimate": base_err,
            "measure": mu.to_json(),
        }

    _drive(ctx, "npoint", kw, parse, run)


@main.command()
@common_options
@click.option("--kappa-e", type=float, default=0.5, show_default=True)
@click.option("--kappa-m", type=float, default=0.3, show_default=True)
@click.option("--replicas", type=int, default=0, show_default=True, help="Lorentz-transformed copies to run.")
@click.option("--undeformed/--no-undeformed", default=True, show_default=True, help="Also run theta = 0.")
@measure_options(cutoff=10.0, nodes=80, min_nodes=48)
@click.pass_context
def locality(ctx, **kw):
    """Commutator of wedge-localized deformed fields against a same-theta control."""

    def parse(cfg):
        if cfg["replicas"] < 0:
            raise ConfigError("replicas must be non-negative")
        if cfg["kappa_e"] == 0:
            raise ConfigError("kappa-e must be nonzero for the wedge to be defined")
        params = OrbitParams(cfg["kappa_e"], cfg["kappa_m"])
        f1 = _parse_packets(cfg["f1"], "f1")[0] if "f1" in cfg else tf.bump((0.0, 2.0, 0.0, 0.0), 0.5)
        f2 = _parse_packets(cfg["f2"], "f2")[0] if "f2" in cfg else tf.bump((0.0, -2.0, 0.0, 0.0), 0.5)
        threads = _threads()
        base = LocalityConfig(
            theta=reference_theta(params),
            params=params,
            f1=f1,
            f2=f2,
            spectators=default_spectators(),
            measure=_measure(cfg),
        )
        return base, threads, cfg

    def run(objs):
        base, threads, cfg = objs
        rng = np.random.default_rng(cfg["seed"])
        configs = [base] + [replica_config(base, rng) for _ in range(cfg["replicas"])]
        with ThreadPoolExecutor(max_workers=min(threads, len(configs))) as pool:
            reports = list(pool.map(wedge_locality_experiment, configs))
        out = {"canonical": reports[0].to_json(), "replicas": [r.to_json() for r in reports[1:]]}
        verdicts = [r.verdict for r in reports]
        if cfg["undeformed"]:
            und = undeformed_locality_experiment(base)
            out["undeformed"] = und.to_json()
            verdicts.append(und.verdict)
        out["verdicts"] = verdicts
        out["pass"] = all(v == "pass" for v in verdicts)
        return out

    _drive(ctx, "locality", kw, parse, run)


@main.command()
@common_options
@click.option("--p", "p", default=None, help="Incoming momentum: three spatial or four components.")
@click.option("--q", "q", default=None, help="Second incoming momentum.")
@click.option("--pp", default=None, help="First outgoing momentum.")
@click.option("--qp", default=None, help="Second outgoing momentum.")
@click.option("--theta", default=None, help="ke,km or six upper entries or a JSON theta object.")
@click.option("--s0", default="unit", show_default=True, help="Undeformed amplitude: unit or phase:c,s0.")
@click.option("--mass", type=float, default=1.0, show_default=True)
@click.option("--order-check/--no-order-check", default=True, show_default=True,
              help="Require q - p and q' - p' in the wedge of theta.")
@click.pass_context
def smatrix(ctx, **kw):
    """Deformed two-particle S-matrix element."""

    def parse(cfg):
        mass = float(cfg["mass"])
        if not mass > 0:
            raise ConfigError("mass must be positive")
        p0, q0 = ordered_configuration(mass, 0.5)
        moms = []
        for key, dflt in (("p", p0), ("q", q0), ("pp", p0), ("qp", q0)):
            moms.append(dflt if cfg[key] is None else _shell_momentum(cfg[key], mass, key))
        theta, params = _parse_theta(cfg.get("theta"), OrbitParams(0.5, 0.3))
        amp = parse_amplitude(cfg["s0"])
        for key, v in zip(("p", "q", "pp", "qp"), moms):
            cfg[key] = [float(c) for c in v]
        cfg["theta"] = theta_to_json(theta, params)
        return SMatrixInput(*moms, theta=theta, mass=mass, undeformed=amp), params, cfg["order_check"]

    def run(objs):
        inp, params, order_check = objs
        p, q, pp, qp = inp.momenta()
        if inp.theta.is_zero():
            ordering = True
        else:
            ordering = wedge_ordering_check(p, q, inp.theta, params) and wedge_ordering_check(pp, qp, inp.theta, params)
        val = deformed_s_matrix_element(inp, check_order=order_check)
        return {"value": val, "modulus": abs(val), "phaseShift": phase_shift(inp), "ordering": bool(ordering)}

    _drive(ctx, "smatrix", kw, parse, run)


@main.command()
@common_options
@click.option("--scales", default="1,0.5,0.25,0.125", show_default=True, help="Comma separated theta scales.")
@click.option("--kappa-e", type=float, default=0.5, show_default=True)
@click.option("--kappa-m", type=float, default=0.3, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write the rows as CSV.")
@measure_options(cutoff=8.0, nodes=32, min_nodes=48)
@click.pass_context
def limit(ctx, **kw):
    """Four-point deltas as theta is scaled to zero (JSON Lines)."""

    def parse(cfg):
        scales = _floats(cfg["scales"], None, "scales")
        if not scales or any(not s > 0 for s in scales):
            raise ConfigError("scales must be positive numbers")
        cfg["scales"] = scales
        return scales, OrbitParams(cfg["kappa_e"], cfg["kappa_m"]), _measure(cfg)

    def run(objs):
        scales, params, mu = objs
        return checks.limit_sweep(scales=scales, params=params, measure=mu)

    def emit(cfg, result):
        lines = [_dump({"command": "limit", "version": __version__, "config": cfg}, pretty=False)]
        lines += [_dump(row, pretty=False) for row in result["rows"]]
        summary = {k: v for k, v in result.items() if k != "rows"}
        lines.append(_dump({"summary": summary}, pretty=False))
        _write("\n".join(lines), kw["output"])
        if kw["csv_path"]:
            with open(kw["csv_path"], "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["scale", "value_re", "value_im", "delta", "estimate", "ratio"])
                for r in result["rows"]:
                    ratio = "" if r["ratio"] is None else repr(r["ratio"])
                    writer.writerow(
                        [repr(r["scale"]), repr(r["value"][0]), repr(r["value"][1]),
                         repr(r["delta"]), repr(r["estimate"]), ratio]
                    )
        return result["pass"]

    _drive(ctx, "limit", kw, parse, run, emit)


@main.command()
@common_options
@click.option("--configs", type=int, default=5, show_default=True, help="Random degree-4 configurations.")
@click.option("--lattice-nodes", type=int, default=5, show_default=True, help="Lattice points per momentum axis.")
@click.option("--cutoff", type=float, default=3.0, show_default=True)
@click.option("--mass", type=float, default=1.0, show_default=True)
@click.option("--tol", type=float, default=1e-3, show_default=True, help="Allowed relative difference.")
@click.pass_context
def oracle(ctx, **kw):
    """Vacuum functional against the truncated Fock-space oracle on a shared lattice."""

    def parse(cfg):
        if cfg["configs"] < 1 or cfg["lattice_nodes"] < 1:
            raise ConfigError("configs and lattice-nodes must be positive")
        if not (cfg["mass"] > 0 and cfg["cutoff"] > 0):
            raise ConfigError("mass and cutoff must be positive")
        return cfg

    def run(cfg):
        return checks.oracle_comparison(
            configs=cfg["configs"],
            seed=cfg["seed"],
            lattice_nodes=cfg["lattice_nodes"],
            cutoff=cfg["cutoff"],
            mass=cfg["mass"],
            tol=cfg["tol"],
        )

    _drive(ctx, "oracle", kw, parse, run)


if __name__ == "__main__":
    main()
