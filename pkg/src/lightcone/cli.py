"""``lightcone`` command-line entry point, run records and parameter sweeps.

Each run writes ``<outdir>/<hash>/`` holding a deterministic payload file
(``profile.csv``, ``curve.csv``, ``front.json`` or ``report.json``) and a
``record.json`` with the config, its hash, the version, wall time and the
payload.  Sweeps add ``<outdir>/index.json``.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    ChainAsymptotics,
    LatticeCouplings,
    build_kernel,
    evaluate_curve,
    jlr_matrix_with_diagonal,
    lr_velocity,
    make_params,
    verify_convolution,
    verify_reproducibility,
    zeta_exponent,
)
from .config import COMMANDS, ConfigError, RunConfig, config_hash, normalize, parse_config, parse_flag_value
from .dynamics import Evolver, commutator_profile, quasilocal_decompose
from .errors import InsufficientData, InvalidInput, LightconeError, UnsupportedRegime
from .front import beta_probe, extract_front, fit_exponent
from .lattice import build_lattice, coupling_split
from .model import assemble_matrix, build_model, site_operator

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2
RECORD_NAME = "record.json"
INDEX_NAME = "index.json"


class AssertionFailure(LightconeError):
    """A verifier assertion failed; the run is recorded but exits 1."""


# --------------------------------------------------------------------------
# serialization


def plain(obj):
    """Recursively convert numpy values to JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


@dataclass
class RunRecord:
    config: dict
    version: str
    hash: str
    wall_time: float
    payload: dict
    regime: dict
    status: str = "ok"
    files: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "hash": self.hash,
            "wall_time_s": self.wall_time,
            "payload": self.payload,
            "regime": self.regime,
            "status": self.status,
            "files": list(self.files),
        }


def load_record(path) -> RunRecord:
    """Read a record and check that its config still hashes to its stored hash."""
    d = json.loads(Path(path).read_text())
    rec = RunRecord(d["config"], d["version"], d["hash"], d["wall_time_s"], d["payload"],
                    d["regime"], d.get("status", "ok"), tuple(d.get("files", ())))
    if config_hash(rec.config) != rec.hash:
        raise InvalidInput(f"hash mismatch in {path}")
    return rec


# --------------------------------------------------------------------------
# grids


def time_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.get("times") is not None:
        return np.array(cfg["times"], dtype=float)
    lo, hi = cfg["t_min"], cfg["t_max"]
    if cfg.get("t_step") is not None:
        step = cfg["t_step"]
        n = int(math.floor((hi - lo) / step + 1e-9))
        return lo + step * np.arange(n + 1)
    if cfg["t_spacing"] == "log":
        return np.geomspace(lo, hi, cfg["t_count"])
    return np.linspace(lo, hi, cfg["t_count"])


def r_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.get("r_values") is not None:
        return np.array(sorted(set(cfg["r_values"])), dtype=float)
    if cfg["r_spacing"] == "log":
        return np.geomspace(cfg["r_min"], cfg["r_max"], cfg["r_count"])
    return np.linspace(cfg["r_min"], cfg["r_max"], cfg["r_count"])


def _lattice(cfg: RunConfig):
    try:
        return build_lattice(cfg["extents"], cfg["metric"])
    except InvalidInput as exc:
        raise ConfigError("extents", str(exc)) from None


# --------------------------------------------------------------------------
# commands; each returns (payload, {file name: text}, regime summary)


def run_simulate(cfg: RunConfig):
    lattice = _lattice(cfg)
    split = coupling_split(lattice, cfg["alpha"], cfg["j0"], cfg["chi"])
    model = build_model(split, cfg["part"], cfg["interaction"])
    probes = cfg["probes"] if cfg["probes"] is not None else range(lattice.n_sites)
    profile = commutator_profile(model, cfg["a_kind"], cfg["a_site"], cfg["b_kind"], probes,
                                 time_grid(cfg), cfg["method"], cfg["workers"], cfg["site_cap"])
    lines = ["j,r,t,value"] + [f"{j},{fmt(r)},{fmt(t)},{fmt(v)}" for j, r, t, v in profile.rows()]
    payload = {
        "source_site": profile.source_site,
        "probe_sites": profile.probe_sites,
        "distances": profile.distances,
        "times": profile.times,
        "values": profile.values,
        "model": profile.model_descriptor,
        "a_kind": profile.a_kind,
        "b_kind": profile.b_kind,
    }
    regime = {
        "dimension": lattice.dimension,
        "n_sites": lattice.n_sites,
        "alpha_above_2D": cfg["alpha"] > 2 * lattice.dimension,
        "max_value": float(profile.values.max()),
    }
    return payload, {"profile.csv": "\n".join(lines) + "\n"}, regime


def _coupling_source(cfg: RunConfig):
    if cfg["source"] == "chain":
        return ChainAsymptotics(cfg["alpha"], cfg["j0"])
    return LatticeCouplings(_lattice(cfg), cfg["alpha"], cfg["j0"])


def _curve(cfg: RunConfig, r, t):
    params = None
    if cfg["variant"] != "scaling_form":
        positive = t[t > 0]
        params = make_params(_coupling_source(cfg), cfg["chi"], float(positive[0]) if positive.size else 1.0)
    curve = evaluate_curve(cfg["variant"], r, t, params, cfg["alpha"], cfg["dimension"], cfg["v"],
                           cfg["chi_mode"])
    return curve, params


def _curve_regime(cfg: RunConfig, curve) -> dict:
    regime = {
        "dimension": cfg["dimension"],
        "alpha_above_2D": cfg["alpha"] > 2 * cfg["dimension"],
        "nontrivial_points": int(np.count_nonzero(curve.values < 2.0)),
        "points": int(curve.values.size),
    }
    if curve.far_enough is not None:
        regime["far_enough_fraction"] = float(curve.far_enough.mean())
        regime["long_time_fraction"] = float(curve.long_time.mean())
    return regime


def run_bound(cfg: RunConfig):
    curve, params = _curve(cfg, r_grid(cfg), time_grid(cfg))
    lines = ["r,t,value,unclipped"]
    for a, rv in enumerate(curve.r):
        for b, tv in enumerate(curve.t):
            lines.append(f"{fmt(rv)},{fmt(tv)},{fmt(curve.values[a, b])},{fmt(curve.unclipped[a, b])}")
    payload = {
        "variant": curve.variant,
        "r": curve.r,
        "t": curve.t,
        "values": curve.values,
        "unclipped": curve.unclipped,
        "chi": curve.chi,
        "v": params.v if params is not None else cfg["v"],
    }
    return payload, {"curve.csv": "\n".join(lines) + "\n"}, _curve_regime(cfg, curve)


def run_front(cfg: RunConfig):
    r = r_grid(cfg)
    curve, params = _curve(cfg, r, time_grid(cfg))
    eps = cfg["epsilon"]
    points = extract_front(curve, eps)
    window = (cfg["fit_r_min"] or float(r[0]), cfg["fit_r_max"] or float(r[-1]))
    fit = fit_exponent(points, window, eps)

    def single(rv, tv):
        return float(_curve(cfg, np.array([rv]), np.array([tv]))[0].unclipped[0, 0])

    fit.beta_probe = {str(b): beta_probe(single, b, cfg["beta_times"]).as_dict() for b in cfg["beta"]}
    payload = fit.as_dict()
    alpha, D = cfg["alpha"], cfg["dimension"]
    payload["zeta_target"] = zeta_exponent(alpha, D) if alpha > 2 * D else None
    payload["variant"] = cfg["variant"]
    regime = _curve_regime(cfg, curve) | {"front_points": len(points)}
    return payload, {"front.json": dump_json(payload)}, regime


def run_verify(cfg: RunConfig):
    lattice = _lattice(cfg)
    alpha, chi, R = cfg["alpha"], cfg["chi"], cfg["R"]
    source = LatticeCouplings(lattice, alpha, cfg["j0"])
    v = lr_velocity(source.lambdas(chi)[0])
    params = make_params(source, chi, R / (chi * v))
    K = build_kernel(lattice, "K", R, chi, alpha)
    F = build_kernel(lattice, "F", R, chi, alpha)
    J = jlr_matrix_with_diagonal(source.split(chi), params.kappa)
    conv = verify_convolution(K, J, F, params)
    repro = verify_reproducibility(F, R, lattice.dimension)
    assertions = [
        {"name": "convolution_near", "passed": conv.near_ok},
        {"name": "convolution_far", "passed": conv.far_ok},  # None: outside vt > alpha log alpha
    ]
    report = {
        "params": {"alpha": alpha, "chi": chi, "R": R, "t": params.t, "v": params.v,
                   "lambda_sr": params.lambda_sr, "lambda_chi": params.lambda_chi,
                   "g": params.g, "b": params.b, "v_chi": params.v_chi},
        "convolution": conv.as_dict(),
        "reproducibility": repro.as_dict(),
        "quasilocality": [],
    }
    n_ql = cfg["quasilocal_sites"]
    if n_ql is not None:
        chain = build_lattice([n_ql])
        split = coupling_split(chain, alpha, cfg["j0"], 1.0)
        h = assemble_matrix(build_model(split, "short", cfg["quasilocal_interaction"]))
        center = n_ql // 2
        a = site_operator(chain, center, "Z")
        evolver = Evolver(h, a, cfg["method"])
        v_sr = lr_velocity(split.lambda_sr)
        for t in cfg["quasilocal_times"]:
            q = quasilocal_decompose(chain, h, a, center, t, 1.0, v_sr, cfg["lmax"], cfg["method"],
                                     keep_operators=False, evolver=evolver)
            report["quasilocality"].append({
                "t": t, "R": q.R, "radii": q.radii, "tail_norms": q.tail_norms,
                "tail_bounds": q.tail_bounds, "delta_norms": q.delta_norms,
                "delta_bounds": q.delta_bounds, "truncated": q.truncated,
                "violations": q.violations(),
            })
            assertions.append({"name": f"quasilocal_t={t:g}", "passed": not q.violations()})
    report["assertions"] = assertions
    report["passed"] = all(a["passed"] is not False for a in assertions)
    regime = {"in_regime": conv.in_regime, "long_time": params.long_time,
              "dimension": lattice.dimension}
    return report, {"report.json": dump_json(report)}, regime


RUNNERS = {"simulate": run_simulate, "bound": run_bound, "front": run_front, "verify": run_verify}


def run_dir(cfg: RunConfig) -> Path:
    return Path(cfg["outdir"]) / cfg.hash


def run(cfg: RunConfig) -> RunRecord:
    """Execute a non-sweep config and write its files; returns the record."""
    if cfg.command == "sweep":
        raise InvalidInput("use sweep() for sweep configs")
    start = time.perf_counter()
    payload, files, regime = RUNNERS[cfg.command](cfg)
    wall = time.perf_counter() - start
    passed = payload.get("passed", True) if cfg.command == "verify" else True
    record = RunRecord(cfg.data, __version__, cfg.hash, wall, plain(payload), plain(regime),
                       "ok" if passed else "failed", tuple(sorted(files)))
    out = run_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        _write_atomic(out / name, text)
    _write_atomic(out / RECORD_NAME, dump_json(record.as_dict()))
    if not passed:
        failed = [a["name"] for a in payload["assertions"] if a["passed"] is False]
        raise AssertionFailure(f"verifier assertions failed: {', '.join(failed)}")
    return record


# --------------------------------------------------------------------------
# sweeps


def sweep_points(cfg: RunConfig) -> list[tuple[dict, RunConfig]]:
    """Grid points in deterministic order (sorted keys, listed values)."""
    grid = cfg["grid"]
    keys = sorted(grid)
    base = {k: v for k, v in cfg.data.items() if k not in ("command", "sweep_command", "grid")}
    points = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        data = normalize(base | params | {"command": cfg["sweep_command"]})
        # the pool supplies the parallelism; workers is not part of the hash
        data["workers"] = 1
        points.append((params, RunConfig(data)))
    return points


def existing_record(cfg: RunConfig) -> RunRecord | None:
    """A stored record for ``cfg`` that passes its hash check and has its files."""
    path = run_dir(cfg) / RECORD_NAME
    if not path.exists():
        return None
    try:
        rec = load_record(path)
    except (InvalidInput, KeyError, json.JSONDecodeError):
        return None
    if rec.hash != cfg.hash or not all((run_dir(cfg) / f).exists() for f in rec.files):
        return None
    return rec


def _run_point(data: dict) -> tuple[str, str | None]:
    try:
        run(RunConfig(data))
    except Exception as exc:  # recorded in the index; the sweep carries on
        return "failed", f"{type(exc).__name__}: {exc}"
    return "ok", None


def sweep(cfg: RunConfig) -> tuple[dict, int]:
    """Run every grid point not already on disk; returns (index, exit code)."""
    points = sweep_points(cfg)
    results: dict[str, tuple[str, str | None]] = {}
    todo = []
    for _, pc in points:
        rec = existing_record(pc)
        if rec is not None:
            results[pc.hash] = (rec.status, None)
        elif pc.hash not in results:
            results[pc.hash] = ("pending", None)
            todo.append(pc)
    workers = min(cfg["workers"], max(1, len(todo)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_point, [pc.data for pc in todo]))
    else:
        outcomes = [_run_point(pc.data) for pc in todo]
    for pc, outcome in zip(todo, outcomes):
        results[pc.hash] = outcome
    entries = []
    for params, pc in points:
        status, error = results[pc.hash]
        entries.append({"params": params, "hash": pc.hash, "status": status, "error": error})
    index = {
        "sweep_command": cfg["sweep_command"],
        "grid": cfg["grid"],
        "config_hash": cfg.hash,
        "version": __version__,
        "points": entries,
    }
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(outdir / INDEX_NAME, dump_json(index))
    failed = any(e["status"] != "ok" for e in entries)
    return index, EXIT_FAILURE if failed else EXIT_OK


# --------------------------------------------------------------------------
# entry point


def _parse_flags(tokens: list[str]) -> dict:
    flags = {}
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(tok, "expected --key value")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, text = key.split("=", 1)
            k += 1
        else:
            if k + 1 >= len(tokens):
                raise ConfigError(key, "flag needs a value")
            text = tokens[k + 1]
            k += 2
        flags[key] = parse_flag_value(text)
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightcone",
        description="Light-cone bounds, exact commutator dynamics and verifier reports.",
        epilog="Any config key can be given as --key value and overrides the config file.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with a flat key/value config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = parse_config(args.command, args.config, _parse_flags(rest))
        if cfg.command == "sweep":
            index, code = sweep(cfg)
            print(Path(cfg["outdir"]) / INDEX_NAME)
            for e in index["points"]:
                if e["status"] != "ok":
                    print(f"failed point {e['params']}: {e['error']}", file=sys.stderr)
            return code
        record = run(cfg)
        print(run_dir(cfg))
        if cfg.command == "front":
            print(f"zeta_hat = {record.payload['zeta_hat']:.6g}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidInput, UnsupportedRegime) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AssertionFailure, InsufficientData, LightconeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # unexpected runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
