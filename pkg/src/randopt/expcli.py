"""Experiment runner: declarative configs, seeded pipelines, replayable runs.

A run is described by a YAML mapping (or equivalently by --set key=value
flags), validated against a per-experiment schema that rejects unknown
keys by name. Execution writes every output to a staging directory and
promotes it atomically, so a failed run leaves nothing behind.

Each run directory contains:

* the experiment outputs (CSV / JSON / instance files),
* manifest.json - tool version, normalized config echo, per-task stream
  labels, instance content hashes, and a SHA-256 digest of every output
  file. Identical config + seed reproduces every byte of the above.
* timing.json - wall clock only. Timing is observational, so this file
  is written after the manifest, is not listed in it, and is exempt from
  the determinism contract.

The config echo deliberately omits `out`, `jobs`, and `overwrite`: those
control where and how a run executes, never what it computes. Reductions
over parallel tasks are collected in task order, so `jobs` cannot change
results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import yaml

from . import __version__, graphopt
from .errors import (
    InsufficientDataError,
    IntegrityError,
    ParameterError,
    SchemaError,
)
from .instances import gen_er_graph, gen_ksat, gen_tensor, make_interpolation_path
from .ksat import (
    BudgetExceededError,
    dpll_sat_sweep,
    dpll_solve,
    empirical_crossing,
    enumerate_solutions,
    first_moment_crossing,
    sat_moment_curve,
    sweep_to_csv,
    to_dimacs,
    walksat,
)
from .ogp import (
    SamplerConfig,
    algorithm_stability_profile,
    cluster_solutions,
    detect_gap,
    interpolation_overlap_experiment,
    overlap_histogram,
    planted_gap_histogram,
    sample_near_optima,
)
from .parisi import (
    MixtureSpec,
    OrderParam,
    PdeGrid,
    convergence_table,
    minimize_functional,
    parisi_functional,
)
from .rng import RngStream
from .serialize import content_hash, save_instance
from .spin import (
    anneal_schedule,
    extrapolate_ground_state,
    guided_walk,
    metropolis_chain,
)

# -- schema ---------------------------------------------------------------------------

_REQUIRED = object()


@dataclass(frozen=True)
class _F:
    """One config field: accepted types, default, optional choice set."""

    types: tuple
    default: object = _REQUIRED
    choices: Optional[tuple] = None


def _f(types, default=_REQUIRED, choices=None) -> _F:
    if not isinstance(types, tuple):
        types = (types,)
    return _F(types=types, default=default, choices=choices)


GLOBAL_KEYS = ("experiment", "seed", "out", "jobs", "overwrite")

SCHEMAS: dict[str, dict[str, _F]] = {
    "gen": {
        "model": _f(str, choices=("graph", "tensor", "ksat")),
        "n": _f(int),
        "count": _f(int, 1),
        "edge_prob": _f((str, float), "1/2"),
        "p": _f(int, 2),
        "k": _f(int, 3),
        "m": _f(int, None),
        "density": _f((int, float), None),
    },
    "graphopt": {
        "n": _f(int),
        "edge_prob": _f((str, float), "1/2"),
        "method": _f(str, choices=("exact", "greedy")),
        "kind": _f(str, "clique", ("clique", "independent_set")),
        "seeds": _f(int, 30),
        "size_cap": _f(int, 64),
    },
    "spin": {
        "task": _f(str, choices=("anneal", "extrapolate", "walk")),
        "n": _f(int, 12),
        "p": _f(int, 2),
        "seeds": _f(int, 30),
        "sweeps": _f(int, 80),
        "beta_min": _f((int, float), 0.2),
        "beta_max": _f((int, float), 12.0),
        "delta": _f((int, float), 0.05),
        "ns": _f(list, [14, 17, 20]),
        "seeds_per_n": _f(int, 30),
    },
    "parisi": {
        "task": _f(str, choices=("functional", "minimize", "convergence")),
        "p": _f(int, 2),
        "coefficients": _f(list, None),
        "class_tag": _f(str, "U", ("U", "L")),
        "k": _f(int, 3),
        "spacing": _f((int, float), 0.02),
        "fine_spacing": _f((int, float), 0.01),
        "quad_points": _f(int, 64),
        "n_starts": _f(int, 8),
        "penalty_form": _f(str, "t_weighted", ("t_weighted", "unweighted")),
        "levels": _f(int, 3),
    },
    "ksat": {
        "task": _f(str, choices=("sweep", "moments", "solve", "walksat")),
        "n": _f(int),
        "k": _f(int, 3),
        "densities": _f((list, dict), None),
        "instances_per_point": _f(int, 100),
        "instances": _f(int, 20),
        "density": _f((int, float), 4.0),
        "node_budget": _f(int, None),
        "max_flips": _f(int, 100_000),
        "noise": _f((int, float), 0.5),
        "level": _f((int, float), 0.5),
    },
    "ogp": {
        "task": _f(str, choices=("histogram", "cluster", "endpoint", "stability", "calibrate")),
        "model": _f(str, "tensor", ("tensor", "ksat", "graph")),
        "n": _f(int, 12),
        "p": _f(int, 2),
        "k": _f(int, 3),
        "m": _f(int, None),
        "density": _f((int, float), 4.0),
        "edge_prob": _f((str, float), "1/2"),
        "eta": _f((int, float), None),
        "count": _f(int, 64),
        "sampler": _f(str, "exhaustive", ("exhaustive", "annealed")),
        "restarts": _f(int, 64),
        "sweeps": _f(int, 80),
        "max_flips": _f(int, 20_000),
        "noise": _f((int, float), 0.5),
        "subset_kind": _f(str, "clique", ("clique", "independent_set")),
        "metric": _f(str, "overlap", ("overlap", "hamming")),
        "bins": _f(int, 41),
        "min_width": _f((int, float), None),
        "mass_ceiling": _f((int, float), None),
        "radius": _f(int, 1),
        "size_floor": _f(int, 2),
        "rounds": _f(int, 20),
        "max_positions": _f(int, 65),
        "cases": _f(int, 200),
        "noise_mass": _f((int, float), 0.0),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, normalized run description."""

    kind: str
    seed: int
    out: Path
    jobs: int
    overwrite: bool
    params: dict

    def echo(self) -> dict:
        return {"experiment": self.kind, "seed": self.seed, **self.params}


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to replay a run and audit its outputs."""

    experiment: str
    seed: int
    version: str
    config: dict
    tasks: tuple
    instance_hashes: tuple
    outputs: dict

    def to_json(self) -> dict:
        return {
            "format": "randopt-run",
            "version": self.version,
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "tasks": list(self.tasks),
            "instance_hashes": list(self.instance_hashes),
            "outputs": self.outputs,
        }


def _check_scalar(kind: str, key: str, value, fld: _F):
    if value is None and fld.default is None:
        return None
    ok = False
    for t in fld.types:
        if t is int and isinstance(value, bool):
            continue  # YAML true/false is not an int
        if t is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
            ok = True
            break
        if isinstance(value, t):
            ok = True
            break
    if not ok:
        names = "/".join(t.__name__ for t in fld.types)
        raise SchemaError(
            f"config key {key!r} for experiment {kind!r} must be {names}, "
            f"got {type(value).__name__}"
        )
    if fld.choices is not None and value not in fld.choices:
        raise SchemaError(
            f"config key {key!r} must be one of {fld.choices}, got {value!r}"
        )
    if float in fld.types and isinstance(value, int):
        value = float(value)
    return value


def validate_config(raw: dict) -> ExperimentConfig:
    """Normalize a raw mapping: fill defaults, reject unknown keys by name."""
    if not isinstance(raw, dict):
        raise SchemaError("config must be a key/value mapping")
    kind = raw.get("experiment")
    if kind is None:
        raise SchemaError("missing required key 'experiment'")
    if kind not in SCHEMAS:
        raise SchemaError(
            f"unknown experiment {kind!r}; expected one of {tuple(SCHEMAS)}"
        )
    schema = SCHEMAS[kind]
    for key in raw:
        if key not in GLOBAL_KEYS and key not in schema:
            raise SchemaError(f"unknown config key {key!r} for experiment {kind!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise SchemaError("config key 'seed' must be a nonnegative integer")
    out = raw.get("out")
    if not isinstance(out, str) or not out:
        raise SchemaError("missing required key 'out' (output directory)")
    jobs = raw.get("jobs", os.cpu_count() or 1)
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise SchemaError("config key 'jobs' must be a positive integer")
    overwrite = raw.get("overwrite", False)
    if not isinstance(overwrite, bool):
        raise SchemaError("config key 'overwrite' must be a boolean")
    params = {}
    for key, fld in schema.items():
        if key in raw:
            params[key] = _check_scalar(kind, key, raw[key], fld)
        elif fld.default is _REQUIRED:
            raise SchemaError(f"missing required key {key!r} for experiment {kind!r}")
        else:
            params[key] = fld.default
    return ExperimentConfig(
        kind=kind, seed=seed, out=Path(out), jobs=jobs, overwrite=overwrite,
        params=params,
    )


def load_config(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise SchemaError(f"config file {path} is not valid YAML: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise SchemaError(f"config file {path} must hold a key/value mapping")
    return raw


def apply_overrides(raw: dict, sets: Sequence[str]) -> dict:
    """Apply `key=value` (dots descend into mappings); values parse as YAML."""
    out = dict(raw)
    for item in sets:
        if "=" not in item:
            raise SchemaError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        try:
            value = yaml.safe_load(text) if text != "" else ""
        except yaml.YAMLError as e:
            raise SchemaError(f"override value for {key!r} is not valid YAML: {e}") from e
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
            else:
                nxt = dict(nxt)
            node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


# -- execution helpers -----------------------------------------------------------------


@dataclass
class _Meta:
    tasks: list = field(default_factory=list)
    instance_hashes: list = field(default_factory=list)


def _parallel_map(fn: Callable, items, jobs: int) -> list:
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))  # ex.map keeps input order


def _g(x: float) -> str:
    return f"{x:.12g}"


def _csv(header: str, rows) -> str:
    lines = [header]
    lines += [",".join(str(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(outdir: Path, name: str, text: str):
    (outdir / name).write_text(text)


def _need(params: dict, key: str, task: str):
    if params.get(key) is None:
        raise SchemaError(f"config key {key!r} is required for task {task!r}")
    return params[key]


def _density_grid(spec, key: str = "densities") -> list[float]:
    if spec is None:
        raise SchemaError(f"config key {key!r} is required for this task")
    if isinstance(spec, dict):
        extra = set(spec) - {"lo", "hi", "step"}
        if extra:
            raise SchemaError(f"unknown keys {sorted(extra)} in {key!r} (want lo/hi/step)")
        try:
            lo, hi, step = float(spec["lo"]), float(spec["hi"]), float(spec["step"])
        except KeyError as e:
            raise SchemaError(f"missing key {e.args[0]!r} in {key!r}") from e
        if step <= 0 or hi < lo:
            raise SchemaError(f"{key!r} needs step > 0 and hi >= lo")
        return [float(c) for c in np.arange(lo, hi + step / 2, step)]
    return [float(c) for c in spec]


# -- runners ----------------------------------------------------------------------------


def _run_gen(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/gen")
    model = params["model"]
    rows = []
    for i in range(params["count"]):
        sub = root.child(f"task/{i}")
        if model == "graph":
            inst = gen_er_graph(params["n"], params["edge_prob"], sub)
        elif model == "tensor":
            inst = gen_tensor(params["n"], params["p"], sub)
        else:
            m = params["m"]
            if m is None:
                if params["density"] is None:
                    raise SchemaError(
                        "config key 'm' or 'density' is required for model 'ksat'"
                    )
                m = int(round(params["density"] * params["n"]))
            inst = gen_ksat(params["n"], m, params["k"], sub)
        name = f"inst-{i:04d}.bin"
        digest = save_instance(inst, outdir / name)
        if model == "ksat":
            _write(outdir, f"inst-{i:04d}.cnf", to_dimacs(inst))
        meta.tasks.append({"name": name, "stream": sub.label})
        meta.instance_hashes.append(digest)
        rows.append((name, digest))
    _write(outdir, "index.csv", _csv("instance,sha256", rows))
    return meta


def _run_graphopt(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/graphopt")
    method, kind = params["method"], params["kind"]

    def one(i: int):
        sub = root.child(f"task/{i}")
        g = gen_er_graph(params["n"], params["edge_prob"], sub)
        if method == "exact":
            vs = graphopt.exact_optimum(g, kind, params["size_cap"])
        else:
            vs = graphopt.karp_greedy(g, kind, sub)
        return i, vs.size, content_hash(g), sub.label

    results = _parallel_map(one, range(params["seeds"]), jobs)
    sizes = [r[1] for r in results]
    for i, _, digest, label in results:
        meta.tasks.append({"name": f"seed-{i}", "stream": label})
        meta.instance_hashes.append(digest)
    _write(outdir, "results.csv", _csv("seed,size", [(i, s) for i, s, _, _ in results]))
    _write(outdir, "summary.json", _json_text({
        "method": method, "kind": kind, "seeds": params["seeds"],
        "mean_size": float(np.mean(sizes)),
        "min_size": int(min(sizes)), "max_size": int(max(sizes)),
    }))
    return meta


def _run_spin(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/spin")
    task = params["task"]
    if task == "extrapolate":
        sub = root.child("extrapolate")
        fit = extrapolate_ground_state(
            sub, tuple(int(n) for n in params["ns"]), params["seeds_per_n"], params["p"]
        )
        meta.tasks.append({"name": "extrapolate", "stream": sub.label})
        _write(outdir, "points.csv", _csv(
            "n,mean,stderr",
            [(n, _g(m), _g(s)) for n, m, s in zip(fit.ns, fit.means, fit.stderrs)],
        ))
        _write(outdir, "fit.json", _json_text({
            "ns": list(fit.ns), "means": list(fit.means), "stderrs": list(fit.stderrs),
            "exponent": fit.exponent, "constant": fit.constant, "slope": fit.slope,
            "constant_stderr": fit.constant_stderr,
        }))
        return meta

    n, p, sweeps = params["n"], params["p"], params["sweeps"]

    def one(i: int):
        sub = root.child(f"task/{i}")
        t = gen_tensor(n, p, sub)
        if task == "anneal":
            sched = anneal_schedule(params["beta_min"], params["beta_max"], sweeps)
            res = metropolis_chain(t, sched, sweeps, sub)
            return i, content_hash(t), sub.label, (res.best_energy,)
        res = guided_walk(t, params["delta"], sub)
        return i, content_hash(t), sub.label, (
            res.energy, res.energies.size, res.ortho_max, res.stalls, int(res.completed),
        )

    results = _parallel_map(one, range(params["seeds"]), jobs)
    for i, digest, label, _ in results:
        meta.tasks.append({"name": f"seed-{i}", "stream": label})
        meta.instance_hashes.append(digest)
    if task == "anneal":
        rows = [(i, _g(v[0])) for i, _, _, v in results]
        _write(outdir, "results.csv", _csv("seed,best_energy", rows))
        _write(outdir, "summary.json", _json_text({
            "task": task, "n": n, "p": p, "seeds": params["seeds"],
            "mean_best_energy": float(np.mean([v[0] for _, _, _, v in results])),
        }))
    else:
        rows = [
            (i, _g(v[0]), v[1], _g(v[2]), v[3], v[4]) for i, _, _, v in results
        ]
        _write(outdir, "results.csv",
               _csv("seed,final_energy,steps,ortho_max,stalls,completed", rows))
        _write(outdir, "summary.json", _json_text({
            "task": task, "n": n, "p": p, "delta": params["delta"],
            "seeds": params["seeds"],
            "completed_fraction": float(np.mean([v[4] for _, _, _, v in results])),
            "max_ortho": float(max(v[2] for _, _, _, v in results)),
        }))
    return meta


def _mixture(params: dict) -> MixtureSpec:
    coeffs = params["coefficients"]
    if coeffs is None:
        return MixtureSpec(params["p"])
    pairs = []
    for item in coeffs:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise SchemaError("config key 'coefficients' must hold [order, coeff] pairs")
        pairs.append((int(item[0]), float(item[1])))
    return MixtureSpec(params["p"], tuple(pairs))


def _run_parisi(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/parisi")
    task = params["task"]
    spec = _mixture(params)
    grid = PdeGrid.for_mixture(spec, spacing=params["spacing"],
                               quad_points=params["quad_points"])
    if task == "functional":
        fv = parisi_functional(OrderParam.zero(), spec,
                               grid=grid, penalty_form=params["penalty_form"])
        meta.tasks.append({"name": "functional", "stream": root.label})
        _write(outdir, "value.json", fv.as_json() + "\n")
        return meta
    if task == "convergence":
        text = convergence_table(OrderParam.zero(), spec, grid, params["levels"])
        meta.tasks.append({"name": "convergence", "stream": root.label})
        _write(outdir, "convergence.csv", text)
        return meta
    fine = PdeGrid.for_mixture(spec, spacing=params["fine_spacing"],
                               quad_points=params["quad_points"])
    sub = root.child("minimize")
    res = minimize_functional(
        spec, class_tag=params["class_tag"], k=params["k"], grid=grid,
        fine_grid=fine, n_starts=params["n_starts"], rng=sub,
        penalty_form=params["penalty_form"],
    )
    meta.tasks.append({"name": "minimize", "stream": sub.label})
    _write(outdir, "result.json", res.to_json() + "\n")
    _write(outdir, "trace.csv", _csv(
        "evaluation,search_value",
        [(i, _g(v)) for i, v in enumerate(res.evaluations)],
    ))
    return meta


def _run_ksat(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/ksat")
    task = params["task"]
    n, k = params["n"], params["k"]
    if task == "moments":
        grid = _density_grid(params["densities"])
        crv = sat_moment_curve(n, k, grid)
        meta.tasks.append({"name": "moments", "stream": root.label})
        _write(outdir, "moments.csv", crv.as_csv())
        _write(outdir, "crossing.json", _json_text({
            "first_moment_crossing": first_moment_crossing(k),
            "curve_crossing": crv.crossing,
        }))
        return meta
    if task == "sweep":
        grid = _density_grid(params["densities"])
        sweep_stream = root.child("sweep")

        def one(c: float):
            # instance sub-streams are keyed by density, so per-density calls
            # reproduce the serial full-grid sweep byte for byte
            return dpll_sat_sweep(
                n, k, [c], params["instances_per_point"], sweep_stream,
                node_budget=params["node_budget"],
            )[0]

        points = _parallel_map(one, grid, jobs)
        meta.tasks.append({"name": "sweep", "stream": sweep_stream.label})
        try:
            crossing = empirical_crossing(points, params["level"])
        except InsufficientDataError:
            crossing = None
        _write(outdir, "sweep.csv", sweep_to_csv(points))
        _write(outdir, "crossing.json", _json_text({
            "empirical_crossing": crossing,
            "level": params["level"],
            "first_moment_crossing": first_moment_crossing(k),
        }))
        return meta

    m = int(round(params["density"] * n))

    def one(i: int):
        sub = root.child(f"task/{i}")
        f = gen_ksat(n, m, k, sub)
        digest = content_hash(f)
        if task == "solve":
            try:
                res = dpll_solve(f, node_budget=params["node_budget"])
                return i, digest, sub.label, (res.status, res.decisions)
            except BudgetExceededError as e:
                return i, digest, sub.label, ("BUDGET", e.spent)
        res = walksat(f, params["max_flips"], params["noise"], sub)
        return i, digest, sub.label, (int(res.found), res.flips)

    results = _parallel_map(one, range(params["instances"]), jobs)
    for i, digest, label, _ in results:
        meta.tasks.append({"name": f"inst-{i}", "stream": label})
        meta.instance_hashes.append(digest)
    if task == "solve":
        _write(outdir, "verdicts.csv", _csv(
            "instance,status,decisions", [(i, v[0], v[1]) for i, _, _, v in results]
        ))
        sat = sum(1 for _, _, _, v in results if v[0] == "SAT")
        _write(outdir, "summary.json", _json_text({
            "task": task, "n": n, "k": k, "density": params["density"],
            "instances": params["instances"],
            "sat_fraction": sat / params["instances"],
        }))
    else:
        _write(outdir, "results.csv", _csv(
            "instance,found,flips", [(i, v[0], v[1]) for i, _, _, v in results]
        ))
        found = sum(v[0] for _, _, _, v in results)
        _write(outdir, "summary.json", _json_text({
            "task": task, "n": n, "k": k, "density": params["density"],
            "instances": params["instances"],
            "found_fraction": found / params["instances"],
        }))
    return meta


def _ogp_model(params: dict, rng: RngStream):
    model = params["model"]
    if model == "tensor":
        return gen_tensor(params["n"], params["p"], rng)
    if model == "ksat":
        m = params["m"]
        if m is None:
            m = int(round(params["density"] * params["n"]))
        return gen_ksat(params["n"], m, params["k"], rng)
    return gen_er_graph(params["n"], params["edge_prob"], rng)


def _run_ogp(params: dict, seed: int, jobs: int, outdir: Path) -> _Meta:
    meta = _Meta()
    root = RngStream(seed, "exp/ogp")
    task = params["task"]
    if task == "calibrate":
        rows = []
        hits = 0
        for i in range(params["cases"]):
            planted = i % 2 == 0
            hist, truth = planted_gap_histogram(
                root.child(f"case/{i}"), gap=planted,
                noise_mass=params["noise_mass"] if planted else 0.0,
            )
            rep = detect_gap(hist, params["min_width"], params["mass_ceiling"])
            bw = hist.edges[1] - hist.edges[0]
            if planted:
                ok = (rep.present and abs(rep.nu1 - truth[0]) <= 2 * bw
                      and abs(rep.nu2 - truth[1]) <= 2 * bw)
            else:
                ok = not rep.present
            hits += ok
            rows.append((
                i, int(planted),
                _g(truth[0]) if planted else "",
                _g(truth[1]) if planted else "",
                int(rep.present),
                _g(rep.nu1) if rep.present else "",
                _g(rep.nu2) if rep.present else "",
                int(ok),
            ))
        meta.tasks.append({"name": "calibrate", "stream": root.label})
        _write(outdir, "calibration.csv", _csv(
            "case,planted,planted_nu1,planted_nu2,detected,detected_nu1,detected_nu2,correct",
            rows,
        ))
        _write(outdir, "accuracy.json", _json_text({
            "cases": params["cases"], "accuracy": hits / params["cases"],
            "noise_mass": params["noise_mass"],
        }))
        return meta

    inst_stream = root.child("instance")
    model = _ogp_model(params, inst_stream)
    meta.instance_hashes.append(content_hash(model))
    cfg = SamplerConfig(
        mode=params["sampler"], restarts=params["restarts"], sweeps=params["sweeps"],
        max_flips=params["max_flips"], noise=params["noise"],
        subset_kind=params["subset_kind"],
    )
    if task == "histogram":
        eta = _need(params, "eta", task)
        sub = root.child("sample")
        nos = sample_near_optima(model, eta, params["count"], cfg, sub)
        meta.tasks.append({"name": "sample", "stream": sub.label})
        hist = overlap_histogram(nos, params["metric"], params["bins"])
        rep = detect_gap(hist, params["min_width"], params["mass_ceiling"])
        _write(outdir, "set.json", _json_text(nos.to_json()))
        _write(outdir, "hist.csv", hist.to_csv())
        _write(outdir, "hist.json", _json_text(hist.to_json()))
        _write(outdir, "gap.json", _json_text(rep.to_json()))
        return meta
    if task == "cluster":
        if params["model"] == "ksat":
            masks = enumerate_solutions(model)
            sols = ((masks[:, None] >> np.arange(model.n)) & 1).astype(np.int8)
        else:
            eta = _need(params, "eta", task)
            sols = sample_near_optima(model, eta, 0, cfg).solutions
        rep = cluster_solutions(sols, params["radius"], params["size_floor"])
        meta.tasks.append({"name": "cluster", "stream": inst_stream.label})
        _write(outdir, "cluster.json", _json_text(rep.to_json()))
        _write(outdir, "components.csv", _csv(
            "component,size", list(enumerate(rep.components))
        ))
        return meta
    path = make_interpolation_path(model, root.child("path"))
    if task == "endpoint":
        eta = _need(params, "eta", task)
        sub = root.child("experiment")
        exp = interpolation_overlap_experiment(
            path, eta, 2, cfg, sub,
            positions=(0, path.total_units), rounds=params["rounds"],
        )
        meta.tasks.append({"name": "endpoint", "stream": sub.label})
        _write(outdir, "experiment.json", _json_text(exp.to_json()))
        if exp.endpoint is not None:
            _write(outdir, "overlaps.csv", _csv(
                "round,overlap",
                [(i, _g(v)) for i, v in enumerate(exp.endpoint.overlaps)],
            ))
            _write(outdir, "endpoint.json", _json_text(exp.endpoint.to_json()))
        return meta
    sub = root.child("stability")
    prof = algorithm_stability_profile(
        path, sub, params["subset_kind"], max_positions=params["max_positions"]
    )
    meta.tasks.append({"name": "stability", "stream": sub.label})
    _write(outdir, "stability.csv", prof.to_csv())
    _write(outdir, "stability.json", _json_text(prof.to_json()))
    return meta


_RUNNERS = {
    "gen": _run_gen,
    "graphopt": _run_graphopt,
    "spin": _run_spin,
    "parisi": _run_parisi,
    "ksat": _run_ksat,
    "ogp": _run_ogp,
}


# -- orchestration -----------------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Execute one experiment; returns the manifest that was written.

    All outputs land in a staging directory first and are promoted with a
    single atomic rename, so config.out either holds a complete run or
    does not exist.
    """
    out = config.out
    if out.exists() and not config.overwrite:
        raise ParameterError(
            f"output directory {out} already exists (set overwrite: true to replace)"
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    staging = Path(tempfile.mkdtemp(prefix=out.name + ".stage-", dir=out.parent))
    try:
        meta = _RUNNERS[config.kind](config.params, config.seed, config.jobs, staging)
        outputs = {
            f.name: _sha256_file(f)
            for f in sorted(staging.iterdir())
            if f.is_file()
        }
        manifest = RunManifest(
            experiment=config.kind,
            seed=config.seed,
            version=__version__,
            config=config.echo(),
            tasks=tuple(meta.tasks),
            instance_hashes=tuple(meta.instance_hashes),
            outputs=outputs,
        )
        (staging / "manifest.json").write_text(_json_text(manifest.to_json()))
        # wall clock is observational: kept beside the manifest, never in it
        (staging / "timing.json").write_text(_json_text({
            "wall_clock_s": round(time.time() - t0, 3),
        }))
        if out.exists():
            shutil.rmtree(out)
        os.replace(staging, out)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return manifest


def emit_report(run_dir) -> tuple[dict, str]:
    """Re-verify a run directory against its manifest.

    Returns (summary, table). Digest mismatches and missing files are
    flagged in the summary, never raised; a missing or unreadable
    manifest is an integrity error.
    """
    run_dir = Path(run_dir)
    mpath = run_dir / "manifest.json"
    if not mpath.is_file():
        raise IntegrityError(f"no manifest.json in {run_dir}")
    try:
        manifest = json.loads(mpath.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise IntegrityError(f"manifest in {run_dir} is unreadable: {e}") from e
    for key in ("experiment", "seed", "outputs"):
        if key not in manifest:
            raise IntegrityError(f"manifest in {run_dir} lacks key {key!r}")
    flags = []
    rows = []
    for name in sorted(manifest["outputs"]):
        want = manifest["outputs"][name]
        fpath = run_dir / name
        if not fpath.is_file():
            flags.append(f"{name}: missing")
            rows.append((name, "-", "MISSING"))
            continue
        got = _sha256_file(fpath)
        if got != want:
            flags.append(f"{name}: digest mismatch")
            rows.append((name, fpath.stat().st_size, "MISMATCH"))
        else:
            rows.append((name, fpath.stat().st_size, "ok"))
    summary = {
        "experiment": manifest["experiment"],
        "seed": manifest["seed"],
        "outputs": len(manifest["outputs"]),
        "flags": flags,
    }
    # sweep runs: one data row per grid point, count validated against config
    grid_spec = manifest.get("config", {}).get("densities")
    spath = run_dir / "sweep.csv"
    if grid_spec is not None and "sweep.csv" in manifest["outputs"] and spath.is_file():
        n_rows = max(len(spath.read_text().splitlines()) - 1, 0)
        summary["sweep_points"] = n_rows
        try:
            want = len(_density_grid(grid_spec))
        except SchemaError:
            want = None
        if want is not None and n_rows != want:
            flags.append(f"sweep.csv: {n_rows} rows for a {want}-point grid")
    summary["ok"] = not flags
    width = max([len(r[0]) for r in rows] + [6])
    lines = [f"run {run_dir}  experiment={summary['experiment']} seed={summary['seed']}"]
    lines += [f"  {name:<{width}}  {size:>10}  {status}" for name, size, status in rows]
    if "sweep_points" in summary:
        lines.append(f"sweep points: {summary['sweep_points']}")
    lines.append("integrity: " + ("ok" if summary["ok"] else "; ".join(flags)))
    return summary, "\n".join(lines)


# -- CLI ---------------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randopt",
        description="Seeded, replayable experiments on random optimization problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in SCHEMAS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, help="parallel task slots")
        p.add_argument("--overwrite", action="store_true",
                       help="replace an existing output directory")
        p.add_argument("--set", dest="sets", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
    rep = sub.add_parser("report", help="verify a run directory against its manifest")
    rep.add_argument("run_dir")
    rep.add_argument("--json", action="store_true", help="print the JSON summary only")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            summary, table = emit_report(args.run_dir)
            print(_json_text(summary) if args.json else table)
            return 0 if summary["ok"] else 1
        raw = load_config(args.config) if args.config else {}
        if "experiment" in raw and raw["experiment"] != args.command:
            raise SchemaError(
                f"config is for experiment {raw['experiment']!r}, "
                f"but the {args.command!r} command was invoked"
            )
        raw["experiment"] = args.command
        raw = apply_overrides(raw, args.sets)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["out"] = args.out
        if args.jobs is not None:
            raw["jobs"] = args.jobs
        if args.overwrite:
            raw["overwrite"] = True
        config = validate_config(raw)
        manifest = run_experiment(config)
        print(f"wrote {config.out} ({len(manifest.outputs)} outputs)")
        return 0
    except (SchemaError, ParameterError, IntegrityError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
