"""Command-line entry point: ``generate``, ``solve`` and ``benchmark``.

Solver settings come from an optional JSON config file whose keys mirror the
long flags (``--core-size`` is ``core_size``); flags given on the command line
win over the file, which wins over the built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import EnumerationTooLargeError, GreedyConfig, brute_force, greedy_assign, objective_range, simulated_annealing
from .ising import qubo_to_ising
from .pipeline import PipelineConfig, delta_norm, run_pipeline, scaled_ratio, solve_core
from .presolve import PresolveConfig
from .qaoa import OptimizerConfig
from .rqaoa import RqaoaConfig
from .statevector import MAX_QUBITS, MixerKind
from .wireless import (
    ChannelAssignmentInstance,
    HotspotParams,
    PenaltyConfig,
    auto_penalty,
    build_qubo,
    check_feasibility,
    decode,
    generate_demo,
    generate_hotspot,
    generate_random,
    matrix_to_channels,
    objective_value,
)

logger = logging.getLogger("rqaoa_wireless")

SOLVERS = ("greedy", "sa", "exact", "qaoa", "rqaoa", "pipeline")
WORKERS_ENV = "RQAOA_WIRELESS_WORKERS"
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

# config key -> (type, default, help); every key doubles as a --flag
CONFIG_KEYS = {
    "seed": (int, 0, "solver seed"),
    "core_size": (int, 10, "users handed to the quantum core"),
    "n_cutoff": (int, 6, "stop recursion at this many active spins"),
    "threshold": (float, 0.0, "minimum |correlation| for an elimination"),
    "depth": (int, 1, "QAOA depth p"),
    "mixer": (str, "x", "mixer: x, y, ring_xy, clique_xy, matching_xy, star_xy"),
    "init_state": (str, "plus", "initial state: plus, onehot_basis, onehot_uniform"),
    "restarts": (int, 3, "optimizer restarts per QAOA call"),
    "max_evaluations": (int, 200, "objective calls per restart"),
    "gamma_max": (float, float(np.pi / 2), "upper end of the gamma sampling range"),
    "normalize_gamma": (bool, True, "divide gamma_max by the largest |coefficient|"),
    "penalty_A": (float, None, "one-hot penalty weight (default: automatic)"),
    "presolve": (bool, True, "isolated-spin and persistency reductions"),
    "shots": (int, None, "estimate correlators from this many samples"),
    "sample_shots": (int, 1024, "samples for the qaoa solver's best-of readout"),
    "greedy_order": (str, "by_interference_score_desc", "greedy user order"),
    "sa_sweeps": (int, None, "annealing sweeps (default 100 n)"),
}

CSV_COLUMNS = [
    "instance_id", "seed", "U", "C", "solver", "objective", "feasible", "repaired",
    "delta_norm", "delta_kind", "scaled_ratio", "n_qubits_core",
    "t_presolve_ms", "t_core_ms", "t_extend_ms", "t_total_ms", "error", "manifest",
]


class CliError(Exception):
    pass


def _version() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- configuration ----------------------------------------------------------


def resolve_options(file_cfg: dict = None, overrides: dict = None) -> dict:
    """Defaults, then ``file_cfg``, then non-None ``overrides``."""
    opts = {k: v[1] for k, v in CONFIG_KEYS.items()}
    for source in (file_cfg or {}, overrides or {}):
        for k, v in source.items():
            if k not in CONFIG_KEYS:
                raise CliError(f"unknown config key {k!r}")
            if v is not None:
                opts[k] = v
    return opts


def pipeline_config(opts: dict, solver: str = "rqaoa") -> PipelineConfig:
    qaoa = OptimizerConfig(
        depth=opts["depth"], mixer=MixerKind(opts["mixer"]), init_state=opts["init_state"],
        restarts=opts["restarts"], max_evaluations=opts["max_evaluations"],
        gamma_range=(0.0, float(opts["gamma_max"])), normalize_gamma=bool(opts["normalize_gamma"]),
        seed=opts["seed"],
    )
    rq = RqaoaConfig(n_cutoff=opts["n_cutoff"], threshold=opts["threshold"], qaoa=qaoa, shots=opts["shots"])
    pen = PenaltyConfig(float(opts["penalty_A"])) if opts["penalty_A"] is not None else None
    return PipelineConfig(
        core_size=opts["core_size"], solver=solver, rqaoa=rq,
        presolve=PresolveConfig(opts["presolve"], opts["presolve"]), penalty=pen,
        greedy=GreedyConfig(opts["greedy_order"]), sample_shots=opts["sample_shots"], seed=opts["seed"],
    )


# -- solving ----------------------------------------------------------------


def solve(inst: ChannelAssignmentInstance, solver: str, opts: dict) -> dict:
    """Run one solver; returns the assignment record plus timings and trace."""
    if solver not in SOLVERS:
        raise CliError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    t0 = time.perf_counter()
    out = {"repaired": False, "n_qubits_core": 0, "trace": [],
           "timings_ms": {"presolve": 0.0, "core": 0.0, "extend": 0.0}}
    if solver == "greedy":
        X = greedy_assign(inst, GreedyConfig(opts["greedy_order"]))
    elif solver == "exact":
        X = brute_force(inst)[0]
    elif solver == "sa":
        pen = PenaltyConfig(float(opts["penalty_A"])) if opts["penalty_A"] is not None else auto_penalty(inst)
        qubo, layout = build_qubo(inst, pen)
        z, _ = simulated_annealing(qubo_to_ising(qubo), n_sweeps=opts["sa_sweeps"], seed=opts["seed"])
        X = decode([(1 - z.get(i, 1)) // 2 for i in range(layout.n)], layout)
        out["n_qubits_core"] = layout.n
    elif solver in ("qaoa", "rqaoa"):
        if inst.num_users * inst.num_channels > MAX_QUBITS:
            raise CliError(f"{inst.num_users}x{inst.num_channels} instance exceeds the "
                           f"{MAX_QUBITS}-qubit simulator; use the pipeline solver")
        cfg = pipeline_config(opts, "rqaoa" if solver == "rqaoa" else "qaoa_sample_best")
        X, info = solve_core(inst, cfg)
        out.update(n_qubits_core=info["n_qubits"], trace=info["trace"])
        out["timings_ms"]["presolve"] = info["t_presolve"]
    else:
        X, res = run_pipeline(inst, pipeline_config(opts, "rqaoa"))
        out.update(repaired=res.repaired, n_qubits_core=res.n_qubits_core, trace=res.trace)
        out["timings_ms"] = dict(res.timings_ms)
    if solver != "pipeline":
        tm = out["timings_ms"]
        tm["total"] = 1e3 * (time.perf_counter() - t0)
        tm["core"] = tm["total"] - tm["presolve"]
    out.update(
        matrix=X,
        assignment=[int(c) for c in matrix_to_channels(X)],
        objective=objective_value(X, inst),
        feasible=check_feasibility(X, inst).feasible,
    )
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


# -- benchmark --------------------------------------------------------------


def _make_instance(gen: str, U: int, C: int, seed: int, params: dict) -> ChannelAssignmentInstance:
    if gen == "hotspot":
        return generate_hotspot(U, C, HotspotParams(**params), seed)
    if gen == "random":
        return generate_random(U, C, seed, **params)
    if gen == "demo":
        return generate_demo(seed)
    raise CliError(f"unknown generator {gen!r}")


def expand_benchmark(spec: dict) -> list[dict]:
    """Cross-product of sizes, seeds and solvers as self-contained task dicts.

    ``spec`` keys: ``generator`` (hotspot | random | demo), ``channels``,
    ``users`` or ``qubits`` (a list; qubits are divided by ``channels``),
    ``seeds`` (topology seeds: a list, or an int meaning ``range(seeds)``),
    ``repetitions`` (solver seeds per topology; by default the solver reuses
    the topology seed), ``solvers`` (names
    or ``{"label", "solver", "config"}`` dicts), ``config`` shared by all
    solvers, ``generator_params`` and ``scaled_ratio`` (enumerate the
    feasible range when small enough).
    """
    gen = spec.get("generator", "hotspot")
    C = int(spec.get("channels", 2))
    if "qubits" in spec:
        sizes = []
        for n in spec["qubits"]:
            if n % C:
                raise CliError(f"{n} qubits is not a multiple of {C} channels")
            sizes.append(n // C)
    else:
        sizes = [int(u) for u in spec.get("users", [4])]
    seeds = spec.get("seeds", 1)
    seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    reps = spec.get("repetitions")
    solvers = []
    for s in spec.get("solvers", ["greedy"]):
        if isinstance(s, str):
            s = {"label": s, "solver": s}
        kind = s.get("solver", s.get("label"))
        if kind not in SOLVERS:
            raise CliError(f"unknown solver {kind!r}")
        solvers.append({"label": s.get("label", kind), "solver": kind, "config": s.get("config", {})})
    shared = dict(spec.get("config", {}))
    resolve_options(shared)  # reject unknown keys early
    tasks = []
    for U in sizes:
        for topo in seeds:
            iid = f"{gen}-U{U}-C{C}-s{topo}"
            for seed in ([topo] if reps is None else range(int(reps))):
                for s in solvers:
                    opts = dict(shared, **s["config"])
                    opts.setdefault("seed", seed)
                    tasks.append({
                        "instance_id": iid, "generator": gen, "U": U, "C": C, "topology": topo, "seed": seed,
                        "generator_params": spec.get("generator_params", {}),
                        "solver": s["label"], "kind": s["solver"], "options": opts,
                        "scaled_ratio": bool(spec.get("scaled_ratio", False)),
                    })
    return tasks


def run_task(task: dict) -> dict:
    """One benchmark row; failures become rows with an ``error`` code."""
    row = {k: "" for k in CSV_COLUMNS}
    row.update(instance_id=task["instance_id"], seed=task["seed"], U=task["U"], C=task["C"], solver=task["solver"])
    try:
        inst = _make_instance(task["generator"], task["U"], task["C"], task["topology"], task["generator_params"])
        out = solve(inst, task["kind"], resolve_options(task["options"]))
        ref = objective_value(greedy_assign(inst, GreedyConfig(resolve_options(task["options"])["greedy_order"])), inst)
        dev = delta_norm(out["objective"], ref)
        row.update(
            objective=repr(out["objective"]), feasible=int(out["feasible"]), repaired=int(out["repaired"]),
            delta_norm=repr(dev.value), delta_kind="relative" if dev.relative else "absolute",
            n_qubits_core=out["n_qubits_core"],
            **{f"t_{k}_ms": f"{v:.3f}" for k, v in out["timings_ms"].items()},
        )
        if task["scaled_ratio"]:
            try:
                lo, hi = objective_range(inst)
                row["scaled_ratio"] = repr(scaled_ratio(out["objective"], lo, hi))
            except EnumerationTooLargeError:
                pass
    except Exception as exc:  # recorded, the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _task_key(d) -> tuple[str, str, str]:
    return str(d["instance_id"]), str(d["seed"]), str(d["solver"])


def completed_keys(path: Path) -> set:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        return {_task_key(r) for r in csv.DictReader(fh)}


def run_benchmark(spec: dict, out_path, workers: int = 1) -> int:
    """Stream rows for every task not already in ``out_path``; returns rows written."""
    out_path = Path(out_path)
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    tasks = expand_benchmark(spec)
    done = completed_keys(out_path)
    todo = [t for t in tasks if _task_key(t) not in done]
    manifest = {"version": _version(), "config": spec, "runs": [],
                "topologies": sorted({t["topology"] for t in tasks}), "seeds": sorted({t["seed"] for t in tasks})}
    if manifest_path.exists():
        manifest["runs"] = json.loads(manifest_path.read_text()).get("runs", [])
    run = {"started": _now(), "tasks": len(todo), "skipped": len(tasks) - len(todo), "workers": workers}
    manifest["runs"].append(run)
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    logger.info("%d tasks, %d already present in %s", len(tasks), len(tasks) - len(todo), out_path)
    fresh = not out_path.exists() or out_path.stat().st_size == 0
    written = 0
    with open(out_path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if fresh:
            w.writeheader()
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = pool.map(run_task, todo)
                for row in rows:
                    w.writerow(dict(row, manifest=manifest_path.name))
                    fh.flush()
                    written += 1
        else:
            for t in todo:
                w.writerow(dict(run_task(t), manifest=manifest_path.name))
                fh.flush()
                written += 1
    run["finished"] = _now()
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return written


# -- argument handling ------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file with solver settings")
    for key, (typ, _, help_) in CONFIG_KEYS.items():
        flag = "--" + key.replace("_", "-").lower()
        if typ is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=help_)
        else:
            p.add_argument(flag, dest=key, type=typ, default=None, help=help_)


def _load_json(path: Path, what: str):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"cannot parse {what} {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc.strerror}") from exc


def _write(text: str, path):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqaoa-wireless", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an instance JSON")
    g.add_argument("kind", choices=["demo", "hotspot", "random"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--users", type=int, default=16)
    g.add_argument("--channels", type=int, default=2)
    g.add_argument("--max-weight", type=int, default=5, help="random: largest integer weight")
    g.add_argument("--hotspots", type=int, default=None, help="hotspot: number of centers (default ceil(U/8))")
    g.add_argument("--pathloss-exponent", type=float, default=3.5)
    g.add_argument("--shadowing-db", type=float, default=6.0)
    g.add_argument("--area-side", type=float, default=100.0)
    g.add_argument("--weight-floor", type=float, default=1e-3)
    g.add_argument("-o", "--out", default="-")

    s = sub.add_parser("solve", help="solve an instance JSON")
    s.add_argument("instance", type=Path)
    s.add_argument("--solver", choices=SOLVERS, default="pipeline")
    s.add_argument("-o", "--out", default="-")
    s.add_argument("--trace", type=Path, help="write the per-round trace as JSON lines")
    _add_config_flags(s)

    b = sub.add_parser("benchmark", help="run a benchmark spec into a CSV")
    b.add_argument("spec", type=Path)
    b.add_argument("-o", "--out", type=Path, required=True)
    b.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    return parser


def cmd_generate(args) -> int:
    if args.kind == "demo":
        inst = generate_demo(args.seed)
    elif args.kind == "random":
        inst = generate_random(args.users, args.channels, args.seed, args.max_weight)
    else:
        params = HotspotParams(pathloss_exponent=args.pathloss_exponent, shadowing_db=args.shadowing_db,
                               area_side=args.area_side, num_hotspots=args.hotspots, weight_floor=args.weight_floor)
        inst = generate_hotspot(args.users, args.channels, params, args.seed)
    _write(inst.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        inst = ChannelAssignmentInstance.from_dict(_load_json(args.instance, "instance"))
    except (KeyError, TypeError) as exc:
        raise CliError(f"malformed instance {args.instance}: {exc!r}") from exc
    file_cfg = _load_json(args.config, "config") if args.config else {}
    opts = resolve_options(file_cfg, {k: getattr(args, k) for k in CONFIG_KEYS})
    out = solve(inst, args.solver, opts)
    logger.info("%s: objective %g, feasible %s, %.1f ms", args.solver, out["objective"], out["feasible"],
                out["timings_ms"]["total"])
    record = {
        "solver": args.solver,
        "assignment": out["assignment"],
        "objective": out["objective"],
        "feasible": out["feasible"],
        "repaired": out["repaired"],
        "config": opts,
        "version": __version__,
    }
    _write(json.dumps(_jsonable(record), indent=1, sort_keys=True) + "\n", args.out)
    if args.trace is not None:
        args.trace.write_text("".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in out["trace"]))
    return EXIT_OK if out["feasible"] else EXIT_INFEASIBLE


def cmd_benchmark(args) -> int:
    spec = _load_json(args.spec, "benchmark spec")
    workers = args.workers if args.workers is not None else int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise CliError("need at least one worker")
    n = run_benchmark(spec, args.out, workers)
    logger.info("wrote %d rows to %s", n, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(message)s")
    handler = {"generate": cmd_generate, "solve": cmd_solve, "benchmark": cmd_benchmark}[args.command]
    try:
        return handler(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
