"""Experiment orchestration CLI.

Subcommands `region`, `simulate`, `split`, `converse`, each driven by a JSON
config (--config) and writing a JSON report plus CSV summaries into --out.
Every output embeds the resolved config and its sha256 hash together with the
seed, so any artifact can be reproduced bit-exactly by re-running its embedded
config.  --threads is a hint only; results never depend on it.

Config schema (see README for the full field list):

    {
      "seed": 1234,                      # required, no wall-clock defaults
      "task": "region" | "simulate" | "split" | "converse",
      "channel": {"transition": [...]}   # nested rows, x1 slowest, y fastest
                 | {"file": "channel.json"},
      ...task-specific fields...
    }
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from amacsim.converse import bound_report, relative_delay_bound, relative_delay_law
from amacsim.decoders import (
    OperatingPoint,
    TypicalityParams,
    interleaved_codec,
    partly_async_pipeline_decoder,
    plan_partly_async_pipeline,
    single_sender_decoder_factory,
    successive_decoder_factory,
)
from amacsim.infocore import Distribution, DmcChannel, ProductInput, ValidationError
from amacsim.regions import (
    SearchBudget,
    even_delay_region_contains,
    partly_async_region_contains,
    polytope,
    product_input_grid,
    subsets,
    union_contains,
)
from amacsim.simkernel import (
    CodebookSpec,
    DelaySystem,
    SymbolSchedule,
    generate_codebooks,
    run_trials,
    transmit,
)
from amacsim.splitting import split_distribution, split_for_edge, two_sender_split_point


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return cfg[key]


def parse_channel(cfg: dict, path: str = "channel") -> DmcChannel:
    if "file" in cfg:
        with open(cfg["file"]) as fh:
            cfg = json.load(fh)
    matrix = _require(cfg, "transition", path)
    try:
        return DmcChannel(np.array(matrix, dtype=np.float64))
    except ValidationError as e:
        raise ConfigError(f"{path}.transition", str(e)) from e


def parse_distribution(values, path: str) -> Distribution:
    try:
        return Distribution(np.array(values, dtype=np.float64))
    except (ValidationError, ValueError) as e:
        raise ConfigError(path, str(e)) from e


def parse_inputs(values, path: str) -> ProductInput:
    return ProductInput(
        tuple(parse_distribution(v, f"{path}[{i}]") for i, v in enumerate(values))
    )


def parse_delay_system(cfg: dict, k: int, path: str = "delays") -> DelaySystem:
    kind = _require(cfg, "kind", path)
    try:
        if kind == "totally_async":
            return DelaySystem.totally_async(k)
        if kind == "even_delays":
            return DelaySystem.even_delays()
        if kind == "partly_async3":
            return DelaySystem.partly_async3()
        if kind == "fixed":
            return DelaySystem.fixed_delays(_require(cfg, "delays", path))
        if kind == "custom":
            pmf = {tuple(int(x) for x in d): float(p) for d, p in _require(cfg, "pmf", path)}
            return DelaySystem.custom(pmf, k)
        if kind == "sync_groups":
            return DelaySystem.sync_groups(_require(cfg, "groups", path), k)
    except ValidationError as e:
        raise ConfigError(path, str(e)) from e
    raise ConfigError(f"{path}.kind", f"unknown delay system {kind!r}")


def parse_schedule(cfg, path: str) -> SymbolSchedule:
    if isinstance(cfg, list):
        return SymbolSchedule(parse_distribution(cfg, path))
    first = parse_distribution(_require(cfg, "first", path), f"{path}.first")
    if "second" not in cfg:
        return SymbolSchedule(first)
    second = parse_distribution(cfg["second"], f"{path}.second")
    return SymbolSchedule(first, second, alpha=float(cfg.get("alpha", 0.5)))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _write_json(out_dir: Path, name: str, payload: dict) -> None:
    (out_dir / name).write_text(json.dumps(payload, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Distribution):
        return x.probs.tolist()
    if isinstance(x, ProductInput):
        return [m.probs.tolist() for m in x.marginals]
    raise TypeError(f"not JSON-serializable: {type(x)}")


def _write_csv(out_dir: Path, name: str, rows: list[dict], header_comment: str = "") -> None:
    with open(out_dir / name, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# region task
# ---------------------------------------------------------------------------

def emit_region_plot_data(
    channel: DmcChannel,
    kind: str,
    resolution: int = 64,
    grid_denom: int = 8,
    budget: int = 20000,
    tol: float = 1e-6,
) -> tuple[list[dict], list[dict]]:
    """Boundary samples along sum-direction rays: (rows, certificates).

    kinds: single-polytope (uniform inputs), union, even-delay, partly-async.
    Rows carry R1..RK, a membership flag and a certificate id; certificates
    list the witnesses found for the boundary points.
    """
    k = channel.num_senders
    if kind not in ("single-polytope", "union", "even-delay", "partly-async"):
        raise ConfigError("region.kind", f"unsupported kind {kind!r}")
    if kind == "even-delay" and k != 2:
        raise ConfigError("region.kind", "even-delay needs K = 2")
    if kind == "partly-async" and k != 3:
        raise ConfigError("region.kind", "partly-async needs K = 3")

    if k == 1:
        c = polytope(channel, ProductInput.uniform(channel.input_sizes)).sum_bound()
        if kind == "union":
            best = 0.0
            for p in product_input_grid(channel.input_sizes, grid_denom):
                best = max(best, polytope(channel, p).sum_bound())
            c = best
        rows = [
            {"R1": 0.0, "member": 1, "certificate": ""},
            {"R1": c, "member": 1, "certificate": ""},
        ]
        return rows, []

    # precompute grid polytope bounds for the vectorized membership tests
    order = subsets(k)
    grid = []
    if kind != "single-polytope":
        for p in product_input_grid(channel.input_sizes, grid_denom):
            grid.append(polytope(channel, p))
    bvecs = np.array([g.bound_vector(order) for g in grid]) if grid else None

    def member(r: np.ndarray) -> bool:
        rvec = np.array([r[list(s)].sum() for s in order])
        if kind == "single-polytope":
            poly = polytope(channel, ProductInput.uniform(channel.input_sizes))
            return bool((poly.bound_vector(order) >= rvec - tol).all())
        single = (bvecs >= rvec[None, :] - tol).all(axis=1)
        if single.any():
            return True
        if kind == "union":
            return False
        if kind == "even-delay":
            pair = (bvecs[:, None, :] + bvecs[None, :, :]) / 2.0 >= rvec[None, None, :] - tol
            return bool(pair.all(axis=2).any())
        # partly-async: same-p3 pairs at a small weight grid
        thirds = {}
        for i, g in enumerate(grid):
            key = tuple(np.round(g.inputs.marginals[2].probs, 12))
            thirds.setdefault(key, []).append(i)
        for idxs in thirds.values():
            sub = bvecs[idxs]
            for w in (0.25, 0.5, 0.75):
                pair = w * sub[:, None, :] + (1 - w) * sub[None, :, :] >= rvec - tol
                if pair.all(axis=2).any():
                    return True
        return False

    def directions():
        if k == 2:
            for i in range(resolution):
                phi = (i + 0.5) / resolution * (np.pi / 2)
                yield np.array([np.cos(phi), np.sin(phi)])
        else:
            steps = max(2, int(np.sqrt(resolution)))
            for a in range(1, steps + 1):
                for b in range(1, steps + 1):
                    v = np.array([a, b, steps]) / steps
                    yield v / np.linalg.norm(v)

    rows, certs = [], []
    total = sum(np.log2(s) for s in channel.alphabet_sizes)
    for u in directions():
        lo, hi = 0.0, float(total)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if member(mid * u):
                lo = mid
            else:
                hi = mid
        r = lo * u
        cert_id = ""
        if kind in ("union", "even-delay") and lo > tol:
            witness = union_contains(channel, r, budget=SearchBudget(budget), grid_denom=grid_denom)
            if witness is not None:
                cert_id = f"c{len(certs)}"
                certs.append(
                    {"id": cert_id, "kind": "witness", "point": r.tolist(),
                     "inputs": [m.probs.tolist() for m in witness.marginals]}
                )
        rows.append(
            {**{f"R{i + 1}": float(r[i]) for i in range(k)}, "member": 1, "certificate": cert_id}
        )
    return rows, certs


def task_region(cfg: dict, out_dir: Path, seed: int) -> dict:
    channel = parse_channel(_require(cfg, "channel", "config"))
    kind = cfg.get("kind", "single-polytope")
    resolution = int(cfg.get("resolution", 64))
    grid_denom = int(cfg.get("grid_denom", 8))
    budget = int(cfg.get("budget", 20000))
    rows, certs = emit_region_plot_data(channel, kind, resolution, grid_denom, budget)
    _write_csv(
        out_dir, "boundary.csv", rows,
        header_comment=f"boundary samples, kind={kind}; columns R1..RK, member, certificate",
    )
    _write_json(out_dir, "certificates.json", {"certificates": certs})

    queries = []
    for i, q in enumerate(cfg.get("queries", [])):
        r = np.array(q, dtype=np.float64)
        if kind == "even-delay":
            ok, cert = even_delay_region_contains(
                channel, r, budget=SearchBudget(budget), grid_denom=grid_denom
            )
            queries.append(
                {"point": r.tolist(), "member": bool(ok),
                 "certificate": None if cert is None else {
                     "weights": list(cert.weights),
                     "witnesses": [[m.probs.tolist() for m in w.marginals] for w in cert.witnesses],
                     "points": [p.tolist() for p in cert.points]}}
            )
        elif kind == "partly-async":
            ok, cert = partly_async_region_contains(
                channel, r, budget=SearchBudget(budget), grid_denom=min(grid_denom, 4)
            )
            queries.append(
                {"point": r.tolist(), "member": bool(ok),
                 "certificate": None if cert is None else {
                     "weights": list(cert.weights),
                     "witnesses": [[m.probs.tolist() for m in w.marginals] for w in cert.witnesses],
                     "points": [p.tolist() for p in cert.points]}}
            )
        else:
            witness = union_contains(channel, r, budget=SearchBudget(budget), grid_denom=grid_denom)
            queries.append(
                {"point": r.tolist(), "member": witness is not None,
                 "certificate": None if witness is None else
                 [m.probs.tolist() for m in witness.marginals]}
            )
    return {"kind": kind, "boundary_samples": len(rows), "queries": queries}


# ---------------------------------------------------------------------------
# simulate task
# ---------------------------------------------------------------------------

def task_simulate(cfg: dict, out_dir: Path, seed: int) -> dict:
    channel = parse_channel(_require(cfg, "channel", "config"))
    mode = cfg.get("mode", "single")
    n = int(_require(cfg, "n", "config"))
    trials = int(_require(cfg, "trials", "config"))
    big_l = int(cfg.get("L", 2 * channel.num_senders - 1))
    delta = float(_require(cfg, "delta", "config"))
    informed = bool(cfg.get("informed", False))
    params = TypicalityParams(delta=delta, informed=informed)
    bins = int(cfg.get("bins_per_sender", 4))
    enumerate_delays = bool(cfg.get("enumerate_delays", False))

    if mode == "single":
        p = parse_distribution(cfg.get("input", [0.5, 0.5]), "input")
        rate = float(_require(cfg, "rate", "config"))
        spec = CodebookSpec(n=n, rates=(rate,), schedules=(SymbolSchedule(p),))
        ds = parse_delay_system(cfg.get("delays", {"kind": "totally_async"}), 1)
        factory = single_sender_decoder_factory(channel, p, params)
        sim_channel = channel
    elif mode == "successive":
        inputs = parse_inputs(_require(cfg, "inputs", "config"), "inputs")
        rates = tuple(float(r) for r in _require(cfg, "rates", "config"))
        ordering = tuple(int(i) for i in cfg.get("ordering", range(channel.num_senders)))
        spec = CodebookSpec(
            n=n, rates=rates, schedules=tuple(SymbolSchedule(m) for m in inputs.marginals)
        )
        ds = parse_delay_system(
            cfg.get("delays", {"kind": "totally_async"}), channel.num_senders
        )
        factory = successive_decoder_factory(channel, inputs, ordering, params)
        sim_channel = channel
    elif mode == "interleaved":
        def point(c, path):
            return OperatingPoint(
                rates=tuple(float(r) for r in _require(c, "rates", path)),
                witness=parse_inputs(_require(c, "witness", path), f"{path}.witness"),
                ordering=tuple(int(i) for i in c.get("ordering", (0, 1))),
            )

        pe = point(_require(cfg, "point_even", "config"), "point_even")
        po = point(_require(cfg, "point_odd", "config"), "point_odd")
        cb, decode = interleaved_codec(channel, pe, po, n, params, seed)
        ds = parse_delay_system(cfg.get("delays", {"kind": "even_delays"}), 2)
        report = run_trials(
            cb, ds, channel, lambda _cb: decode, trials, big_l, seed,
            enumerate_delays=enumerate_delays, bins_per_sender=bins, config_echo=cfg,
        )
        _write_json(out_dir, "trialreport.json", json.loads(report.to_json()))
        _write_csv(out_dir, "cells.csv", report.csv_rows())
        return {"average_error": report.average_error, "maximal_error": report.maximal_error,
                "flags": report.flags}
    elif mode == "pipeline":
        inputs_a = parse_inputs(_require(cfg, "inputs_a", "config"), "inputs_a")
        inputs_b = parse_inputs(_require(cfg, "inputs_b", "config"), "inputs_b")
        r_a = [float(x) for x in _require(cfg, "point_a", "config")]
        r_b = [float(x) for x in _require(cfg, "point_b", "config")]
        alpha = float(cfg.get("alpha", 0.5))
        backoff = float(cfg.get("backoff", 1.0))
        plan = plan_partly_async_pipeline(channel, inputs_a, inputs_b, r_a, r_b, alpha, n, backoff)
        cb = generate_codebooks(plan.spec, seed)
        factory = partly_async_pipeline_decoder(plan, params)
        report = run_trials(
            cb, plan.delay_system, plan.lifted.channel, factory, trials,
            int(cfg.get("L", 4)), seed, enumerate_delays=enumerate_delays,
            bins_per_sender=bins, config_echo=cfg,
        )
        _write_json(out_dir, "trialreport.json", json.loads(report.to_json()))
        _write_csv(out_dir, "cells.csv", report.csv_rows())
        return {"average_error": report.average_error, "maximal_error": report.maximal_error,
                "rates": list(plan.rates), "alpha": plan.alpha, "flags": report.flags}
    else:
        raise ConfigError("mode", f"unknown simulate mode {mode!r}")

    report = run_trials(
        spec, ds, sim_channel, factory, trials, big_l, seed,
        enumerate_delays=enumerate_delays, bins_per_sender=bins, config_echo=cfg,
    )
    _write_json(out_dir, "trialreport.json", json.loads(report.to_json()))
    _write_csv(out_dir, "cells.csv", report.csv_rows())
    return {"average_error": report.average_error, "maximal_error": report.maximal_error,
            "flags": report.flags}


# ---------------------------------------------------------------------------
# split task
# ---------------------------------------------------------------------------

def task_split(cfg: dict, out_dir: Path, seed: int) -> dict:
    mode = cfg.get("mode", "distribution")
    if mode == "distribution":
        p = parse_distribution(_require(cfg, "input", "config"), "input")
        theta = float(_require(cfg, "theta", "config"))
        p_a, p_b = split_distribution(p, theta)
        result = {"theta": theta, "p_a": p_a.probs.tolist(), "p_b": p_b.probs.tolist()}
    elif mode == "two_sender":
        channel = parse_channel(_require(cfg, "channel", "config"))
        p = parse_distribution(_require(cfg, "p", "config"), "p")
        q = parse_distribution(_require(cfg, "q", "config"), "q")
        target = [float(x) for x in _require(cfg, "target", "config")]
        theta, (ra, rb), ordering, v = two_sender_split_point(channel, p, q, target)
        p_a, p_b = split_distribution(p, theta)
        result = {
            "theta": theta, "rates": [ra, rb], "ordering": list(ordering.pi),
            "vertex": v.tolist(), "p_a": p_a.probs.tolist(), "p_b": p_b.probs.tolist(),
        }
    elif mode == "edge":
        channel = parse_channel(_require(cfg, "channel", "config"))
        inputs = parse_inputs(_require(cfg, "inputs", "config"), "inputs")
        r = [float(x) for x in _require(cfg, "point", "config")]
        edge = tuple(int(i) for i in _require(cfg, "edge_type", "config"))
        lifted, lifted_inputs, ordering, v = split_for_edge(channel, inputs, r, edge)
        result = {
            "split_sender": lifted.split_sender,
            "ordering": list(ordering.pi),
            "vertex": v.tolist(),
            "inputs": [m.probs.tolist() for m in lifted_inputs.marginals],
        }
    else:
        raise ConfigError("mode", f"unknown split mode {mode!r}")
    _write_json(out_dir, "split.json", result)
    return result


# ---------------------------------------------------------------------------
# converse task
# ---------------------------------------------------------------------------

def task_converse(cfg: dict, out_dir: Path, seed: int) -> dict:
    channel = parse_channel(_require(cfg, "channel", "config"))
    k = channel.num_senders
    n = int(_require(cfg, "n", "config"))
    rates = tuple(float(r) for r in _require(cfg, "rates", "config"))
    schedules = tuple(
        parse_schedule(s, f"schedules[{i}]")
        for i, s in enumerate(_require(cfg, "schedules", "config"))
    )
    spec = CodebookSpec(n=n, rates=rates, schedules=schedules)
    cb = generate_codebooks(spec, seed)
    ds = parse_delay_system(cfg.get("delays", {"kind": "totally_async"}), k)
    report = bound_report(cb, ds, channel, p_e=cfg.get("p_e"))
    _write_json(out_dir, "bounds.json", json.loads(report.to_json()))
    _write_csv(out_dir, "bounds.csv", report.csv_rows())
    result = {
        "values": {"+".join(map(str, s)): v for s, v in report.values.items()},
        "epsilon": report.epsilon,
        "exact": report.exact,
    }
    if k == 2 and cfg.get("check_relative_form", False):
        rel = relative_delay_law(ds, n)
        diffs = {}
        from amacsim.converse import empirical_bound

        for s in subsets(2):
            joint_form, _ = empirical_bound(cb, ds, channel, s)
            rel_form = relative_delay_bound(cb, rel, channel, s)
            diffs["+".join(map(str, s))] = abs(joint_form - rel_form)
        result["relative_form_max_diff"] = max(diffs.values())
    return result


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

TASKS = {
    "region": task_region,
    "simulate": task_simulate,
    "split": task_split,
    "converse": task_converse,
}


def run(config: dict, out_dir: Path, seed_override: int | None = None) -> dict:
    task = _require(config, "task", "config")
    if task not in TASKS:
        raise ConfigError("task", f"unknown task {task!r}")
    if seed_override is not None:
        config = {**config, "seed": seed_override}
    if "seed" not in config:
        raise ConfigError("seed", "a seed is mandatory (no wall-clock defaults)")
    seed = int(config["seed"])
    out_dir.mkdir(parents=True, exist_ok=True)
    result = TASKS[task](config, out_dir, seed)
    payload = {
        "task": task,
        "seed": seed,
        "config": config,
        "config_hash": config_hash(config),
        "result": result,
    }
    _write_json(out_dir, "report.json", payload)
    return payload


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="amacsim",
        description="Asynchronous multiple-access channel regions and simulations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; results are independent of it")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        config["task"] = args.command
        run(config, Path(args.out), seed_override=args.seed)
    except (ConfigError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
