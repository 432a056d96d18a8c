"""Command-line interface.

Exit codes: 0 success, 1 invalid parameters, 2 partial results (some
points failed), 3 I/O failure.  Values are resolved as command-line flag,
then ``--config`` file, then built-in default.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import cutbound, density, hierarchy, infrastructure, regimes, sncp, sweep
from .errors import InvalidParameterError, NoStripFound, SncpError
from .params import ModelParams
from .report import emit_report, fmt_num, to_jsonable

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "n": 1e4, "gamma": 0.25, "nu": 0.3, "delta": 2.5, "alpha": 4.0, "power": 1.0, "mu": 0.5,
    "seed": 0, "out": None, "topology": None,
    "replicas": 1, "grid_resolution": None,
    "map": False, "alpha_range": "2,6", "gamma_range": "0,1", "steps": 41,
    "squarelet_edge": None, "g": 0.1, "c_delta": 1.0, "axis": None, "shrink_retries": 0,
    "kind": "auto", "R": 1.0, "phi0": None,
    "area_samples": 100_000,
    "quantity": "cut-upper-bound", "n_values": "4096,8192,16384,32768,65536,131072", "workers": 1,
}
MODEL_KEYS = ("n", "gamma", "nu", "delta", "alpha", "power", "mu", "seed")


class UsageError(Exception):
    pass


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line: {raw.strip()!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.lstrip("-").replace("-", "_")] = v
    return out


def _coerce(key, value):
    if value is None or key not in DEFAULTS or isinstance(value, bool):
        return value
    default = DEFAULTS[key]
    if isinstance(value, str):
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if key == "seed" or isinstance(default, int):
            return int(float(value)) if key != "seed" else int(value)
        if isinstance(default, float) or key in ("grid_resolution", "squarelet_edge", "phi0"):
            return float(value)
    return value


def resolve(args: argparse.Namespace) -> dict:
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            merged[key] = flag
        elif key in cfg:
            merged[key] = _coerce(key, cfg[key])
        else:
            merged[key] = default
    return merged


def model_params(opts: dict) -> ModelParams:
    return ModelParams(**{k: opts[k] for k in MODEL_KEYS})


def _pair(text: str):
    a, b = (float(x) for x in str(text).split(","))
    return a, b


def _n_values(text: str) -> list:
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        base = lambda s: int(s.split("^")[1]) if "^" in s else int(math.log2(float(s)))
        return [2.0**e for e in range(base(lo), base(hi) + 1)]
    return [float(x) for x in text.split(",")]


def _write(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _topology(opts, params):
    if opts["topology"]:
        with open(opts["topology"], encoding="utf-8") as fh:
            return sncp.read_topology(fh, alpha=params.alpha, power=params.power, mu=params.mu)
    return sncp.sample_topology(params, sncp.as_stream(params.seed))


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(opts):
    params = model_params(opts)
    _write(sncp.dumps_topology(_topology(opts, params)), opts["out"])
    return EXIT_OK


def cmd_intensity(opts):
    params = model_params(opts)
    if opts["topology"]:
        topo = _topology(opts, params)
        res = opts["grid_resolution"] or density.default_grid_resolution(topo.params)
        rep = density.lemma1_report(topo.params, [density.intensity_extrema(topo, res)], res)
    else:
        rep = density.verify_lemma1(params, int(opts["replicas"]), opts["grid_resolution"])
    _write(_json({"params": params.as_dict(), "report": rep}), opts["out"])
    return EXIT_OK


def cmd_classify(opts):
    params = model_params(opts)
    if opts["map"]:
        grid = regimes.regime_map(_pair(opts["alpha_range"]), _pair(opts["gamma_range"]),
                                  int(opts["steps"]), params.nu, params.delta)
        _write(regimes.regime_map_csv(grid), opts["out"])
        return EXIT_OK
    rep = regimes.scaling_exponent(params.alpha, params.gamma, params.delta, params.nu)
    _write(_json(rep), opts["out"])
    return EXIT_OK


def cmd_cutbound(opts):
    params = model_params(opts)
    topo = _topology(opts, params)
    try:
        res = cutbound.capacity_upper_bound(
            topo, topo.params, c_delta=opts["c_delta"], clearance_g=opts["g"], axis=opts["axis"],
            squarelet_edge=opts["squarelet_edge"], shrink_retries=int(opts["shrink_retries"]))
    except NoStripFound as exc:
        _write(_json({"params": params.as_dict(), "error": str(exc), "best": exc.best,
                      "offending": exc.offending}), opts["out"])
        return EXIT_PARTIAL
    _write(_json({"params": params.as_dict(), "result": res}), opts["out"])
    return EXIT_OK


def _cells_csv(load: np.ndarray) -> str:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in load)


def cmd_infra(opts):
    params = model_params(opts)
    topo = _topology(opts, params)
    stream = sncp.as_stream(params.seed)
    report = regimes.scaling_exponent(params.alpha, params.gamma, params.delta, params.nu)
    kind = opts["kind"]
    phi_inf = infrastructure.measured_phi_inf(topo) if topo.n_nodes and opts["phi0"] is None else None
    if kind == "auto":
        kind = infrastructure.choose_transport_plan(params, report).infrastructure_kind
    infra = infrastructure.build_infrastructure(topo, kind, sncp.substream(stream, 4), R=opts["R"],
                                                phi0=opts["phi0"], phi_inf=phi_inf)
    plan = infrastructure.choose_transport_plan(
        params, report, phi_inf=phi_inf, phi0=infra.target_intensity if kind == "sparse" else None)
    flows = infrastructure.assign_flows(topo, sncp.substream(stream, 5))
    loads = infrastructure.route_cells(plan, topo, flows)
    done = infrastructure.estimate_throughput(plan, topo, infra, loads, params)
    summary = {"params": params.as_dict(), "plan": plan, "loads": done,
               "infrastructure": {"kind": infra.kind, "size": infra.size,
                                  "target_intensity": infra.target_intensity,
                                  "measured_phi_inf": infra.measured_phi_inf,
                                  "requested_intensity": infra.requested_intensity,
                                  "core_radius": infra.core_radius, "flags": infra.flags}}
    prefix = opts["out"]
    if prefix is None:
        _write(_json(summary), None)
    else:
        _write(_json(summary), f"{prefix}.json")
        _write(_cells_csv(done.per_cell_load), f"{prefix}_cells.csv")
    return EXIT_OK


def cmd_hierarchy(opts):
    params = model_params(opts)
    topo = _topology(opts, params)
    h = hierarchy.build_hierarchy(topo, topo.params, sncp.substream(sncp.as_stream(params.seed), 6),
                                  area_samples=int(opts["area_samples"]))
    check = hierarchy.bottleneck_check(h, topo.params)
    rows = [dict(zip(("k", "d_k", "lambda_k", "J_k", "max_centres", "min_area", "max_area"), r))
            for r in h.layer_table()]
    table = emit_report(rows, "csv", params=params)
    comps = {"params": params.as_dict(),
             "layers": [{"k": l.k, "components": [c.to_dict() for c in l.components]} for l in h.layers]}
    summary = {"params": params.as_dict(), "k_max": h.k_max, "mu": h.mu, "flags": h.flags,
               "bottleneck": check.to_dict(), "passed": check.passed}
    prefix = opts["out"]
    if prefix is None:
        _write(table, None)
        _write(_json(summary), None)
    else:
        _write(table, f"{prefix}_layers.csv")
        _write(_json(comps), f"{prefix}_components.json")
        _write(_json(summary), f"{prefix}_summary.json")
    return EXIT_OK


def cmd_sweep(opts):
    params = model_params(opts)
    spec = sweep.SweepSpec(params, _n_values(opts["n_values"]), int(opts["replicas"]), opts["quantity"],
                           opts["out"], {"R": opts["R"], "g": opts["g"], "c_delta": opts["c_delta"]})
    prefix = opts["out"]
    fh = open(f"{prefix}.csv", "w", encoding="utf-8") if prefix else sys.stdout
    try:
        for k in ("n", "gamma", "nu", "delta", "alpha", "power", "mu", "seed"):
            fh.write(f"# {k}={fmt_num(getattr(params, k))}\n")
        fh.write(f"# quantity={spec.quantity}\nn,replica,value,reason\n")

        def on_row(row):
            fh.write(f"{fmt_num(row.n)},{row.replica},{fmt_num(row.value)},{row.reason}\n")
            fh.flush()

        rows = sweep.run_sweep(spec, on_row, workers=int(opts["workers"]))
    finally:
        if prefix:
            fh.close()
    try:
        fit = sweep.fit_exponent(rows, sweep.predicted_exponent(params)).to_dict()
    except SncpError as exc:
        fit = {"error": str(exc)}
    _write(_json({"params": params.as_dict(), "quantity": spec.quantity, "fit": fit}),
           f"{prefix}_fit.json" if prefix else None)
    return EXIT_PARTIAL if any(r.value is None for r in rows) else EXIT_OK


COMMANDS = {
    "generate": cmd_generate, "intensity": cmd_intensity, "classify": cmd_classify,
    "cutbound": cmd_cutbound, "infra": cmd_infra, "hierarchy": cmd_hierarchy, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file, or file prefix for multi-file commands")
    common.add_argument("--config", help="key = value file; command-line flags win")
    for k in ("n", "gamma", "nu", "delta", "alpha", "power", "mu"):
        common.add_argument(f"--{k}", type=float)
    common.add_argument("--topology", help="read a topology file instead of sampling")

    parser = argparse.ArgumentParser(prog="sncpnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="sample a topology")

    p = sub.add_parser("intensity", parents=[common], help="intensity extrema and fitted constants")
    p.add_argument("--replicas", type=int)
    p.add_argument("--grid-resolution", type=float)

    p = sub.add_parser("classify", parents=[common], help="scaling exponent and regime")
    p.add_argument("--map", action="store_true", default=None, help="emit a regime map CSV")
    p.add_argument("--alpha-range")
    p.add_argument("--gamma-range")
    p.add_argument("--steps", type=int)

    p = sub.add_parser("cutbound", parents=[common], help="cut-set power-transfer bound")
    p.add_argument("--squarelet-edge", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--c-delta", type=float)
    p.add_argument("--axis", choices=cutbound.AXES)
    p.add_argument("--shrink-retries", type=int)

    p = sub.add_parser("infra", parents=[common], help="infrastructure, routing and throughput")
    p.add_argument("--kind", choices=("auto", "dense", "clusters-core", "sparse"))
    p.add_argument("--R", type=float)
    p.add_argument("--phi0", type=float)

    p = sub.add_parser("hierarchy", parents=[common], help="nested-domain hierarchy")
    p.add_argument("--area-samples", type=int)

    p = sub.add_parser("sweep", parents=[common], help="sweep n and fit the exponent")
    p.add_argument("--quantity", choices=sweep.QUANTITIES)
    p.add_argument("--n-values", help="comma list or range such as 2^12..2^17")
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--c-delta", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (InvalidParameterError, UsageError, ValueError) as exc:
        print(f"sncpnet: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"sncpnet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SncpError as exc:
        print(f"sncpnet: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
