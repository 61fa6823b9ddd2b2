"""Command-line front end: scenario solving, mechanism design, dynamics
trajectories, figure-grid sweeps, price-of-anarchy probes, and the dynamic
information model.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  Errors
are emitted as one JSON object on stderr.  ``CRL_THREADS`` caps sweep
workers; output CSV files are byte-identical across runs for a fixed config
and seed.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import game, mechanisms, oracle, poa
from .config import ConfigError, load_config, scenario_from_config, set_by_path
from .content import ContentError
from .game import NoIncentive, ScenarioError, Stability
from .mechanisms import DynamicInfoParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DESIGNER_NAMES = ("none", "side", "restriction", "combined")


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message}}) + "\n")
    return code


def _design(s, name: str, eps_mech: float, debug: bool = False):
    if name == "none":
        rep = game.equilibrium_no_incentive(s)
        return mechanisms.DesignOutcome(
            NoIncentive(), rep.flow, "NoIncentive", rep.social_welfare, rep.participation_b
        )
    if name == "side":
        if isinstance(s.types, game.UniformContinuous):
            return mechanisms.design_continuous_side_payment(s)
        if isinstance(s.cost_model, game.LinearCost):
            return mechanisms.linear_cost_design(s, "side", eps_mech)
        if s.k == 3:
            return mechanisms.design_multipath_side_payment(s)[1]
        return mechanisms.design_side_payment(s, eps_mech)
    if name == "restriction":
        if isinstance(s.types, game.UniformContinuous):
            return mechanisms.design_continuous_content_restriction(s)
        if isinstance(s.cost_model, game.LinearCost):
            return mechanisms.linear_cost_design(s, "restriction", eps_mech)
        if s.k == 3:
            return mechanisms.design_multipath_content_restriction(s, eps_mech)
        return mechanisms.design_content_restriction(s, eps_mech)
    if name == "combined":
        return mechanisms.design_combined(s, eps_mech, debug=debug)
    raise ScenarioError(f"unknown designer {name!r}")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    s = scenario_from_config(cfg.get("scenario", {}))
    out = _out_dir(args)
    report = game.equilibrium_no_incentive(s)
    flow_star, sw_star = game.social_optimum(s)
    payload = {
        "equilibrium": {
            "flow": list(report.flow),
            "stability": report.stability.value,
            "participation_b": report.participation_b,
            "social_welfare": report.social_welfare,
            "per_type_payoffs": [
                {"theta": t, "payoffs": list(u)} for t, u in report.per_type_payoffs
            ],
        },
        "social_optimum": {"flow": list(flow_star), "welfare": sw_star},
    }
    (out / "solve.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    header = ",".join(
        [f"x{i + 1}" for i in range(s.k)] + ["social_welfare", "stability", "participation_b"]
    )
    (out / "equilibrium.csv").write_text(header + "\n" + report.csv_row() + "\n")
    print(f"equilibrium flow {report.flow} SW {report.social_welfare:.6g} ({report.stability.value})")
    print(f"social optimum {flow_star} SW* {sw_star:.6g}")
    return EXIT_OK


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    s = scenario_from_config(cfg.get("scenario", {}))
    out = _out_dir(args)
    names = [args.designer] if args.designer else list(cfg.get("designers", DESIGNER_NAMES))
    for name in names:
        outcome = _design(s, name, args.eps_mech, debug=args.debug_cases)
        path = out / f"design_{name}.json"
        path.write_text(json.dumps(outcome.to_json_dict(), indent=2, sort_keys=True) + "\n")
        print(f"{name}: {outcome.regime_label} target {outcome.target_flow} SW {outcome.predicted_sw:.6g}")
    return EXIT_OK


def cmd_dynamics(args) -> int:
    cfg = load_config(args.config)
    s = scenario_from_config(cfg.get("scenario", {}))
    out = _out_dir(args)
    dcfg_raw = cfg.get("dynamics", {})
    mode = dyn.Mode(dcfg_raw.get("mode", "pairwise"))
    dcfg = dyn.DynamicsConfig(
        switch_rate_mu=float(dcfg_raw.get("mu", 1.0)),
        step_dt=float(dcfg_raw.get("dt", 1e-3)),
        horizon=int(dcfg_raw.get("horizon", 10 ** 6)),
        convergence_eps=float(dcfg_raw.get("convergence_eps", 1e-8)),
        mode=mode,
    )
    name = args.designer or dcfg_raw.get("designer", "none")
    outcome = _design(s, name, args.eps_mech)
    x0 = dcfg_raw.get("x0")
    start = tuple(float(v) for v in x0) if x0 else outcome.target_flow
    traj = dyn.simulate_to_convergence(s, outcome.mechanism, start, dcfg)
    csv_text = traj.to_csv()
    if s.k == 3 and isinstance(outcome.mechanism, game.ContentRestriction):
        csv_text = _append_lyapunov_column(s, outcome, traj, csv_text)
    (out / "trajectory.csv").write_text(csv_text)
    print(f"dynamics from {start}: {traj.verdict.value} at {traj.final_flow}")
    return EXIT_OK


def _append_lyapunov_column(s, outcome, traj, csv_text: str) -> str:
    lines = csv_text.strip().split("\n")
    lines[0] += ",lyapunov"
    a_pair = outcome.mechanism.coefficients[:2]
    for i, (t, flow, _u) in enumerate(traj.samples):
        try:
            v = dyn.lyapunov_value(s, a_pair, flow, outcome.eps_mech or 1e-6)
            lines[i + 1] += f",{v!r}"
        except ScenarioError:
            lines[i + 1] += ","
    return "\n".join(lines) + "\n"


def _sweep_cell(payload):
    base, assignments, designers, eps_mech = payload
    cfg = copy.deepcopy(base)
    for path, value in assignments:
        set_by_path(cfg, path, value)
    row = {}
    try:
        s = scenario_from_config(cfg.get("scenario", {}))
        flow_star, sw_star = game.social_optimum(s)
        row["sw_opt"] = sw_star
        row["x_opt"] = flow_star[1]
        for name in designers:
            sw = _design(s, name, eps_mech).predicted_sw
            row[f"sw_{name}"] = sw
            row[f"ratio_{name}"] = sw / sw_star if sw_star > 0 else 1.0
        row["error"] = ""
    except Exception as exc:  # cell-level failure leaves the sweep running
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.get("sweep")
    if not spec:
        raise ConfigError("missing 'sweep' section")
    axes = spec.get("axes", [])
    if not 1 <= len(axes) <= 3:
        raise ConfigError("sweep needs between 1 and 3 axes")
    grids = []
    for ax in axes:
        path = ax.get("path") or ""
        if "values" in ax:
            values = [float(v) for v in ax["values"]]
        else:
            values = [
                float(v)
                for v in np.linspace(float(ax["start"]), float(ax["stop"]), int(ax["steps"]))
            ]
        if not path:
            raise ConfigError("sweep axis needs a parameter path")
        grids.append((path, values))
    total = 1
    for _, values in grids:
        total *= len(values)
    if total > 10 ** 7:
        raise ConfigError(f"sweep too large: {total} cells")
    designers = [d for d in spec.get("designers", DESIGNER_NAMES)]
    for d in designers:
        if d not in DESIGNER_NAMES:
            raise ConfigError(f"unknown designer {d!r} in sweep")

    cells = []
    indices = [0] * len(grids)
    # Row-major over axes: the last axis varies fastest.
    def rec(depth, chosen):
        if depth == len(grids):
            cells.append(list(chosen))
            return
        path, values = grids[depth]
        for v in values:
            rec(depth + 1, chosen + [(path, v)])

    rec(0, [])
    payloads = [(cfg, cell, designers, args.eps_mech) for cell in cells]
    workers = int(os.environ.get("CRL_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, payloads, chunksize=16))
    else:
        rows = [_sweep_cell(p) for p in payloads]

    out = _out_dir(args)
    target = Path(spec.get("output", out / "sweep.csv"))
    if not target.is_absolute():
        target = out / target
    axis_names = [path for path, _ in grids]
    value_cols = ["sw_opt", "x_opt"]
    for name in designers:
        value_cols += [f"sw_{name}", f"ratio_{name}"]
    header = axis_names + value_cols + ["error"]
    lines = [",".join(header)]
    for cell, row in zip(cells, rows):
        fields = [repr(v) for _, v in cell]
        for col in value_cols:
            fields.append(repr(row[col]) if col in row else "")
        fields.append(row.get("error", ""))
        lines.append(",".join(fields))
    target.write_text("\n".join(lines) + "\n")
    failures = sum(1 for r in rows if r.get("error"))
    print(f"sweep wrote {len(rows)} rows to {target} ({failures} failed cells)")
    return EXIT_OK


def cmd_poa_probe(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.get("probe", {})
    family = spec.get("family", "mixed")
    designer = spec.get("designer", "combined")
    n = int(spec.get("n_samples", 100))
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    bound = spec.get("bound")
    report = poa.poa_search(
        family, designer, n, seed, float(bound) if bound is not None else None
    )
    out = _out_dir(args)
    (out / "poa_probe.json").write_text(report.to_json() + "\n")
    print(
        f"probe {family}/{designer}: min ratio {report.min_ratio:.4f} over {report.samples} samples"
        + (f", {report.violations} violations of {bound}" if bound is not None else "")
    )
    return EXIT_OK


def cmd_dynamic_model(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.get("dynamic_model")
    if not spec:
        raise ConfigError("missing 'dynamic_model' section")
    try:
        params = DynamicInfoParams(
            float(spec["N"]),
            float(spec["n"]),
            float(spec["phi"]),
            float(spec["gamma"]),
            float(spec.get("c_H", 0.0)),
        )
    except (KeyError, ValueError, ContentError) as exc:
        raise ConfigError(f"invalid dynamic_model: {exc}")
    out = _out_dir(args)
    points = int(spec.get("table_points", 51))
    from .content import dynamic_stationary

    lines = ["x_H,q_H_inf,q_L_inf,sw_inf"]
    state = params.state()
    for x in np.linspace(0.0, 0.5, points):
        q_h, q_l = dynamic_stationary(state, float(x))
        sw = 0.5 * (q_h + q_l) - float(x) * params.c_h
        lines.append(",".join(repr(v) for v in (float(x), q_h, q_l, sw)))
    (out / "stationary_table.csv").write_text("\n".join(lines) + "\n")
    x_opt, sw_opt = mechanisms.dynamic_stationary_optimum(params)
    outcome = mechanisms.design_dynamic_content_restriction(params)
    payload = {
        "no_incentive": dict(zip(("x", "sw"), mechanisms.dynamic_no_incentive(params))),
        "stationary_optimum": {"x": x_opt, "sw": sw_opt},
        "restriction_design": outcome.to_json_dict(),
    }
    (out / "dynamic_model.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"dynamic model: optimum x {x_opt:.4f} SW {sw_opt:.4f}; design {outcome.regime_label}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("solve", cmd_solve),
        ("design", cmd_design),
        ("dynamics", cmd_dynamics),
        ("sweep", cmd_sweep),
        ("poa-probe", cmd_poa_probe),
        ("dynamic-model", cmd_dynamic_model),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--designer", choices=DESIGNER_NAMES, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--eps-mech", type=float, default=mechanisms.EPS_MECH)
        p.add_argument("--grid-step", type=float, default=1e-4)
        p.add_argument("--debug-cases", action="store_true")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ContentError, ScenarioError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except Exception as exc:
        return _fail("numerical", f"{type(exc).__name__}: {exc}", EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
