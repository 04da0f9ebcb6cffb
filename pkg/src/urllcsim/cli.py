"""Command-line front end: analytic curves, simulation points, grid sweeps.

Subcommands: analytic, simulate, sweep, layout. Every run writes a manifest
into the output directory before any computation starts and finalizes it on
completion, so partial outputs are always attributable.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytics, montecarlo
from .channel import tx_psd_for_average_snr
from .config import ConfigurationError, ScenarioConfig, load_scenario, scenario_from_dict
from .geometry import build_layout, layout_to_csv
from .montecarlo import SWEEP_COLUMNS, TrialPlan, sweep_result_row

PROTOCOL_ALIASES = {
    "orth": "orth_occupy_cows",
    "occupy": "occupy_cow",
    "comp": "comp_occupy_cow",
    "orth_occupy_cows": "orth_occupy_cows",
    "occupy_cow": "occupy_cow",
    "comp_occupy_cow": "comp_occupy_cow",
    "ic_ic": "ic_ic",
    "ic_ia": "ic_ia",
}


class UsageError(Exception):
    pass


def parse_si(text: str) -> float:
    """Parse a number with optional k/M/G suffix (Hz convenience)."""
    text = text.strip()
    scale = 1.0
    if text and text[-1] in "kMG":
        scale = {"k": 1e3, "M": 1e6, "G": 1e9}[text[-1]]
        text = text[:-1]
    try:
        return float(text) * scale
    except ValueError as exc:
        raise UsageError(f"cannot parse numeric value {text!r}") from exc


def parse_range(spec: str) -> list[float]:
    """'a:b:c' inclusive range, or comma-separated list; SI suffixes allowed."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {spec!r}")
        start, stop, step = (parse_si(p) for p in parts)
        if step <= 0:
            raise UsageError("range step must be > 0")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return [parse_si(p) for p in spec.split(",") if p.strip()]


def normalize_protocol(name: str) -> str:
    try:
        return PROTOCOL_ALIASES[name]
    except KeyError:
        raise UsageError(
            f"unknown protocol {name!r}; choose from {sorted(set(PROTOCOL_ALIASES))}"
        ) from None


def load_preset(name: str) -> dict:
    path = Path(name)
    if path.exists():
        return json.loads(path.read_text())
    ref = resources.files("urllcsim").joinpath(f"presets/{name}.json")
    if not ref.is_file():
        raise UsageError(f"no preset named {name!r} (and no such file)")
    return json.loads(ref.read_text())


# ---------------------------------------------------------------------------
# Output plumbing.


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(path: Path, columns, rows: list[dict]):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row[c]) for c in columns) + "\n")


class RunManifest:
    """Start/finish record tying every output file to one invocation."""

    def __init__(self, out_dir: Path, args_echo: list[str], seed: int, scenario=None):
        self.path = out_dir / "manifest.json"
        self.data = {
            "command_line": args_echo,
            "master_seed": seed,
            "scenario": dataclasses.asdict(scenario) if scenario else None,
            "scenario_hash": scenario_hash(scenario) if scenario else None,
            "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "finished_utc": None,
            "status": "running",
            "outputs": [],
        }
        self.write()

    def write(self):
        self.path.write_text(json.dumps(self.data, indent=2) + "\n")

    def finalize(self, status: str, outputs: list[str]):
        self.data["status"] = status
        self.data["outputs"] = outputs
        self.data["finished_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.write()


def scenario_hash(scenario: ScenarioConfig | None) -> str | None:
    if scenario is None:
        return None
    blob = json.dumps(dataclasses.asdict(scenario), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_analytic(args) -> int:
    if args.preset:
        preset = load_preset(args.preset)
        if preset.get("command") != "analytic":
            raise UsageError(f"preset {args.preset!r} is not an analytic preset")
        series = preset["series"]
        snr_values = (
            parse_range(preset["snr_db"])
            if isinstance(preset["snr_db"], str)
            else [float(x) for x in preset["snr_db"]]
        )
        target = float(preset["target_pf"])
        kfactor = float(preset.get("kfactor_db", 4.7))
        convention = preset.get("convention", "rician")
    else:
        if args.protocol is None or args.snr is None:
            raise UsageError("analytic needs --protocol and --snr (or --preset)")
        series = [
            {
                "protocol": args.protocol,
                "C": args.num_cells,
                "K": args.actuators,
                "b": args.bits,
                "T": args.cycle_time,
            }
        ]
        snr_values = parse_range(args.snr)
        target = args.target
        kfactor = args.kfactor_db
        convention = args.convention
    if not snr_values:
        raise UsageError("empty SNR grid")
    if not (0.0 < target < 1.0):
        raise UsageError("--target must lie strictly inside (0, 1)")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(out_dir, sys.argv[1:], args.seed)

    rows = []
    status = "complete"
    for entry in series:
        protocol = normalize_protocol(entry["protocol"])
        if protocol not in analytics.ANALYTIC_PROTOCOLS:
            raise UsageError(
                f"no closed form exists for {protocol}; analytic mode supports "
                + ", ".join(sorted(PROTOCOL_ALIASES[p] for p in ("orth", "occupy", "comp")))
                + " (use `simulate` or `sweep` for the SIC protocols)"
            )
        solutions = []
        for snr_db in snr_values:
            sol = analytics.required_bandwidth(
                protocol,
                target,
                snr_db,
                num_cells=int(entry["C"]),
                actuators_per_cell=int(entry.get("K", 30)),
                message_bits=int(entry.get("b", 160)),
                cycle_time=float(entry.get("T", 1e-3)),
                rician_k_factor_db=kfactor,
                convention=convention,
            )
            if sol.unreachable:
                status = "partial"
            solutions.append(sol)
        rows.extend(
            analytics.tradeoff_csv_rows(
                solutions,
                num_cells=int(entry["C"]),
                actuators_per_cell=int(entry.get("K", 30)),
                message_bits=int(entry.get("b", 160)),
                cycle_time=float(entry.get("T", 1e-3)),
                rician_k_factor_db=kfactor,
            )
        )
    out_path = out_dir / "tradeoff.csv"
    write_csv(out_path, analytics.TRADEOFF_COLUMNS, rows)
    manifest.finalize(status, [out_path.name])
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0 if status == "complete" else 1


def _scenario_from_args(args) -> ScenarioConfig:
    if args.scenario is None:
        raise UsageError("a --scenario file is required")
    if not Path(args.scenario).exists():
        raise UsageError(f"scenario file not found: {args.scenario}")
    scenario = load_scenario(args.scenario)
    snr = getattr(args, "snr", None)
    if snr is not None:
        scenario = scenario.replace(
            tx_psd_dbm_hz=tx_psd_for_average_snr(snr, scenario.noise_psd_dbm_hz)
        )
    bandwidth = getattr(args, "bandwidth", None)
    if bandwidth is not None:
        scenario = scenario.replace(bandwidth=parse_si(bandwidth))
    return scenario


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(out_dir, sys.argv[1:], args.seed, scenario)
    plan = TrialPlan(
        scenario=scenario,
        protocol=normalize_protocol(args.protocol),
        max_trials=args.trials,
        master_seed=args.seed,
        max_failures=args.max_failures,
        redraw_layout_each_trial=not args.fixed_layout,
        iid_gains=args.iid_gains,
        treat_interference_as_noise=args.treat_interference_as_noise,
    )
    result = montecarlo.estimate_pf(plan, workers=args.threads)
    out_path = out_dir / "results.csv"
    write_csv(out_path, SWEEP_COLUMNS, [sweep_result_row(result)])
    manifest.finalize("complete", [out_path.name])
    print(
        f"pf = {result.pf_estimate:.6g} "
        f"[{result.ci_low:.6g}, {result.ci_high:.6g}] "
        f"({result.failures}/{result.trials} trials); wrote {out_path}"
    )
    return 0


def _run_sweep_spec(scenario, spec: dict, master_seed: int, threads: int):
    """One sweep block: either pf estimation or required-bandwidth search."""
    protocols = [normalize_protocol(p) for p in spec["protocols"]]
    grid = {
        key: (parse_range(v) if isinstance(v, str) else [float(x) for x in v])
        for key, v in spec.get("grid", {}).items()
    }
    mode = spec.get("mode", "pf")
    if mode == "pf":
        results = montecarlo.sweep(
            scenario,
            protocols,
            grid,
            max_trials=int(spec.get("trials", 10000)),
            master_seed=master_seed,
            workers=threads,
            max_failures=spec.get("max_failures"),
            treat_interference_as_noise=bool(
                spec.get("treat_interference_as_noise", False)
            ),
            iid_gains=bool(spec.get("iid_gains", False)),
        )
        return "pf", [sweep_result_row(r) for r in results], "complete"
    if mode != "required_bandwidth":
        raise UsageError(f"unknown sweep mode {mode!r}")

    target = float(spec["target_pf"])
    snr_values = grid.get("snr_db", [None])
    c_values = [int(c) for c in grid.get("C", [scenario.num_cells])]
    bracket = tuple(spec.get("w_bracket_hz", (1e6, 1e9)))
    rows = []
    status = "complete"
    index = 0
    for protocol in protocols:
        for c in c_values:
            for snr_db in snr_values:
                point_scenario = scenario.replace(num_cells=c)
                if snr_db is not None:
                    point_scenario = point_scenario.replace(
                        tx_psd_dbm_hz=tx_psd_for_average_snr(
                            snr_db, scenario.noise_psd_dbm_hz
                        )
                    )
                res = montecarlo.required_bandwidth_mc(
                    point_scenario,
                    protocol,
                    target,
                    master_seed=montecarlo.derive_seed(master_seed, index, namespace=2),
                    w_bracket_hz=bracket,
                    rel_tol=float(spec.get("rel_tol", 0.05)),
                    trials_cap=int(spec.get("trials_cap", 20000)),
                    workers=threads,
                )
                if res.status != "ok":
                    status = "partial"
                rows.append(
                    {
                        "protocol": protocol,
                        "snr_db": snr_db if snr_db is not None else float("nan"),
                        "target_pf": target,
                        "required_bw_hz": res.bandwidth_hz,
                        "C": c,
                        "K": scenario.actuators_per_cell,
                        "b_bits": scenario.message_bits,
                        "T_s": scenario.cycle_time,
                        "kfactor_db": scenario.rician_k_factor_db,
                    }
                )
                index += 1
    return "required_bandwidth", rows, status


def cmd_sweep(args) -> int:
    if args.preset:
        preset = load_preset(args.preset)
        if preset.get("command") != "sweep":
            raise UsageError(f"preset {args.preset!r} is not a sweep preset")
        scenario = scenario_from_dict(preset["scenario"])
        sweeps = preset["sweeps"]
    else:
        scenario = _scenario_from_args(args)
        if not args.protocols:
            raise UsageError("sweep needs --protocols (or --preset)")
        grid = {}
        for item in args.grid or []:
            if "=" not in item:
                raise UsageError(f"--grid entries look like key=spec, got {item!r}")
            key, spec = item.split("=", 1)
            if key not in montecarlo.GRID_KEYS:
                raise UsageError(
                    f"unknown grid key {key!r}; valid: {montecarlo.GRID_KEYS}"
                )
            grid[key] = spec
        if not grid:
            raise UsageError("sweep needs a non-empty --grid")
        sweeps = [
            {
                "protocols": args.protocols.split(","),
                "grid": grid,
                "trials": args.trials,
                "max_failures": args.max_failures,
                "treat_interference_as_noise": args.treat_interference_as_noise,
                "iid_gains": args.iid_gains,
                "mode": "required_bandwidth" if args.target_pf else "pf",
                **({"target_pf": args.target_pf} if args.target_pf else {}),
            }
        ]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(out_dir, sys.argv[1:], args.seed, scenario)

    pf_rows, bw_rows = [], []
    status = "complete"
    for i, spec in enumerate(sweeps):
        kind, rows, spec_status = _run_sweep_spec(
            scenario, spec, montecarlo.derive_seed(args.seed, i, namespace=3), args.threads
        )
        if spec_status != "complete":
            status = "partial"
        (pf_rows if kind == "pf" else bw_rows).append(rows)

    outputs = []
    if pf_rows:
        path = out_dir / "results.csv"
        write_csv(path, SWEEP_COLUMNS, [r for rows in pf_rows for r in rows])
        outputs.append(path.name)
    if bw_rows:
        path = out_dir / "tradeoff.csv"
        write_csv(path, analytics.TRADEOFF_COLUMNS, [r for rows in bw_rows for r in rows])
        outputs.append(path.name)
    manifest.finalize(status, outputs)
    print(f"wrote {', '.join(str(out_dir / o) for o in outputs)}")
    return 0 if status == "complete" else 1


def cmd_layout(args) -> int:
    scenario = _scenario_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(out_dir, sys.argv[1:], args.seed, scenario)
    layout = build_layout(scenario, montecarlo.trial_rng(args.seed, 0))
    out_path = out_dir / "layout.csv"
    out_path.write_text(layout_to_csv(layout))
    manifest.finalize("complete", [out_path.name])
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# Parser.


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--scenario", default=None, help="scenario JSON file")

    parser = argparse.ArgumentParser(
        prog="urllcsim",
        description="Multi-cell two-hop URLLC downlink simulator and calculator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", parents=[common], help="closed-form bandwidth/SNR tradeoff")
    p.add_argument("--protocol", help="orth | occupy | comp")
    p.add_argument("--target", type=float, default=1e-9, help="target failure probability")
    p.add_argument("--snr", help="SNR grid in dB, start:stop:step or comma list")
    p.add_argument("--C", dest="num_cells", type=int, default=1)
    p.add_argument("--K", dest="actuators", type=int, default=30)
    p.add_argument("--b", dest="bits", type=int, default=160)
    p.add_argument("--T", dest="cycle_time", type=float, default=1e-3)
    p.add_argument("--kfactor-db", type=float, default=4.7)
    p.add_argument("--convention", choices=analytics.MARCUM_CONVENTIONS, default="rician")
    p.add_argument("--preset", help="bundled preset name or JSON path")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of one point")
    p.add_argument("--protocol", required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--snr", type=float, default=None, help="average link SNR in dB")
    p.add_argument("--W", dest="bandwidth", default=None, help="bandwidth override (SI ok)")
    p.add_argument("--max-failures", type=int, default=None)
    p.add_argument("--iid-gains", action="store_true")
    p.add_argument("--treat-interference-as-noise", action="store_true")
    p.add_argument("--fixed-layout", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="grid of Monte Carlo points")
    p.add_argument("--protocols", help="comma list")
    p.add_argument("--grid", action="append", help="key=spec, keys: snr_db W C D")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--max-failures", type=int, default=None)
    p.add_argument("--target-pf", type=float, default=None,
                   help="switch to required-bandwidth search at this target")
    p.add_argument("--iid-gains", action="store_true")
    p.add_argument("--treat-interference-as-noise", action="store_true")
    p.add_argument("--preset", help="bundled preset name or JSON path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("layout", parents=[common], help="export node positions CSV")
    p.set_defaults(func=cmd_layout)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        parser.exit(2, f"error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
