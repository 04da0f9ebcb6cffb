"""Monte Carlo trial engine: reproducible, parallel, CI-aware.

Every trial owns a counter-based random stream derived from
(master_seed, trial_index), so results are bit-identical no matter how trials
are batched across workers or in what order they complete. Early stopping is
applied in trial-index order over fixed-size blocks, which keeps the stopped
trial count worker-independent too.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    average_link_snr_db,
    draw_channels,
    draw_iid_channels,
)
from .config import ConfigurationError, ScenarioConfig
from .geometry import build_layout
from .protocols import ProtocolParams, run_protocol

_BLOCK = 1024
_LAYOUT_STREAM = 2**62  # reserved trial index for the shared fixed layout


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based stream for one trial: disjoint 2^128-draw Philox block."""
    bitgen = np.random.Philox(key=master_seed & (2**128 - 1))
    bitgen = bitgen.advance(trial_index * 2**128)
    return np.random.Generator(bitgen)


def derive_seed(master_seed: int, index: int, namespace: int = 0) -> int:
    """Deterministic 64-bit child seed for grid points and searches."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(namespace, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def wilson_interval(failures: int, trials: int, z: float = 1.959964) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = failures / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class TrialPlan:
    scenario: ScenarioConfig
    protocol: str
    max_trials: int
    master_seed: int
    max_failures: int | None = None
    redraw_layout_each_trial: bool = True
    iid_gains: bool = False
    treat_interference_as_noise: bool = False

    def __post_init__(self):
        if self.max_trials < 1:
            raise ConfigurationError("max_trials must be >= 1")
        if self.treat_interference_as_noise and self.protocol != "occupy_cow":
            raise ConfigurationError(
                "treat_interference_as_noise is only defined for occupy_cow"
            )
        if self.iid_gains and self.protocol in ("ic_ic", "ic_ia"):
            raise ConfigurationError(
                "iid_gains validation mode is defined for the benchmark "
                "protocols only (no closed form exists for SIC protocols)"
            )

    def protocol_params(self) -> ProtocolParams:
        s = self.scenario
        return ProtocolParams(
            rate_bps=s.rate_bps,
            bandwidth_hz=s.bandwidth,
            num_cells=s.num_cells,
            snr_linear=s.snr_linear,
            protocol=self.protocol,
            treat_interference_as_noise=self.treat_interference_as_noise,
        )


@dataclass
class SweepResult:
    protocol: str
    num_cells: int
    actuators_per_cell: int
    bandwidth_hz: float
    snr_db: float
    cell_separation_m: float
    trials: int
    failures: int
    pf_estimate: float
    ci_low: float
    ci_high: float
    seed: int
    wall_time_s: float
    per_actuator_failures: np.ndarray | None = field(default=None, repr=False)


SWEEP_COLUMNS = (
    "protocol",
    "C",
    "K",
    "W_hz",
    "snr_db",
    "D_m",
    "trials",
    "failures",
    "pf",
    "ci_low",
    "ci_high",
    "seed",
    "wall_s",
)


def sweep_result_row(r: SweepResult) -> dict:
    return {
        "protocol": r.protocol,
        "C": r.num_cells,
        "K": r.actuators_per_cell,
        "W_hz": r.bandwidth_hz,
        "snr_db": r.snr_db,
        "D_m": r.cell_separation_m,
        "trials": r.trials,
        "failures": r.failures,
        "pf": r.pf_estimate,
        "ci_low": r.ci_low,
        "ci_high": r.ci_high,
        "seed": r.seed,
        "wall_s": r.wall_time_s,
    }


# ---------------------------------------------------------------------------
# Per-trial evaluation.


def _iid_link_model_failures(plan: TrialPlan, channels) -> np.ndarray:
    """Per-actuator failure under the analysis's link-outage diversity model.

    The closed forms treat every (receiver, transmitter) pair as one binary
    link that is in outage iff it cannot alone carry the per-band spectral
    efficiency, and model simultaneous transmissions by requiring every
    involved link to fail. This evaluator mirrors that model exactly (it is
    what the closed forms describe), so the validation-mode estimates are
    comparable to them; the distance-mode runners instead add received powers.
    """
    s = plan.scenario
    params = plan.protocol_params()
    gamma = params.per_band_threshold / s.snr_linear  # per-link power threshold
    g_ok = np.abs(channels.g) ** 2 >= gamma
    h_ok = np.abs(channels.h) ** 2 >= gamma
    np.fill_diagonal(h_ok, False)
    cells = channels.cell_index
    a = np.arange(len(cells))

    if plan.protocol == "orth_occupy_cows":
        ph1 = g_ok[a, cells]
        rescue = np.zeros(len(a), dtype=bool)
        for c in range(s.num_cells):
            rows = cells == c
            relays = rows & ph1  # own-cell hop-1 successes
            rescue[rows] = (h_ok[rows][:, relays]).any(axis=1)
        return ~(ph1 | rescue)

    if plan.protocol == "occupy_cow":
        ph1 = g_ok[a, cells]
        rescue = np.zeros(len(a), dtype=bool)
        for c in range(s.num_cells):
            relays = g_ok[:, c]  # every decoder of message c relays it
            rows = cells == c
            rescue[rows] = (h_ok[rows][:, relays]).any(axis=1)
        return ~(ph1 | rescue)

    if plan.protocol == "comp_occupy_cow":
        ph1 = g_ok.any(axis=1)  # one good controller link suffices
        rescue = (h_ok[:, ph1]).any(axis=1)
        return ~(ph1 | rescue)

    raise ConfigurationError(f"iid_gains mode has no model for {plan.protocol}")


def run_one_trial(plan: TrialPlan, trial_index: int, fixed_layout=None) -> tuple:
    """(network_failure, per_actuator_failure) of one independent period."""
    rng = trial_rng(plan.master_seed, trial_index)
    s = plan.scenario
    if plan.iid_gains:
        channels = draw_iid_channels(
            s.num_cells, s.actuators_per_cell, s.rician_k_factor_linear, rng
        )
        per_actuator = _iid_link_model_failures(plan, channels)
        return bool(per_actuator.any()), per_actuator
    layout = fixed_layout
    if plan.redraw_layout_each_trial or layout is None:
        layout = build_layout(s, rng)
    channels = draw_channels(s, layout, rng)
    outcome = run_protocol(plan.protocol_params(), channels)
    return outcome.network_failure, ~outcome.decoded_final


def _run_block(args) -> np.ndarray:
    plan, indices, fixed_layout = args
    out = np.zeros((len(indices), plan.scenario.num_actuators + 1), dtype=bool)
    for row, t in enumerate(indices):
        net, per = run_one_trial(plan, int(t), fixed_layout)
        out[row, 0] = net
        out[row, 1:] = per
    return out


def _fixed_layout(plan: TrialPlan):
    if plan.redraw_layout_each_trial or plan.iid_gains:
        return None
    return build_layout(plan.scenario, trial_rng(plan.master_seed, _LAYOUT_STREAM))


def _block_sizes():
    """Deterministic growing block schedule (independent of worker count)."""
    for size in (64, 128, 256, 512):
        yield size
    while True:
        yield _BLOCK


def _iterate_blocks(plan: TrialPlan, workers: int):
    """Yield (trial indices, outcome matrix) blocks in trial-index order.

    Consumers may break out early; the pool is shut down via the generator's
    finally clause. Block boundaries follow a fixed schedule so any stopping
    rule evaluated at them is reproducible.
    """
    fixed_layout = _fixed_layout(plan)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        start = 0
        sizes = _block_sizes()
        while start < plan.max_trials:
            block = np.arange(start, min(start + next(sizes), plan.max_trials))
            if pool is None:
                results = _run_block((plan, block, fixed_layout))
            else:
                chunks = np.array_split(block, workers)
                parts = pool.map(
                    _run_block,
                    [(plan, c, fixed_layout) for c in chunks if len(c)],
                )
                results = np.concatenate(list(parts), axis=0)
            yield block, results
            start += len(block)
    finally:
        if pool is not None:
            pool.shutdown()


def estimate_pf(plan: TrialPlan, workers: int = 1) -> SweepResult:
    """Estimate the network failure probability of one scenario point.

    Runs up to ``plan.max_trials`` independent transmission periods, stopping
    once ``plan.max_failures`` (if set) is reached; the stop is evaluated in
    trial-index order so the reported (trials, failures) pair is a pure
    function of the plan.
    """
    t0 = time.perf_counter()
    failures = 0
    trials_run = 0
    per_actuator = np.zeros(plan.scenario.num_actuators, dtype=np.int64)

    gen = _iterate_blocks(plan, workers)
    try:
        for block, results in gen:
            net = results[:, 0]
            if plan.max_failures is not None:
                cum = failures + np.cumsum(net)
                hit = np.nonzero(cum >= plan.max_failures)[0]
                if len(hit):
                    upto = int(hit[0]) + 1
                    failures += int(net[:upto].sum())
                    per_actuator += results[:upto, 1:].sum(axis=0)
                    trials_run += upto
                    break
            failures += int(net.sum())
            per_actuator += results[:, 1:].sum(axis=0)
            trials_run += len(block)
    finally:
        gen.close()

    ci_low, ci_high = wilson_interval(failures, trials_run)
    s = plan.scenario
    return SweepResult(
        protocol=plan.protocol,
        num_cells=s.num_cells,
        actuators_per_cell=s.actuators_per_cell,
        bandwidth_hz=s.bandwidth,
        snr_db=average_link_snr_db(s),
        cell_separation_m=s.cell_separation_m,
        trials=trials_run,
        failures=failures,
        pf_estimate=failures / trials_run,
        ci_low=ci_low,
        ci_high=ci_high,
        seed=plan.master_seed,
        wall_time_s=time.perf_counter() - t0,
        per_actuator_failures=per_actuator,
    )


# ---------------------------------------------------------------------------
# Grid sweeps.

GRID_KEYS = ("snr_db", "W", "C", "D")


def sweep(
    base_scenario: ScenarioConfig,
    protocols: list[str],
    grid: dict,
    max_trials: int,
    master_seed: int,
    workers: int = 1,
    max_failures: int | None = None,
    treat_interference_as_noise: bool = False,
    iid_gains: bool = False,
) -> list[SweepResult]:
    """Cartesian sweep over protocols x any subset of {snr_db, W, C, D}.

    Output rows follow the deterministic cartesian order (protocol outermost,
    then grid keys in GRID_KEYS order); each point gets its own child seed
    derived from (master_seed, point index).
    """
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown grid keys: {sorted(unknown)}")
    if not protocols:
        raise ConfigurationError("empty protocol list")
    axes = [(k, list(grid[k])) for k in GRID_KEYS if k in grid]
    if any(len(v) == 0 for _, v in axes):
        raise ConfigurationError("empty grid axis")

    points: list[tuple] = [()]
    for key, values in axes:
        points = [p + ((key, v),) for p in points for v in values]

    results = []
    index = 0
    for protocol in protocols:
        for assignment in points:
            scenario = base_scenario
            overrides = dict(assignment)
            if "snr_db" in overrides:
                from .channel import tx_psd_for_average_snr

                scenario = scenario.replace(
                    tx_psd_dbm_hz=tx_psd_for_average_snr(
                        overrides["snr_db"], scenario.noise_psd_dbm_hz
                    )
                )
            if "W" in overrides:
                scenario = scenario.replace(bandwidth=float(overrides["W"]))
            if "C" in overrides:
                scenario = scenario.replace(num_cells=int(overrides["C"]))
            if "D" in overrides:
                scenario = scenario.replace(cell_separation_m=float(overrides["D"]))
            plan = TrialPlan(
                scenario=scenario,
                protocol=protocol,
                max_trials=max_trials,
                master_seed=derive_seed(master_seed, index),
                max_failures=max_failures,
                treat_interference_as_noise=treat_interference_as_noise,
                iid_gains=iid_gains,
            )
            results.append(estimate_pf(plan, workers=workers))
            index += 1
    return results


# ---------------------------------------------------------------------------
# Monte Carlo required-bandwidth search.


@dataclass
class McBandwidthResult:
    protocol: str
    target_pf: float
    w_low_hz: float  # highest W observed above target (CI-separated)
    w_high_hz: float  # lowest W observed below target (CI-separated)
    bandwidth_hz: float  # = w_high_hz when status == "ok"
    status: str  # ok | indeterminate | unreachable
    evaluations: list = field(default_factory=list)


def _compare_point_to_target(
    plan: TrialPlan, target_pf: float, trials_cap: int, workers: int
) -> tuple:
    """CI-aware comparison of a point's pf against target_pf.

    Grows the trial budget blockwise until the Wilson interval separates from
    the target or the cap is reached. Returns (verdict, result-like tuple):
    verdict in {"below", "above", "indeterminate"}.
    """
    if target_pf >= 1.0:
        return "below", (0, 0)
    failures = 0
    trials = 0
    gen = _iterate_blocks(
        TrialPlan(
            scenario=plan.scenario,
            protocol=plan.protocol,
            max_trials=trials_cap,
            master_seed=plan.master_seed,
            treat_interference_as_noise=plan.treat_interference_as_noise,
            iid_gains=plan.iid_gains,
            redraw_layout_each_trial=plan.redraw_layout_each_trial,
        ),
        workers,
    )
    verdict = "indeterminate"
    try:
        for block, results in gen:
            failures += int(results[:, 0].sum())
            trials += len(block)
            lo, hi = wilson_interval(failures, trials)
            if hi < target_pf:
                verdict = "below"
            elif lo > target_pf:
                verdict = "above"
            if verdict != "indeterminate":
                break
    finally:
        gen.close()
    return verdict, (failures, trials)


def required_bandwidth_mc(
    scenario: ScenarioConfig,
    protocol: str,
    target_pf: float,
    master_seed: int,
    *,
    w_bracket_hz: tuple = (1e6, 1e9),
    rel_tol: float = 0.05,
    trials_cap: int = 20000,
    workers: int = 1,
    iid_gains: bool = False,
) -> McBandwidthResult:
    """Bisect bandwidth until the simulated pf first meets target_pf.

    Each comparison is declared only when the Wilson CI fully separates from
    the target; comparisons that stay inconclusive at the trial cap flag the
    whole search "indeterminate" and return the bracket reached so far.
    """
    evaluations = []

    def compare(w: float, eval_index: int) -> str:
        plan = TrialPlan(
            scenario=scenario.replace(bandwidth=float(w)),
            protocol=protocol,
            max_trials=trials_cap,
            master_seed=derive_seed(master_seed, eval_index, namespace=1),
            iid_gains=iid_gains,
        )
        verdict, (failures, trials) = _compare_point_to_target(
            plan, target_pf, trials_cap, workers
        )
        evaluations.append(
            {"W_hz": w, "verdict": verdict, "failures": failures, "trials": trials}
        )
        return verdict

    lo, hi = w_bracket_hz
    eval_index = 0
    verdict_lo = compare(lo, eval_index)
    if verdict_lo == "below":
        return McBandwidthResult(
            protocol, target_pf, lo, lo, lo, "ok", evaluations
        )

    verdict = compare(hi, eval_index := eval_index + 1)
    while verdict == "above" and hi < 64e9:
        hi *= 2.0
        verdict = compare(hi, eval_index := eval_index + 1)
    if verdict == "above":
        return McBandwidthResult(
            protocol, target_pf, hi, math.nan, math.nan, "unreachable", evaluations
        )
    if verdict == "indeterminate":
        return McBandwidthResult(
            protocol, target_pf, lo, hi, math.nan, "indeterminate", evaluations
        )

    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        verdict = compare(mid, eval_index := eval_index + 1)
        if verdict == "below":
            hi = mid
        elif verdict == "above":
            lo = mid
        else:
            return McBandwidthResult(
                protocol, target_pf, lo, hi, math.nan, "indeterminate", evaluations
            )
    return McBandwidthResult(protocol, target_pf, lo, hi, hi, "ok", evaluations)
