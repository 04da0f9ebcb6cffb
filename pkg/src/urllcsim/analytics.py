"""Closed-form failure probabilities under i.i.d. fading, and bandwidth solving.

The analysis assumes every link gain is an independent copy of one unit-power
Rician variable. A link is in outage when it cannot carry spectral efficiency
C*R/W, which happens with probability

    P_l = P(|h|^2 < g_th),   g_th = (2^(CR/W) - 1) / rho,

the Rician power CDF evaluated with the first-order Marcum Q-function.
Cooperative hop-2 diversity is modeled by raising P_l to the number of
simultaneous transmitters of a message (a failed receiver is rescued unless
every one of its relay links is individually in outage); the hop-1 direct
link of a failed receiver is not counted again, since it is already known bad
within the coherence period.

Failure probabilities are assembled in the log domain so values down to the
1e-9..1e-12 range keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .protocols import snr_threshold

# Marcum first-argument conventions. "rician" matches the unit-power Rician
# fading model exactly (noncentrality 2*kappa) and is validated against Monte
# Carlo draws of that model; "sqrt_kappa" is the alternate convention with the
# noncentrality halved, found in parts of the outage literature. Default is
# the distribution-exact one.
MARCUM_CONVENTIONS = ("rician", "sqrt_kappa")

_TAIL_EPS = 1e-16


class AnalyticsError(ValueError):
    pass


def _poisson_log_pmf(n: np.ndarray, lam: float) -> np.ndarray:
    return n * math.log(lam) - lam - special.gammaln(n + 1.0) if lam > 0 else np.where(
        n == 0, 0.0, -np.inf
    )


def _mixture_orders(lam: float) -> np.ndarray:
    """Poisson orders covering all but < 1e-16 of the mixture weight."""
    top = int(lam + 12.0 * math.sqrt(lam + 1.0) + 64.0)
    return np.arange(top + 1)


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q-function Q1(a, b), absolute error <= 1e-12.

    Evaluated as a Poisson mixture of regularized upper incomplete gamma
    terms: Q1(a,b) = sum_n Pois(n; a^2/2) * P(Pois(b^2/2) <= n).  The series
    is truncated once the accumulated Poisson weight exceeds 1 - 1e-16;
    since every gamma factor lies in [0, 1], the truncation error is bounded
    by the remaining weight.
    """
    if not (np.isfinite(a) and np.isfinite(b)) or a < 0 or b < 0:
        raise AnalyticsError(f"marcum_q1 needs finite non-negative args, got {a}, {b}")
    if b == 0.0:
        return 1.0
    lam = 0.5 * a * a
    s = 0.5 * b * b
    n = _mixture_orders(lam)
    weights = np.exp(_poisson_log_pmf(n, lam))
    if 1.0 - weights.sum() > 1e-12:
        raise AnalyticsError("marcum_q1 mixture failed to converge")
    upper = special.gammaincc(n + 1.0, s)  # P(Pois(s) <= n)
    return float(min(np.dot(weights, upper), 1.0))


def _rician_power_cdf(z: float, k_lin: float, convention: str = "rician") -> float:
    """P(|h|^2 <= z) for unit-power Rician fading, accurate in the lower tail."""
    if z <= 0.0:
        return 0.0
    if not np.isfinite(z):
        return 1.0
    lam = k_lin if convention == "rician" else 0.5 * k_lin  # a^2/2
    s = (k_lin + 1.0) * z  # b^2/2
    n = _mixture_orders(lam)
    weights = np.exp(_poisson_log_pmf(n, lam))
    lower = special.gammainc(n + 1.0, s)  # P(Pois(s) > n)
    return float(min(np.dot(weights, lower), 1.0))


@dataclass
class IidModel:
    """Inputs of the closed forms: network shape, link threshold, fading."""

    num_cells: int
    actuators_per_cell: int
    spectral_rate: float  # C*R/W, b/s/Hz: efficiency every link must carry
    snr_linear: float
    k_factor_linear: float

    @classmethod
    def from_system(
        cls,
        num_cells: int,
        actuators_per_cell: int,
        bandwidth_hz: float,
        rate_bps: float,
        snr_linear: float,
        k_factor_linear: float,
    ) -> "IidModel":
        return cls(
            num_cells=num_cells,
            actuators_per_cell=actuators_per_cell,
            spectral_rate=num_cells * rate_bps / bandwidth_hz,
            snr_linear=snr_linear,
            k_factor_linear=k_factor_linear,
        )

    @property
    def snr_gamma_threshold(self) -> float:
        return snr_threshold(self.spectral_rate) / self.snr_linear


def link_outage(model: IidModel, convention: str = "rician") -> float:
    """Probability a single link cannot carry spectral efficiency C*R/W."""
    if convention not in MARCUM_CONVENTIONS:
        raise AnalyticsError(f"unknown Marcum convention {convention!r}")
    return _rician_power_cdf(model.snr_gamma_threshold, model.k_factor_linear, convention)


def _link_outage_logs(model: IidModel, convention: str):
    """(P_l, log P_l, log(1-P_l)) with both tails computed accurately."""
    z = model.snr_gamma_threshold
    k_lin = model.k_factor_linear
    p = _rician_power_cdf(z, k_lin, convention)
    if p <= 0.0:
        return 0.0, -np.inf, 0.0
    if p >= 1.0:
        return 1.0, 0.0, -np.inf
    if p < 0.5:
        lp = math.log(p)
        lq = math.log1p(-p)
    else:
        a = math.sqrt(2.0 * k_lin) if convention == "rician" else math.sqrt(k_lin)
        q = marcum_q1(a, math.sqrt(2.0 * (k_lin + 1.0) * z))
        if q <= 0.0:
            return 1.0, 0.0, -np.inf
        lq = math.log(q)
        lp = math.log1p(-q)
    return p, lp, lq


def _log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0."""
    if x >= 0.0:
        return -np.inf if x == 0.0 else np.nan
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _log_bracket(k, m, lp: float):
    """log(1 - (1 - P_l^k)^m), the failure share of m receivers with k relays.

    0^0 = 1 throughout: zero relays (k = 0) means certain failure of any
    remaining receiver, and m = 0 remaining receivers means no failure.
    Vectorized over broadcastable k, m.
    """
    k = np.asarray(k, dtype=float)
    m = np.asarray(m, dtype=float)
    k, m = np.broadcast_arrays(k, m)
    out = np.full(k.shape, -np.inf)
    live = m > 0
    out[live & (k == 0)] = 0.0
    sel = live & (k > 0)
    if lp == -np.inf or not sel.any():
        return out if out.ndim else float(out)
    t = k[sel] * lp
    with np.errstate(divide="ignore", invalid="ignore"):
        x = m[sel] * np.log1p(-np.exp(np.minimum(t, -1e-320)))
        linearized = np.log(m[sel]) + t  # 1-(1-u)^m ~ m*u for tiny u = P_l^k
        exact = np.where(
            x > -math.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x))
        )
    out[sel] = np.where((t < -700.0) | (x > -1e-12), linearized, exact)
    return out if out.ndim else float(out)


def _log_binom(n: int, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


@dataclass
class AnalyticPoint:
    """One closed-form failure probability, kept in log form."""

    protocol: str
    log_failure_probability: float
    model: IidModel

    @property
    def failure_probability(self) -> float:
        return float(np.exp(self.log_failure_probability))


def _degenerate_point(protocol, p_l, model):
    if p_l >= 1.0:
        return AnalyticPoint(protocol, 0.0, model)
    return AnalyticPoint(protocol, -np.inf, model)


def pf_orth(model: IidModel, convention: str = "rician") -> AnalyticPoint:
    """Failure probability of the per-cell protocol without cross-cell relays.

    Cell failure marginalizes over the binomial count k of hop-1 successes;
    conditioned on k, each of the K-k failed receivers independently stays
    failed iff all k of its relay links are in outage.  The network fails if
    any of the C independent cells does.
    """
    p_l, lp, lq = _link_outage_logs(model, convention)
    if p_l in (0.0, 1.0):
        return _degenerate_point("orth_occupy_cows", p_l, model)
    big_k = model.actuators_per_cell
    ks = np.arange(big_k + 1)
    terms = _log_binom(big_k, ks) + ks * lq + (big_k - ks) * lp
    terms += _log_bracket(ks, big_k - ks, lp)
    log_cell = float(special.logsumexp(terms))
    log_pf = _log_bracket(1, model.num_cells, log_cell)
    return AnalyticPoint("orth_occupy_cows", log_pf, model)


def pf_occupy_bound(model: IidModel, convention: str = "rician") -> AnalyticPoint:
    """Union bound on the network-wide relaying protocol's failure.

    A cell's relay pool splits into k_i in-cell and k_o out-of-cell decoders
    of its message; the per-cell failure is summed over both binomial counts
    and multiplied by C (union bound over cells), clamped to 1.
    """
    p_l, lp, lq = _link_outage_logs(model, convention)
    if p_l in (0.0, 1.0):
        return _degenerate_point("occupy_cow", p_l, model)
    big_k = model.actuators_per_cell
    n_out = model.num_cells * big_k - big_k
    kis = np.arange(big_k + 1)
    kos = np.arange(n_out + 1)
    log_pmf_i = _log_binom(big_k, kis) + kis * lq + (big_k - kis) * lp
    log_pmf_o = _log_binom(n_out, kos) + kos * lq + (n_out - kos) * lp
    brackets = _log_bracket(
        kis[:, None] + kos[None, :], (big_k - kis)[:, None] + 0 * kos[None, :], lp
    )
    terms = log_pmf_i[:, None] + log_pmf_o[None, :] + brackets
    log_cell = float(special.logsumexp(terms))
    log_pf = min(0.0, math.log(model.num_cells) + log_cell)
    return AnalyticPoint("occupy_cow", log_pf, model)


def pf_comp(model: IidModel, convention: str = "rician") -> AnalyticPoint:
    """Failure probability of the joint-broadcast protocol.

    Hop 1 combines the C controller links of each receiver (failure iff all C
    are in outage, probability P_l^C); hop-2 rescue needs one good link to
    the k hop-1 successes.
    """
    p_l, lp, lq_unused = _link_outage_logs(model, convention)
    if p_l in (0.0, 1.0):
        return _degenerate_point("comp_occupy_cow", p_l, model)
    n = model.num_cells * model.actuators_per_cell
    lp_c = model.num_cells * lp  # log P_l^C
    lq_c = _log1mexp(lp_c) if lp_c < 0 else -np.inf  # log(1 - P_l^C)
    ks = np.arange(n + 1)
    terms = _log_binom(n, ks) + ks * lq_c + (n - ks) * lp_c
    terms += _log_bracket(ks, n - ks, lp)
    log_pf = float(special.logsumexp(terms))
    return AnalyticPoint("comp_occupy_cow", min(0.0, log_pf), model)


_ANALYTIC = {
    "orth_occupy_cows": pf_orth,
    "occupy_cow": pf_occupy_bound,
    "comp_occupy_cow": pf_comp,
}


def analytic_pf(protocol: str, model: IidModel, convention: str = "rician") -> AnalyticPoint:
    if protocol not in _ANALYTIC:
        raise AnalyticsError(
            f"no closed form exists for {protocol!r}; analytic protocols are "
            + ", ".join(_ANALYTIC)
        )
    return _ANALYTIC[protocol](model, convention)


ANALYTIC_PROTOCOLS = tuple(_ANALYTIC)


# ---------------------------------------------------------------------------
# Plain linear-domain evaluations. Reference implementations for the
# log-domain consistency checks; accurate only while nothing underflows.


def _linear_bracket(k: int, m: int, p: float) -> float:
    """1 - (1 - p^k)^m without cancellation, linear domain."""
    if m == 0:
        return 0.0
    if k == 0 or p >= 1.0:
        return 1.0
    return -math.expm1(m * math.log1p(-(p**k)))


def naive_pf_orth(model: IidModel, convention: str = "rician") -> float:
    p = link_outage(model, convention)
    big_k = model.actuators_per_cell
    cell_fail = 0.0
    for k in range(big_k + 1):
        pmf = special.comb(big_k, k) * (1 - p) ** k * p ** (big_k - k)
        cell_fail += pmf * _linear_bracket(k, big_k - k, p)
    if cell_fail >= 1.0:
        return 1.0
    return -math.expm1(model.num_cells * math.log1p(-cell_fail))


def naive_pf_occupy_bound(model: IidModel, convention: str = "rician") -> float:
    p = link_outage(model, convention)
    big_k = model.actuators_per_cell
    n_out = model.num_cells * big_k - big_k
    cell_fail = 0.0
    for ki in range(big_k + 1):
        pmf_i = special.comb(big_k, ki) * (1 - p) ** ki * p ** (big_k - ki)
        for ko in range(n_out + 1):
            pmf_o = special.comb(n_out, ko) * (1 - p) ** ko * p ** (n_out - ko)
            cell_fail += pmf_i * pmf_o * _linear_bracket(ki + ko, big_k - ki, p)
    return min(1.0, model.num_cells * cell_fail)


def naive_pf_comp(model: IidModel, convention: str = "rician") -> float:
    p = link_outage(model, convention)
    n = model.num_cells * model.actuators_per_cell
    pc = p**model.num_cells
    total = 0.0
    for k in range(n + 1):
        pmf = special.comb(n, k) * (1 - pc) ** k * pc ** (n - k)
        total += pmf * _linear_bracket(k, n - k, p)
    return min(1.0, total)


# ---------------------------------------------------------------------------
# Required-bandwidth solver.


@dataclass
class BandwidthSolution:
    protocol: str
    snr_db: float
    target_pf: float
    bandwidth_hz: float  # nan when unreachable
    unreachable: bool
    achieved_log_pf: float
    evaluations: int


def required_bandwidth(
    protocol: str,
    target_pf: float,
    snr_db: float,
    *,
    num_cells: int,
    actuators_per_cell: int,
    message_bits: int,
    cycle_time: float,
    rician_k_factor_db: float = 4.7,
    convention: str = "rician",
    rel_tol: float = 1e-4,
    bracket_hz: tuple = (1e3, 1e10),
) -> BandwidthSolution:
    """Minimal bandwidth whose closed-form failure meets target_pf at snr_db.

    Geometric bisection over the bracket. Failure probability must be
    non-increasing in W; this is asserted over every pair of evaluations
    rather than assumed, since the combinatorial sums are not monotone term
    by term.
    """
    if not (0.0 < target_pf < 1.0):
        raise AnalyticsError("target_pf must lie strictly inside (0, 1)")
    rate = actuators_per_cell * message_bits / (0.5 * cycle_time)
    rho = 10.0 ** (snr_db / 10.0)
    k_lin = 10.0 ** (rician_k_factor_db / 10.0)
    log_target = math.log(target_pf)

    evals: list[tuple[float, float]] = []

    def log_pf_at(w: float) -> float:
        model = IidModel.from_system(
            num_cells, actuators_per_cell, w, rate, rho, k_lin
        )
        value = analytic_pf(protocol, model, convention).log_failure_probability
        for w2, v2 in evals:
            if w == w2:
                continue
            at_wider, at_narrower = (value, v2) if w > w2 else (v2, value)
            tol = 1e-9 * max(1.0, abs(value), abs(v2))
            if at_wider > at_narrower + tol:
                raise AnalyticsError(
                    f"failure probability not monotone in bandwidth near W={w:.4g}"
                )
        evals.append((w, value))
        return value

    lo, hi = bracket_hz
    log_pf_hi = log_pf_at(hi)
    if log_pf_hi > log_target:
        return BandwidthSolution(
            protocol, snr_db, target_pf, float("nan"), True, log_pf_hi, len(evals)
        )
    log_pf_lo = log_pf_at(lo)
    if log_pf_lo <= log_target:
        return BandwidthSolution(
            protocol, snr_db, target_pf, lo, False, log_pf_lo, len(evals)
        )
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if log_pf_at(mid) <= log_target:
            hi, log_pf_hi = mid, evals[-1][1]
        else:
            lo = mid
    return BandwidthSolution(
        protocol, snr_db, target_pf, hi, False, log_pf_hi, len(evals)
    )


TRADEOFF_COLUMNS = (
    "protocol",
    "snr_db",
    "target_pf",
    "required_bw_hz",
    "C",
    "K",
    "b_bits",
    "T_s",
    "kfactor_db",
)


def tradeoff_csv_rows(
    solutions: list[BandwidthSolution],
    *,
    num_cells: int,
    actuators_per_cell: int,
    message_bits: int,
    cycle_time: float,
    rician_k_factor_db: float,
) -> list[dict]:
    rows = []
    for sol in solutions:
        rows.append(
            {
                "protocol": sol.protocol,
                "snr_db": sol.snr_db,
                "target_pf": sol.target_pf,
                "required_bw_hz": sol.bandwidth_hz,
                "C": num_cells,
                "K": actuators_per_cell,
                "b_bits": message_bits,
                "T_s": cycle_time,
                "kfactor_db": rician_k_factor_db,
            }
        )
    return rows
