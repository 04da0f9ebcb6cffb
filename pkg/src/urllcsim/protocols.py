"""One-period execution of the five downlink protocols on a channel draw.

All protocols deliver each cell's concatenated K*b-bit message in two hops of
T/2 each (controller broadcast, then cooperative relaying by successful
receivers), so the per-cell rate target in every hop is R = K*b/(0.5*T).
They differ in how inter-cell interference is handled:

  orth_occupy_cows  per-cell band W/C, relays only within the cell
  occupy_cow        per-cell band W/C, every decoder of a message relays it
                    on that message's band (reception on other bands is
                    unaffected: transmissions are frequency-orthogonal)
  comp_occupy_cow   controllers share all messages and broadcast one C*K*b-bit
                    message over the full band at rate C*R
  ic_ic             full frequency reuse; receivers successively decode and
                    cancel the strongest remaining transmission in both hops
  ic_ia             hop 1 as ic_ic; hop 2 as occupy_cow (orthogonal bands,
                    relay sets from the SIC hop)

Simultaneous transmissions of one message are combined by adding received
powers (distributed space-time coding model); the same rule adds undecoded
transmissions into interference. Noise enters as +1 because every power is
expressed relative to the noise PSD.

All runners are pure deterministic functions of (params, channels); ties in
the SIC argmax go to the lowest controller index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .config import ConfigurationError

PROTOCOLS = ("orth_occupy_cows", "occupy_cow", "comp_occupy_cow", "ic_ic", "ic_ia")

# Spectral efficiencies above this give thresholds beyond float range; the
# link is then simply unachievable.
_MAX_SE = 1024.0


def snr_threshold(spectral_efficiency: float) -> float:
    """Minimum SNR x with log2(1+x) >= se; inf when se overflows a double."""
    if spectral_efficiency > _MAX_SE:
        return np.inf
    return 2.0 ** spectral_efficiency - 1.0


@dataclass
class ProtocolParams:
    rate_bps: float
    bandwidth_hz: float
    num_cells: int
    snr_linear: float
    protocol: str
    treat_interference_as_noise: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(
                f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}"
            )
        if self.rate_bps <= 0 or self.bandwidth_hz <= 0:
            raise ConfigurationError("rate_bps and bandwidth_hz must be > 0")
        if self.treat_interference_as_noise and self.protocol != "occupy_cow":
            raise ConfigurationError(
                "treat_interference_as_noise is a full-reuse variant defined "
                "only for occupy_cow; it is undefined for " + self.protocol
            )

    @property
    def per_band_threshold(self) -> float:
        """SNR threshold of a W/C band carrying rate R (also the full-band
        threshold of the C*R concatenated broadcast)."""
        return snr_threshold(
            self.num_cells * self.rate_bps / self.bandwidth_hz
        )

    @property
    def full_band_threshold(self) -> float:
        """SINR threshold for rate R over the whole band W."""
        return snr_threshold(self.rate_bps / self.bandwidth_hz)


@dataclass
class DecodeState:
    """Final decoder-side sets of one run (diagnostics for tests).

    undecoded_controllers[a, c]  message of controller c still unknown at a
    phase1_success_sets[a, c]    actuator a relays cell c's message in hop 2
    undecoded_relays[a, b]       hop-2 listener a still counts relay b as
                                 interference (SIC protocol only)
    """

    undecoded_controllers: np.ndarray
    phase1_success_sets: np.ndarray
    undecoded_relays: np.ndarray | None = None


@dataclass
class SicTrace:
    """Chronological decode events and per-round SINR snapshots."""

    # (phase, actuator, controller, sinr_at_decode) in decode order
    events: list = field(default_factory=list)
    phase1_sinr: list = field(default_factory=list)  # snapshot before each round
    phase2_sinr: list = field(default_factory=list)
    phase1_rounds: int = 0
    phase2_rounds: int = 0


@dataclass
class ProtocolOutcome:
    decoded_after_phase1: np.ndarray  # (A,) own message decoded in hop 1
    decoded_final: np.ndarray  # (A,) own message decoded by end of hop 2
    network_failure: bool  # any actuator missing its own message
    canceled_interferers: np.ndarray  # (A,) foreign messages decoded and removed
    state: DecodeState | None = None
    trace: SicTrace | None = None


def _power_matrices(params: ProtocolParams, channels: ChannelRealization):
    pg = params.snr_linear * np.abs(channels.g) ** 2
    ph = params.snr_linear * np.abs(channels.h) ** 2
    np.fill_diagonal(ph, 0.0)
    return pg, ph


def _outcome(ph1, final, canceled=None, state=None, trace=None) -> ProtocolOutcome:
    if canceled is None:
        canceled = np.zeros(len(ph1), dtype=int)
    return ProtocolOutcome(
        decoded_after_phase1=ph1,
        decoded_final=final,
        network_failure=bool(~final.all()),
        canceled_interferers=canceled,
        state=state,
        trace=trace,
    )


def run_orth_occupy_cows(
    params: ProtocolParams,
    channels: ChannelRealization,
    collect_state: bool = False,
) -> ProtocolOutcome:
    """Per-cell two-hop protocol on orthogonal W/C bands, in-cell relays only."""
    pg, ph = _power_matrices(params, channels)
    cells = channels.cell_index
    a = np.arange(len(cells))
    thr = params.per_band_threshold

    own = pg[a, cells]
    ph1 = own >= thr
    member = np.zeros_like(pg, dtype=bool)
    member[a, cells] = ph1
    relay_power = ph @ member
    final = ph1 | (own + relay_power[a, cells] >= thr)
    state = DecodeState(_own_only_undecoded(final, cells, params.num_cells), member) \
        if collect_state else None
    return _outcome(ph1, final, state=state)


def run_occupy_cow(
    params: ProtocolParams,
    channels: ChannelRealization,
    collect_state: bool = False,
) -> ProtocolOutcome:
    """Two-hop protocol on W/C bands with network-wide relaying.

    Hop 1: every actuator attempts every cell's band, so out-of-cell decoders
    join that cell's relay set. Hop 2: a failed actuator adds its controller's
    direct power and the powers of all relays of its own band.
    """
    if params.treat_interference_as_noise:
        return run_occupy_cow_interference_as_noise(
            params, channels, collect_state=collect_state
        )
    pg, ph = _power_matrices(params, channels)
    cells = channels.cell_index
    a = np.arange(len(cells))
    thr = params.per_band_threshold

    decoders = pg >= thr  # decoders[a, c]: actuator a decoded cell c's message
    ph1 = decoders[a, cells]
    relay_power = ph @ decoders
    own = pg[a, cells]
    final = ph1 | (own + relay_power[a, cells] >= thr)
    state = DecodeState(~decoders, decoders.copy()) if collect_state else None
    return _outcome(ph1, final, state=state)


def run_comp_occupy_cow(
    params: ProtocolParams,
    channels: ChannelRealization,
    collect_state: bool = False,
) -> ProtocolOutcome:
    """All controllers jointly broadcast one concatenated message at rate C*R."""
    pg, ph = _power_matrices(params, channels)
    thr = params.per_band_threshold  # C*R over W: same threshold value
    g_sum = pg.sum(axis=1)
    ph1 = g_sum >= thr
    relay_power = ph @ ph1.astype(float)
    final = ph1 | (g_sum + relay_power >= thr)
    state = None
    if collect_state:
        member = np.repeat(ph1[:, None], params.num_cells, axis=1)
        state = DecodeState(~member, member)
    return _outcome(ph1, final, state=state)


def run_occupy_cow_interference_as_noise(
    params: ProtocolParams,
    channels: ChannelRealization,
    include_interference: bool = True,
    collect_state: bool = False,
) -> ProtocolOutcome:
    """Per-cell two-hop protocol with full frequency reuse, no cancellation.

    Every cell runs the single-cell protocol over the entire band W; all
    out-of-cell received power (controllers in hop 1, controllers plus relays
    in hop 2) is lumped into the noise term. Relays stay within their cell.
    With ``include_interference=False`` the cross-cell terms are dropped,
    which gives the interference-free reference of the same protocol.
    """
    pg, ph = _power_matrices(params, channels)
    cells = channels.cell_index
    a = np.arange(len(cells))
    thr = params.full_band_threshold

    own = pg[a, cells]
    g_interf = pg.sum(axis=1) - own if include_interference else 0.0
    ph1 = own / (1.0 + g_interf) >= thr

    member = np.zeros_like(pg, dtype=bool)
    member[a, cells] = ph1
    cohort = ph @ member
    own_relay = cohort[a, cells]
    foreign_relay = cohort.sum(axis=1) - own_relay if include_interference else 0.0
    final = ph1 | (
        (own + own_relay) / (1.0 + g_interf + foreign_relay) >= thr
    )
    state = DecodeState(_own_only_undecoded(final, cells, params.num_cells), member) \
        if collect_state else None
    return _outcome(ph1, final, state=state)


def _own_only_undecoded(final, cells, num_cells):
    und = np.ones((len(cells), num_cells), dtype=bool)
    und[np.arange(len(cells)), cells] = ~final
    return und


def _sic_phase1(pg, thr, trace: SicTrace | None):
    """Greedy successive decoding of hop-1 broadcasts at every actuator.

    Each actuator repeatedly decodes the remaining controller with the
    highest SINR (undecoded co-channel broadcasts are interference) while
    that SINR supports the rate, canceling each decoded signal. Runs to
    exhaustion: actuators decode every message they can.
    """
    a_count, c_count = pg.shape
    idx = np.arange(a_count)
    undecoded = np.ones((a_count, c_count), dtype=bool)
    remaining_power = pg.sum(axis=1)
    active = np.ones(a_count, dtype=bool)
    for _ in range(c_count):
        if not active.any():
            break
        denom = remaining_power[:, None] - pg + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pg / denom  # denom >= 1 wherever undecoded; rest is masked
        sinr = np.where(undecoded & active[:, None], ratio, -np.inf)
        if trace is not None:
            trace.phase1_sinr.append(np.where(undecoded, ratio, np.nan))
            trace.phase1_rounds += 1
        best = sinr.argmax(axis=1)
        ok = sinr[idx, best] >= thr
        if not ok.any():
            break
        rows, cols = idx[ok], best[ok]
        if trace is not None:
            for r, c in zip(rows, cols):
                trace.events.append((1, int(r), int(c), float(sinr[r, c])))
        undecoded[rows, cols] = False
        remaining_power[rows] -= pg[rows, cols]
        active = ok  # an actuator that decoded nothing this round never will
    return undecoded


def run_ic_ic(
    params: ProtocolParams,
    channels: ChannelRealization,
    collect_state: bool = False,
    collect_trace: bool = False,
) -> ProtocolOutcome:
    """Full reuse with successive interference cancellation in both hops.

    Hop 2: actuators that decoded their own message relay it (only it: they
    are half duplex on a single shared band, and transmit instead of
    listening). Each still-failed actuator keeps decoding whichever remaining
    message has the highest SINR, where a candidate message's power is its
    controller's plus its relay cohort's, and undecoded controllers and
    cohorts interfere; decoding removes the message and its cohort from the
    interference. The hop ends for an actuator on its own message or when
    nothing more is decodable.
    """
    pg, ph = _power_matrices(params, channels)
    cells = channels.cell_index
    a_count, c_count = pg.shape
    idx = np.arange(a_count)
    thr = params.full_band_threshold
    trace = SicTrace() if collect_trace else None

    undecoded = _sic_phase1(pg, thr, trace)
    ph1 = ~undecoded[idx, cells]

    relay_member = np.zeros_like(pg, dtype=bool)
    relay_member[idx, cells] = ph1  # relays transmit their own cell's message
    cohort = ph @ relay_member  # (A, C) received power of each relay cohort

    und = undecoded.copy()
    g_interf = np.where(und, pg, 0.0).sum(axis=1)
    r_interf = np.where(und, cohort, 0.0).sum(axis=1)
    success = ph1.copy()
    active = ~ph1  # relays do not decode; failed actuators do
    for _ in range(c_count):
        if not active.any():
            break
        num = pg + cohort
        den = (g_interf + r_interf)[:, None] - num + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den  # den >= 1 wherever undecoded; rest is masked
        sinr = np.where(und & active[:, None], ratio, -np.inf)
        if trace is not None:
            trace.phase2_sinr.append(np.where(und, ratio, np.nan))
            trace.phase2_rounds += 1
        best = sinr.argmax(axis=1)
        ok = sinr[idx, best] >= thr
        if not ok.any():
            break
        rows, cols = idx[ok], best[ok]
        if trace is not None:
            for r, c in zip(rows, cols):
                trace.events.append((2, int(r), int(c), float(sinr[r, c])))
        g_interf[rows] -= pg[rows, cols]
        r_interf[rows] -= cohort[rows, cols]
        und[rows, cols] = False
        got_own = ok & (best == cells)
        success |= got_own
        active = ok & ~got_own
    final = success

    canceled = (~und).sum(axis=1) - final.astype(int)
    state = None
    if collect_state:
        # listener a still hears relay b as interference iff b relays a message
        # (its own cell's) that a has not decoded
        relays = relay_member.any(axis=1)
        und_relays = und[:, cells] & relays[None, :]
        state = DecodeState(und, relay_member, und_relays)
    return _outcome(ph1, final, canceled, state, trace)


def run_ic_ia(
    params: ProtocolParams,
    channels: ChannelRealization,
    collect_state: bool = False,
    collect_trace: bool = False,
) -> ProtocolOutcome:
    """SIC broadcast hop, interference-avoiding cooperation hop.

    Hop 1 is identical to the cancellation protocol's. In hop 2 each message
    gets its own W/C band, and every actuator anywhere that decoded it relays
    it there, so a failed actuator sees an interference-free combination of
    its controller and the network-wide relay set of its message.
    """
    pg, ph = _power_matrices(params, channels)
    cells = channels.cell_index
    idx = np.arange(pg.shape[0])
    trace = SicTrace() if collect_trace else None

    undecoded = _sic_phase1(pg, params.full_band_threshold, trace)
    decoders = ~undecoded
    ph1 = decoders[idx, cells]

    thr_band = params.per_band_threshold
    relay_power = ph @ decoders
    own = pg[idx, cells]
    final = ph1 | (own + relay_power[idx, cells] >= thr_band)
    canceled = decoders.sum(axis=1) - ph1.astype(int)
    state = DecodeState(undecoded, decoders.copy()) if collect_state else None
    return _outcome(ph1, final, canceled, state, trace)


_RUNNERS = {
    "orth_occupy_cows": run_orth_occupy_cows,
    "occupy_cow": run_occupy_cow,
    "comp_occupy_cow": run_comp_occupy_cow,
    "ic_ic": run_ic_ic,
    "ic_ia": run_ic_ia,
}


def run_protocol(
    params: ProtocolParams, channels: ChannelRealization, **kwargs
) -> ProtocolOutcome:
    return _RUNNERS[params.protocol](params, channels, **kwargs)


def trace_records(
    params: ProtocolParams,
    channels: ChannelRealization,
    outcome: ProtocolOutcome,
) -> list[dict]:
    """Per-actuator debug records for JSONL export.

    Schema (one JSON object per actuator):
      cell              int, cell index c
      k                 int, actuator index within the cell
      decoded_after_phase1, decoded_final   bool
      decode_order      [[phase, controller, sinr], ...] for SIC runs
      canceled_interferers                  int
      final_snr_terms   {"own_gain_snr": float, "threshold": float}
    """
    cells = channels.cell_index
    pg = params.snr_linear * np.abs(channels.g) ** 2
    per_actuator_events: dict[int, list] = {}
    if outcome.trace is not None:
        for phase, actuator, controller, sinr in outcome.trace.events:
            per_actuator_events.setdefault(actuator, []).append(
                [phase, controller, sinr]
            )
    records = []
    k_within = {}
    for a, c in enumerate(cells):
        c = int(c)
        k = k_within.get(c, 0)
        k_within[c] = k + 1
        records.append(
            {
                "cell": c,
                "k": k,
                "decoded_after_phase1": bool(outcome.decoded_after_phase1[a]),
                "decoded_final": bool(outcome.decoded_final[a]),
                "decode_order": per_actuator_events.get(a, []),
                "canceled_interferers": int(outcome.canceled_interferers[a]),
                "final_snr_terms": {
                    "own_gain_snr": float(pg[a, c]),
                    "threshold": float(
                        params.full_band_threshold
                        if params.protocol in ("ic_ic", "ic_ia")
                        else params.per_band_threshold
                    ),
                },
            }
        )
    return records


def write_trace_jsonl(path, records: list[dict]):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
