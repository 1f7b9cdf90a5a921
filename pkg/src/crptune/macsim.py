"""Saturated-traffic MAC simulation on one shared channel.

Assumptions:
  * every station always has a frame queued (saturation);
  * all stations hear each other (no hidden terminals, no capture);
  * time advances period by period, a period being one channel access
    attempt: contention overhead, then one data frame, then an ACK when
    exactly one station transmitted;
  * collided frames cost a full data airtime and are retried in the next
    period; nothing else (no EIFS, no retry limit).

Five access methods share this loop: binary exponential backoff as in
802.11b, Idle Sense, an additive-increase variant, and two k-round
splitting protocols (fixed CONTI probabilities and arbitrary probability
trees from the tuner).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crp import RngLike, _as_rng, run_crp
from .tree import ProbabilityTree, conti_tree

__all__ = [
    "PhyTimings",
    "packet_airtime",
    "ProtocolConfig",
    "SimResult",
    "jain_index",
    "simulate",
    "beb_update",
    "idle_sense_update",
    "additive_update",
    "PROTOCOL_KINDS",
]

PROTOCOL_KINDS = ("beb_80211b", "idle_sense", "additive_cw", "conti", "tree_crp")
_BACKOFF_KINDS = ("beb_80211b", "idle_sense", "additive_cw")

CW_MIN = 32
CW_MAX = 1024


@dataclass(frozen=True)
class PhyTimings:
    """802.11b-style channel constants; all durations in microseconds."""

    sifs_us: float = 10.0
    difs_us: float = 50.0
    slot_us: float = 20.0
    payload_bytes: int = 1500
    phy_header_us: float = 96.0
    mac_overhead_data_bytes: int = 19
    mac_overhead_ack_bytes: int = 14
    rate_mbps: float = 11.0

    def __post_init__(self):
        for name in (
            "sifs_us",
            "difs_us",
            "slot_us",
            "payload_bytes",
            "phy_header_us",
            "mac_overhead_data_bytes",
            "mac_overhead_ack_bytes",
            "rate_mbps",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def data_airtime_us(self) -> float:
        return packet_airtime(self, "data")

    @property
    def ack_airtime_us(self) -> float:
        return packet_airtime(self, "ack")


def packet_airtime(timings: PhyTimings, kind: str = "data") -> float:
    """Airtime of one frame: PHY preamble plus serialized MAC bytes."""
    if kind == "data":
        nbytes = timings.payload_bytes + timings.mac_overhead_data_bytes
    elif kind == "ack":
        nbytes = timings.mac_overhead_ack_bytes
    else:
        raise ValueError(f"unknown frame kind {kind!r}")
    return timings.phy_header_us + 8.0 * nbytes / timings.rate_mbps


def beb_update(cw: int, success: bool, cw_min: int = CW_MIN, cw_max: int = CW_MAX) -> int:
    """Binary exponential backoff: reset on success, double on collision."""
    return cw_min if success else min(cw_max, 2 * cw)


def idle_sense_update(
    cw: float,
    avg_idle: float,
    target_idle: float = 5.68,
    growth: float = 1.2,
    cw_min: float = CW_MIN,
    cw_max: float = CW_MAX,
) -> float:
    """AIMD on the observed mean idle slots between transmissions.

    Too few idle slots means the channel is over-contended, so CW grows
    multiplicatively; otherwise it decays toward cw_min.
    """
    if avg_idle < target_idle:
        return min(cw_max, cw * growth)
    return max(cw_min, 2.0 * cw / (2.0 + 1e-3 * cw))


def additive_update(
    cw: int,
    success: bool,
    coin: float,
    step: int = 32,
    decrease_prob: float = 0.1809,
    cw_min: int = CW_MIN,
    cw_max: int = CW_MAX,
) -> int:
    """Additive-step backoff: +step on collision, probabilistic -step on
    success (coin is a uniform draw in [0, 1))."""
    if not success:
        return min(cw_max, cw + step)
    return max(cw_min, cw - step) if coin < decrease_prob else cw


@dataclass(frozen=True)
class ProtocolConfig:
    """Which access method to run, with its parameters."""

    kind: str
    tree: ProbabilityTree | None = None
    cw_min: int = CW_MIN
    cw_max: int = CW_MAX
    target_idle: float = 5.68
    idle_window: int = 5
    growth: float = 1.2
    step: int = 32
    decrease_prob: float = 0.1809

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.kind == "tree_crp" and self.tree is None:
            raise ValueError("tree_crp needs an explicit tree")
        if self.kind == "conti" and self.tree is None:
            object.__setattr__(self, "tree", conti_tree())
        if not 1 <= self.cw_min <= self.cw_max:
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.idle_window < 1:
            raise ValueError("idle_window must be >= 1")

    @classmethod
    def from_kind(cls, kind: str, tree: ProbabilityTree | None = None) -> "ProtocolConfig":
        return cls(kind=kind, tree=tree)


@dataclass(frozen=True)
class SimResult:
    protocol: str
    n: int
    seed: int
    successes: int
    collisions: int
    sim_time_us: float
    throughput_mbps: float
    jain: float
    per_station: np.ndarray

    @property
    def periods(self) -> int:
        return self.successes + self.collisions

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.periods

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "seed": self.seed,
            "successes": self.successes,
            "collisions": self.collisions,
            "sim_time_us": self.sim_time_us,
            "throughput_mbps": self.throughput_mbps,
            "collision_rate": self.collision_rate,
            "jain": self.jain,
            "per_station": [int(x) for x in self.per_station],
        }


def jain_index(x) -> float:
    """Jain fairness index (sum x)^2 / (n * sum x^2); 1 means equal shares."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("need a nonempty 1-d allocation vector")
    if np.any(x < 0):
        raise ValueError("allocations must be nonnegative")
    total_sq = float(x.sum()) ** 2
    denom = len(x) * float((x * x).sum())
    if denom == 0.0:
        raise ValueError("all-zero allocation has no fairness index")
    return total_sq / denom


def _simulate_crp(
    cfg: ProtocolConfig, n: int, target: int, t: PhyTimings, gen: np.random.Generator
) -> tuple[int, float, np.ndarray]:
    data = t.data_airtime_us
    ack_part = t.sifs_us + t.ack_airtime_us
    base = t.difs_us + cfg.tree.depth * t.slot_us + data
    per_station = np.zeros(n, dtype=np.int64)
    successes = 0
    collisions = 0
    time_us = 0.0
    while successes < target:
        out = run_crp(cfg.tree, n, gen)
        if out.success:
            successes += 1
            per_station[out.winner] += 1
            time_us += base + ack_part
        else:
            collisions += 1
            time_us += base
    return collisions, time_us, per_station


def _simulate_backoff(
    cfg: ProtocolConfig, n: int, target: int, t: PhyTimings, gen: np.random.Generator
) -> tuple[int, float, np.ndarray]:
    data = t.data_airtime_us
    ack_part = t.sifs_us + t.ack_airtime_us
    per_station = np.zeros(n, dtype=np.int64)
    successes = 0
    collisions = 0
    time_us = 0.0

    kind = cfg.kind
    if kind == "idle_sense":
        # every station observes the same channel, so Idle Sense state
        # (window average, CW) stays identical across stations; keep one copy
        cw_shared = float(cfg.cw_min)
        idle_acc = 0.0
        observed = 0
        kappa = gen.integers(0, math.ceil(cw_shared), size=n)
    else:
        cw = np.full(n, cfg.cw_min, dtype=np.int64)
        kappa = gen.integers(0, cw)

    while successes < target:
        idle = int(kappa.min())
        tx = kappa == idle
        ntx = int(tx.sum())
        success = ntx == 1
        kappa = kappa - idle  # idle slots elapse for everyone; transmitters hit 0

        if success:
            successes += 1
            winner = int(np.flatnonzero(tx)[0])
            per_station[winner] += 1
            time_us += t.difs_us + idle * t.slot_us + data + ack_part
        else:
            collisions += 1
            time_us += t.difs_us + idle * t.slot_us + data

        if kind == "beb_80211b":
            cw[tx] = cfg.cw_min if success else np.minimum(cfg.cw_max, 2 * cw[tx])
            kappa[tx] = gen.integers(0, cw[tx])
        elif kind == "additive_cw":
            if success:
                coin = float(gen.random())
                cw[tx] = additive_update(
                    int(cw[tx][0]), True, coin, cfg.step, cfg.decrease_prob,
                    cfg.cw_min, cfg.cw_max,
                )
            else:
                cw[tx] = np.minimum(cfg.cw_max, cw[tx] + cfg.step)
            kappa[tx] = gen.integers(0, cw[tx])
        else:  # idle_sense
            idle_acc += idle
            observed += 1
            if observed == cfg.idle_window:
                cw_shared = idle_sense_update(
                    cw_shared, idle_acc / cfg.idle_window, cfg.target_idle,
                    cfg.growth, cfg.cw_min, cfg.cw_max,
                )
                idle_acc = 0.0
                observed = 0
            kappa[tx] = gen.integers(0, math.ceil(cw_shared), size=ntx)

    return collisions, time_us, per_station


def simulate(
    protocol: ProtocolConfig | str,
    n: int,
    target_successes: int = 10000,
    timings: PhyTimings | None = None,
    seed: int = 0,
) -> SimResult:
    """Run one saturated simulation until target_successes deliveries.

    Bit-for-bit deterministic in (protocol, n, seed, timings).  Timing
    constants only scale the clock; counts and per-station outcomes do
    not depend on them.
    """
    if isinstance(protocol, str):
        protocol = ProtocolConfig.from_kind(protocol)
    if n < 2:
        raise ValueError("a contention simulation needs n >= 2")
    if target_successes < 1:
        raise ValueError("target_successes must be >= 1")
    t = timings if timings is not None else PhyTimings()
    gen = _as_rng(int(seed))
    if protocol.kind in _BACKOFF_KINDS:
        collisions, time_us, per_station = _simulate_backoff(
            protocol, n, target_successes, t, gen
        )
    else:
        collisions, time_us, per_station = _simulate_crp(
            protocol, n, target_successes, t, gen
        )
    throughput = target_successes * t.payload_bytes * 8.0 / time_us
    return SimResult(
        protocol=protocol.kind,
        n=n,
        seed=int(seed),
        successes=target_successes,
        collisions=collisions,
        sim_time_us=time_us,
        throughput_mbps=throughput,
        jain=jain_index(per_station),
        per_station=per_station,
    )
