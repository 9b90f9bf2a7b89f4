"""Packet pacing policies.

Three modes gate when the next data packet may leave the sender:

* line rate — never delays; the interface itself is the only limit,
* fixed rate — token bucket refilled at a configured bit rate,
* TFRC — token bucket whose rate follows an equation-based controller fed
  entirely from sender-side observations (negative-acknowledgement holes
  and solicited status round trips), so the receiver needs no changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Loss-interval weights, newest interval first.
TFRC_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 0.8, 0.6, 0.4, 0.2)


def tfrc_throughput(s: int, rtt: float, p: float, t_rto: float, x_max: float) -> float:
    """Allowed send rate in bytes/s for segment size ``s``.

    Zero loss clamps to ``x_max``; otherwise the standard throughput
    equation with one new packet acknowledged per status round:

        X = s / (R*sqrt(2p/3) + t_RTO * 3*sqrt(3p/8) * p * (1 + 32 p^2))
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("loss event rate must be in [0, 1]")
    if rtt <= 0.0 or s < 1:
        raise ValueError("need rtt > 0 and s >= 1")
    if p == 0.0:
        return x_max
    denom = (rtt * math.sqrt(2.0 * p / 3.0)
             + t_rto * 3.0 * math.sqrt(3.0 * p / 8.0) * p * (1.0 + 32.0 * p * p))
    return min(x_max, s / denom)


def _invert_throughput(s: int, rtt: float, target_rate: float) -> float:
    """Loss-interval length whose equation rate equals ``target_rate``.

    Bisection on p; the equation is continuous and strictly decreasing in p.
    """
    lo, hi = 1e-12, 1.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if tfrc_throughput(s, rtt, mid, 4.0 * rtt, math.inf) > target_rate:
            lo = mid
        else:
            hi = mid
    return 1.0 / math.sqrt(lo * hi)


@dataclass
class TfrcState:
    """Sender-side equation-based rate controller state."""

    s: int = 1452                 # segment size, bytes
    rtt: float = 0.5              # smoothed round-trip time, seconds
    x_max: float = float("inf")   # rate cap, bytes/s
    p: float = 0.0                # loss event rate
    x: float = 0.0                # allowed rate, bytes/s
    loss_intervals: list[float] = field(default_factory=list)  # newest first
    current_interval: float = 0.0  # packets since the last loss event
    _had_loss: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        if self.x == 0.0:
            self.x = min(self.s / self.rtt, self.x_max)

    @property
    def t_rto(self) -> float:
        return 4.0 * self.rtt

    def _loss_event_rate(self) -> float:
        if not self.loss_intervals:
            return 0.0
        closed = self.loss_intervals[:len(TFRC_WEIGHTS)]
        # The open interval may replace the oldest history entry when that
        # raises the mean, letting the rate recover during loss-free runs.
        with_open = [self.current_interval] + closed[:len(TFRC_WEIGHTS) - 1]
        means = []
        for intervals in (closed, with_open):
            wsum = sum(TFRC_WEIGHTS[:len(intervals)])
            means.append(sum(w * i for w, i in zip(TFRC_WEIGHTS, intervals)) / wsum)
        mean = max(means)
        return 1.0 / mean if mean > 0 else 1.0

    def on_feedback(self, rtt_sample: float | None, new_loss_events: int,
                    packets_since_last: float) -> None:
        """Fold one status round of observations into the controller.

        ``new_loss_events`` counts loss events already collapsed to at most
        one per round-trip time by the caller; packets seen since the last
        feedback are split evenly across them. The allowed rate never moves
        by more than a factor of two per feedback.
        """
        if new_loss_events < 0 or packets_since_last < new_loss_events:
            raise ValueError("need packets_since_last >= new_loss_events >= 0")
        if rtt_sample is not None:
            if rtt_sample <= 0:
                raise ValueError("rtt sample must be positive")
            self.rtt = 0.9 * self.rtt + 0.1 * rtt_sample

        if new_loss_events == 0:
            self.current_interval += packets_since_last
        elif not self._had_loss:
            # First loss ever: seed history so the allowed rate halves from
            # the currently observed level.
            self._had_loss = True
            seed = _invert_throughput(self.s, self.rtt, max(self.x, 1.0) / 2.0)
            self.loss_intervals = [seed]
            self.current_interval = 0.0
        else:
            share = packets_since_last / new_loss_events
            for _ in range(new_loss_events):
                self.current_interval += share
                self.loss_intervals.insert(0, self.current_interval)
                self.current_interval = 0.0
            del self.loss_intervals[len(TFRC_WEIGHTS):]

        self.p = self._loss_event_rate()
        calculated = tfrc_throughput(self.s, self.rtt, self.p, self.t_rto, self.x_max)
        self.x = min(max(calculated, self.x / 2.0), self.x * 2.0, self.x_max)
        # Never starve below one segment per RTO, or the controller would
        # stop getting the feedback it needs to ever recover.
        self.x = max(self.x, min(self.s / self.t_rto, self.x_max))


class Pacer:
    """Decides the earliest time the next packet may be sent.

    ``mode`` is ``"line"``, ``"fixed"``, or ``"tfrc"``. Fixed and TFRC modes
    run a token bucket: credit accrues at the governing byte rate up to
    ``burst_cap``, and a packet may leave once credit covers it. Line rate
    imposes no delay at all.
    """

    def __init__(self, mode: str = "line", rate_bps: float = 0.0,
                 burst_cap: int = 8 * 1452, tfrc: TfrcState | None = None):
        if mode not in ("line", "fixed", "tfrc"):
            raise ValueError(f"unknown pacer mode {mode!r}")
        if mode == "fixed" and rate_bps <= 0:
            raise ValueError("fixed mode needs a positive rate")
        self.mode = mode
        self.rate_bps = rate_bps
        self.burst_cap = burst_cap
        self.tfrc = tfrc if tfrc is not None else (TfrcState() if mode == "tfrc" else None)
        self.bucket = float(burst_cap)
        self.last_send = 0.0
        self._last_refill = 0.0

    def _rate_bytes(self) -> float:
        if self.mode == "fixed":
            return self.rate_bps / 8.0
        assert self.tfrc is not None
        return self.tfrc.x

    def earliest_send(self, pkt_bytes: int, now: float) -> float:
        """Token-bucket admission time; commits the send at that time."""
        if pkt_bytes < 1:
            raise ValueError("pkt_bytes must be >= 1")
        if self.mode == "line":
            self.last_send = now
            return now

        rate = self._rate_bytes()
        self.bucket = min(self.burst_cap,
                          self.bucket + (now - self._last_refill) * rate)
        need = min(pkt_bytes, self.burst_cap)
        if self.bucket >= need:
            when = now
        else:
            when = now + (need - self.bucket) / rate if rate > 0 else math.inf
            self.bucket = float(need)
        self.bucket -= pkt_bytes
        self._last_refill = when
        self.last_send = when
        return when
