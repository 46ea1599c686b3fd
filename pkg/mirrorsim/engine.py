#!/usr/bin/env python3
"""Discrete-event simulation core.

The simulator keeps one global integer nanosecond clock and a heap of pending events. Events fire in
(time, insertion sequence) order, which makes every run with identical inputs reproduce the same
trace. Randomness is drawn from numpy generators derived from the global seed and a key, so that
adding a new consumer of random numbers does not perturb existing streams.
"""
from __future__ import annotations

import collections
import dataclasses
import heapq
import itertools
from typing import Any, Callable

import numpy as np

from . import config
from .logger import create_logger, get_level
from .units import serialization_delay

#: Leading keys of the random number streams, so that streams of different consumers never collide.
LINK_STREAM = 0
HOST_STREAM = 1
PLACEMENT_STREAM = 2
BLOCK_STREAM = 3


class SimulationError(RuntimeError):
    """Error raised when a simulation fails.

    Args:
        msg (str): Error message.

    Keyword Args:
        time (int | None): Simulation time of the offending event.
        seq (int | None): Insertion sequence number of the offending event.
        handler (str | None): Name of the offending handler.
    """
    def __init__(self, msg, time=None, seq=None, handler=None):
        """Initialize the SimulationError object."""
        self.time = time
        self.seq = seq
        self.handler = handler
        if time is not None:
            msg = f'{msg} (event {seq} at t={time} ns in {handler})'
        super().__init__(msg)


@dataclasses.dataclass(order=True)
class Event:
    """Scheduled event."""
    #: Fire time in nanoseconds.
    time: int
    #: Monotonically increasing insertion sequence number.
    seq: int
    #: Callable executed when the event fires.
    handler: Callable[..., Any] = dataclasses.field(compare=False)
    #: Positional arguments passed to the handler.
    args: tuple = dataclasses.field(compare=False, default=())
    #: Cancelled events stay in the queue but are skipped.
    cancelled: bool = dataclasses.field(compare=False, default=False)


def _handler_name(handler):
    """Get a stable, human-readable name of an event handler."""
    name = getattr(handler, '__qualname__', None)
    if name is None:
        name = getattr(getattr(handler, 'func', None), '__qualname__', type(handler).__name__)
    return name


class Simulator:
    """Event scheduler with a global clock.

    Keyword Args:
        seed (int): Global seed of all random number streams.
        trace (bool | None): Record trace lines, uses the global configuration for None.
        verbose (int | str | None): Level of output, uses the global level for None.
    """
    def __init__(self, seed=0, trace=None, verbose=None):
        """Initialize the Simulator object."""
        self.seed = int(seed)                                   #: Global seed.
        self.tracing = config.trace if trace is None else trace  #: Whether to record traces.
        self.now = 0                                             #: Current time in nanoseconds.
        self.lines: list[str] = []                               #: Recorded trace lines.
        self.processed = 0                                       #: Number of fired events.
        self._queue: list[Event] = []
        self._counter = itertools.count()
        self._log = create_logger(self, sim=self)
        self.verbose = verbose

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self._log.verbose = self._verbose

    @property
    def pending(self):
        """Number of queued events that are not cancelled."""
        return sum(not e.cancelled for e in self._queue)

    def schedule(self, delay, handler, *args):
        """Schedule a handler relative to the current time.

        Args:
            delay (int): Delay in nanoseconds.
            handler (Callable): Function to call.
            args: Arguments passed to the handler.

        Returns:
            Event: The scheduled event, usable with :meth:`cancel`.
        """
        return self.schedule_at(self.now + delay, handler, *args)

    def schedule_at(self, time, handler, *args):
        """Schedule a handler at an absolute time.

        Args:
            time (int): Fire time in nanoseconds.
            handler (Callable): Function to call.
            args: Arguments passed to the handler.

        Returns:
            Event: The scheduled event, usable with :meth:`cancel`.
        """
        if time < self.now:
            msg = f'Event scheduled in the past: t={time} ns is before now={self.now} ns.'
            raise ValueError(msg)
        event = Event(int(time), next(self._counter), handler, args)
        heapq.heappush(self._queue, event)
        return event

    @staticmethod
    def cancel(event):
        """Cancel a scheduled event.

        Args:
            event (Event | None): Event to cancel, None is ignored.
        """
        if event is not None:
            event.cancelled = True

    def run_until_idle(self, until=None):
        """Process events until the queue is empty.

        Keyword Args:
            until (int | None): Stop before the first event later than this time.

        Returns:
            int: Final clock value.
        """
        while self._queue:
            event = self._queue[0]
            if until is not None and event.time > until:
                break
            heapq.heappop(self._queue)
            if event.cancelled:
                continue
            self.now = event.time
            self.processed += 1
            try:
                event.handler(*event.args)
            except SimulationError:
                raise
            except Exception as err:
                msg = f'{type(err).__name__}: {err}'
                raise SimulationError(msg, time=event.time, seq=event.seq,
                                      handler=_handler_name(event.handler)) from err
        return self.now

    def generator(self, *key):
        """Create an independent random number generator.

        Args:
            key: Non-negative integers that identify the stream, e.g., a link id and a direction.

        Returns:
            Generator: Numpy random number generator.
        """
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))

    def trace(self, category, *fields):
        """Record a trace line.

        Args:
            category (str): Record category.
            fields: Record fields.
        """
        if not self.tracing:
            return
        self.lines.append(self._log.trace(self.now, category, *fields))


class Channel:
    """One direction of a full-duplex link.

    Frames are served FIFO. A frame starts its serialization once the previous frame left the
    interface, and arrives after its serialization and the propagation delay.

    Args:
        sim (Simulator): Simulator the channel schedules on.
        link_id (int): Id of the link.
        direction (int): 0 for the a-to-b direction, 1 for b-to-a.
        delay (int): Propagation delay in nanoseconds.
        bandwidth (int): Link rate in bits per second.
        deliver (Callable): Called with the frame on arrival.

    Keyword Args:
        loss (float): Bernoulli drop probability.
        external (bool): Whether the link lies outside of the data center.
    """
    def __init__(self, sim, link_id, direction, delay, bandwidth, deliver, loss=0.0,
                 external=False):
        """Initialize the Channel object."""
        if not 0 <= loss <= 1:
            msg = f'The drop probability has to be in [0, 1], got {loss}.'
            raise ValueError(msg)
        self.sim = sim
        self.link_id = link_id
        self.direction = direction
        self.delay = int(delay)
        self.bandwidth = int(bandwidth)
        self.loss = loss
        self.external = external
        self.deliver = deliver
        self.busy_until = 0                  #: Time the interface finishes its current frame.
        self.rng = sim.generator(LINK_STREAM, link_id, direction)
        # Frame counters
        self.offered = 0
        self.delivered = 0
        self.dropped = 0
        # Byte counters of delivered frames
        self.payload_bytes = 0
        self.total_bytes = 0
        self.ack_bytes = 0
        #: Bytes of dropped frames.
        self.wasted_bytes = 0
        #: Delivered payload bytes per (src_ip, dst_ip, reserved) header triple.
        self.flows: collections.Counter = collections.Counter()

    def transmit(self, frame):
        """Put a frame on the wire.

        Args:
            frame: Frame with a size in bytes, a payload, and addressing fields.

        Returns:
            int | None: Arrival time, or None if the frame is dropped.
        """
        size = frame.size
        if size <= 0:
            msg = f'The frame size has to be positive, got {size}.'
            raise ValueError(msg)
        self.offered += 1
        start = max(self.sim.now, self.busy_until)
        self.busy_until = start + serialization_delay(size, self.bandwidth)
        # Only draw from the stream when a loss can happen
        if self.loss > 0 and self.rng.random() < self.loss:
            self.dropped += 1
            self.wasted_bytes += size
            self.sim.trace('drop', self.link_id, self.direction, frame.src_ip, frame.dst_ip,
                           frame.seq, len(frame.payload), frame.reserved)
            return None
        arrival = self.busy_until + self.delay
        self.delivered += 1
        payload = len(frame.payload)
        self.payload_bytes += payload
        self.total_bytes += size
        if payload:
            self.flows[frame.src_ip, frame.dst_ip, frame.reserved] += payload
        else:
            self.ack_bytes += size
        self.sim.schedule_at(arrival, self.deliver, frame)
        return arrival


@dataclasses.dataclass
class TimingParams:
    """Processing delays of the end hosts and switches."""
    #: Time from a segment reception to the emission of its ACK in nanoseconds.
    ack_delay: int = 10_000
    #: HDFS packet handling before it is forwarded and persisted.
    packet_processing: int = 3_500_000
    #: Persist latency per HDFS packet.
    persist: int = 0
    #: Switch forwarding latency.
    switch_delay: int = 1_000
    #: Name Node RPC and controller notification latency.
    control_latency: int = 500_000
    #: ACK delay per pipeline position (0 is the client), overrides ack_delay.
    ack_delay_overrides: dict[int, int] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        """Validate the delays."""
        for field in ('ack_delay', 'packet_processing', 'persist', 'switch_delay',
                      'control_latency'):
            if getattr(self, field) < 0:
                msg = f'{field} has to be non-negative, got {getattr(self, field)}.'
                raise ValueError(msg)
        for position, delay in self.ack_delay_overrides.items():
            if delay < 0:
                msg = f'ACK delay of position {position} has to be non-negative, got {delay}.'
                raise ValueError(msg)

    def ack_delay_at(self, position):
        """ACK delay of a pipeline position.

        Args:
            position (int): Pipeline position, 0 is the client.

        Returns:
            int: ACK delay in nanoseconds.
        """
        return int(self.ack_delay_overrides.get(position, self.ack_delay))


@dataclasses.dataclass(frozen=True)
class EarlyAckParams:
    """Path and processing times that decide whether ACKs overtake virtual transmissions."""
    #: Transfer time from the client to the predecessor D_{j-1}.
    t_client_prev: float
    #: Time the predecessor needs until it passes a packet on.
    t_proc_prev: float
    #: Transfer time from the client to D_j.
    t_client_node: float
    #: Time D_j needs to transmit an ACK.
    t_proc_node: float
    #: Transfer time from D_j back to its predecessor.
    t_node_prev: float


def early_ack_times(params):
    """Times of the virtual transmission and of the ACK arrival at the predecessor.

    Args:
        params (EarlyAckParams): Timing parameters.

    Returns:
        tuple[float, float]: Virtual transmission time and ACK arrival time.
    """
    t_vtx = params.t_client_prev + params.t_proc_prev
    t_ack = params.t_client_node + params.t_proc_node + params.t_node_prev
    return t_vtx, t_ack


def check_early_ack_condition(params):
    """Predict whether an ACK arrives at the predecessor before its virtual transmission.

    Args:
        params (EarlyAckParams): Timing parameters.

    Returns:
        bool: True if the ACK overtakes the virtual transmission.
    """
    t_vtx, t_ack = early_ack_times(params)
    return t_vtx > t_ack
