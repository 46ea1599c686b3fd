#!/usr/bin/env python3
"""Scenario configuration.

A scenario is a plain mapping with the sections topology, replication, transport, and engine, e.g.,
loaded from a YAML file. Every key has a documented default, unknown sections and keys are rejected.
"""
from __future__ import annotations

import dataclasses
from typing import Any

import yaml

from .engine import TimingParams
from .topology import LinkParams
from .transport import TransportParams
from .units import KB, MB, ms, s, us

#: Valid client locations.
CLIENT_CLASSES = ('outside', 'co-rack', 'cross-rack')
#: Valid replication modes.
MODES = ('chain', 'mirrored', 'both')


class ConfigError(ValueError):
    """Error raised for invalid scenario configurations."""


@dataclasses.dataclass
class TopologySection:
    """Network shape and link parameters."""
    core_count: int = 1
    agg_per_core: int = 2
    racks_per_agg: int = 2
    hosts_per_rack: int = 4
    link_delay_ns: int = 5 * us
    link_bandwidth_bps: int = 1_000_000_000
    loss: float = 0.0
    #: Location of the client: outside, co-rack, or cross-rack.
    client: str = 'outside'

    def validate(self):
        """Check the values."""
        _positive(self, 'core_count', 'agg_per_core', 'racks_per_agg', 'hosts_per_rack',
                  'link_bandwidth_bps')
        _non_negative(self, 'link_delay_ns')
        if not 0 <= self.loss < 1:
            msg = f'topology.loss has to be in [0, 1), got {self.loss}.'
            raise ConfigError(msg)
        if self.client not in CLIENT_CLASSES:
            msg = f'topology.client has to be one of {CLIENT_CLASSES}, got "{self.client}".'
            raise ConfigError(msg)

    @property
    def link_params(self):
        """Link parameters of all links."""
        return LinkParams(self.link_delay_ns, self.link_bandwidth_bps, self.loss)


@dataclasses.dataclass
class ReplicationSection:
    """Block write parameters."""
    k: int = 3
    #: chain, mirrored, or both.
    mode: str = 'both'
    block_size: int = 4 * MB
    packet_size: int = 64 * KB
    write_max_packets: int = 20
    #: Sequential blocks per run.
    blocks: int = 1
    #: Explicit data node ids, otherwise the rack-aware placement policy decides.
    placement: list[int] | None = None

    def validate(self):
        """Check the values."""
        _positive(self, 'k', 'block_size', 'packet_size', 'write_max_packets', 'blocks')
        if self.mode not in MODES:
            msg = f'replication.mode has to be one of {MODES}, got "{self.mode}".'
            raise ConfigError(msg)
        if self.placement is not None and len(self.placement) != self.k:
            msg = f'replication.placement needs k={self.k} nodes, got {self.placement}.'
            raise ConfigError(msg)

    @property
    def modes(self):
        """Modes to simulate."""
        return ('chain', 'mirrored') if self.mode == 'both' else (self.mode,)


@dataclasses.dataclass
class TransportSection:
    """Transport parameters."""
    mss: int = 1460
    rto_ns: int = 200 * ms
    rto_max_ns: int = 2 * s
    #: Receive buffer, None uses write_max_packets x packet_size.
    rcv_buffer: int | None = None
    dupack_threshold: int = 3

    def validate(self):
        """Check the values."""
        _positive(self, 'mss', 'rto_ns', 'rto_max_ns', 'dupack_threshold')
        if self.rcv_buffer is not None:
            _positive(self, 'rcv_buffer')
        if self.rto_max_ns < self.rto_ns:
            msg = 'transport.rto_max_ns has to be at least transport.rto_ns.'
            raise ConfigError(msg)


@dataclasses.dataclass
class EngineSection:
    """Simulation and processing time parameters."""
    seed: int = 0
    trace: bool = False
    ack_delay_ns: int = 10 * us
    packet_processing_ns: int = 3_500 * us
    persist_ns: int = 0
    switch_delay_ns: int = 1 * us
    control_latency_ns: int = 500 * us
    #: ACK delay per pipeline position (0 is the client).
    ack_delay_overrides: dict[int, int] = dataclasses.field(default_factory=dict)

    def validate(self):
        """Check the values."""
        _non_negative(self, 'seed', 'ack_delay_ns', 'packet_processing_ns', 'persist_ns',
                      'switch_delay_ns', 'control_latency_ns')
        try:
            self.ack_delay_overrides = {int(p): int(d) for p, d in self.ack_delay_overrides.items()}
        except (AttributeError, TypeError, ValueError) as err:
            msg = f'engine.ack_delay_overrides has to map positions to delays: {err}'
            raise ConfigError(msg) from err
        if any(p < 0 or d < 0 for p, d in self.ack_delay_overrides.items()):
            msg = 'engine.ack_delay_overrides needs non-negative positions and delays.'
            raise ConfigError(msg)

    @property
    def timing(self):
        """Processing delays."""
        return TimingParams(self.ack_delay_ns, self.packet_processing_ns, self.persist_ns,
                            self.switch_delay_ns, self.control_latency_ns,
                            dict(self.ack_delay_overrides))


_SECTIONS = {
    'topology': TopologySection,
    'replication': ReplicationSection,
    'transport': TransportSection,
    'engine': EngineSection,
}


@dataclasses.dataclass
class ScenarioConfig:
    """Complete configuration of one scenario."""
    name: str = 'default'
    topology: TopologySection = dataclasses.field(default_factory=TopologySection)
    replication: ReplicationSection = dataclasses.field(default_factory=ReplicationSection)
    transport: TransportSection = dataclasses.field(default_factory=TransportSection)
    engine: EngineSection = dataclasses.field(default_factory=EngineSection)

    def validate(self):
        """Check all sections.

        Returns:
            ScenarioConfig: The validated configuration.
        """
        for section in _SECTIONS:
            getattr(self, section).validate()
        return self

    @property
    def transport_params(self):
        """Transport parameters, the receive buffer follows the HDFS window if unset."""
        t = self.transport
        rcv_buffer = t.rcv_buffer
        if rcv_buffer is None:
            rcv_buffer = self.replication.write_max_packets * self.replication.packet_size
        return TransportParams(mss=t.mss, rto=t.rto_ns, rto_max=t.rto_max_ns,
                               rcv_buffer=rcv_buffer, dupack_threshold=t.dupack_threshold)

    def to_dict(self):
        """Nested dictionary representation."""
        return dataclasses.asdict(self)

    def replace(self, **changes):
        """Copy with changed keys given as section__key=value, e.g., replication__k=4."""
        data = self.to_dict()
        for key, value in changes.items():
            section, _, field = key.partition('__')
            if field:
                data[section][field] = value
            else:
                data[section] = value
        return from_dict(data)


def from_dict(data):
    """Create a validated configuration from a mapping.

    Args:
        data (dict | None): Sections and keys, missing ones use defaults.

    Returns:
        ScenarioConfig: Validated configuration.
    """
    data = dict(data or {})
    name = data.pop('name', 'default')
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        msg = f'Unknown scenario section(s) {sorted(unknown)}, valid are {list(_SECTIONS)}.'
        raise ConfigError(msg)
    sections = {}
    for section, cls in _SECTIONS.items():
        values = data.get(section) or {}
        if not isinstance(values, dict):
            msg = f'Section "{section}" has to be a mapping, got {type(values).__name__}.'
            raise ConfigError(msg)
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - valid
        if unknown:
            msg = f'Unknown key(s) {sorted(unknown)} in section "{section}".'
            raise ConfigError(msg)
        sections[section] = cls(**values)
    return ScenarioConfig(str(name), **sections).validate()


def apply_overrides(cfg, overrides):
    """Apply section.key=value overrides, values are parsed as YAML scalars.

    Args:
        cfg (ScenarioConfig): Configuration.
        overrides (list[str]): Overrides, e.g., ['replication.k=4', 'topology.loss=0.01'].

    Returns:
        ScenarioConfig: New validated configuration.
    """
    data = cfg.to_dict()
    for item in overrides:
        key, sep, raw = item.partition('=')
        section, dot, field = key.strip().partition('.')
        if not sep or (not dot and section != 'name'):
            msg = f'Overrides have the form section.key=value, got "{item}".'
            raise ConfigError(msg)
        value: Any = yaml.safe_load(raw)
        if section == 'name':
            data['name'] = raw
        elif section not in data or not isinstance(data[section], dict):
            msg = f'Unknown scenario section "{section}".'
            raise ConfigError(msg)
        else:
            data[section][field] = value
    return from_dict(data)


def _positive(obj, *fields):
    """Raise if a field is not a positive number."""
    name = type(obj).__name__.replace('Section', '').lower()
    for field in fields:
        value = getattr(obj, field)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            msg = f'{name}.{field} has to be positive, got {value!r}.'
            raise ConfigError(msg)


def _non_negative(obj, *fields):
    """Raise if a field is a negative number."""
    name = type(obj).__name__.replace('Section', '').lower()
    for field in fields:
        value = getattr(obj, field)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
            msg = f'{name}.{field} has to be non-negative, got {value!r}.'
            raise ConfigError(msg)
