"""Emulated ID-addressed half-duplex serial bus and its 100 Hz manager.

Frame layout (request and response share it):

    0xFF 0xFF | id | length | instruction | payload ... | checksum

length = payload length + 2; checksum = ~(id + length + instruction +
sum(payload)) & 0xFF.  The wire runs at 1 Mbps with 8N1 framing, so one
byte costs 10 bit-times and a 100 Hz cycle has a 10,000 bit-time budget.
The bus is strictly half duplex: the manager serializes one transaction
at a time and accounts a 2 byte-time turnaround between request and
response.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

__all__ = [
    "BITS_PER_BYTE_ON_WIRE",
    "BusFrame",
    "BadChecksumError",
    "CycleReport",
    "DeviceCommunicationManager",
    "DecodedFrame",
    "DuplicateIdError",
    "FrameError",
    "ModuleDescriptor",
    "NoHeaderError",
    "Registry",
    "TruncatedFrameError",
    "Transaction",
    "bus_utilization",
    "decode_frame",
    "default_registry",
    "encode_frame",
]

HEADER = b"\xff\xff"
BROADCAST_ID = 254
MAX_DEVICE_ID = 254
MAX_PAYLOAD = 250

INSTR_PING = 0x01
INSTR_READ = 0x02
INSTR_WRITE = 0x03
INSTR_STATUS = 0x55

INSTRUCTION_NAMES = {
    INSTR_PING: "ping",
    INSTR_READ: "read",
    INSTR_WRITE: "write",
    INSTR_STATUS: "status",
}

BIT_RATE = 1_000_000
CYCLE_HZ = 100
BITS_PER_BYTE_ON_WIRE = 10  # 8N1: start bit + 8 data + stop bit
CYCLE_BIT_BUDGET = BIT_RATE // CYCLE_HZ
TURNAROUND_BITS = 2 * BITS_PER_BYTE_ON_WIRE

MODULE_KINDS = (
    "wheel-actuator",
    "arm-joint",
    "gripper",
    "ptru-joint",
    "imu",
    "sonar-array",
    "force-sensor",
)


class FrameError(ValueError):
    """Base class for framing and checksum failures."""


class BadChecksumError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class NoHeaderError(FrameError):
    pass


class DuplicateIdError(ValueError):
    pass


@dataclass(frozen=True)
class BusFrame:
    device_id: int
    instruction: int
    payload: bytes = b""


@dataclass(frozen=True)
class DecodedFrame:
    frame: BusFrame
    skipped: int  # junk bytes discarded before the header
    end: int      # index one past the frame in the input buffer


def _checksum(device_id: int, length: int, instruction: int, payload: bytes) -> int:
    return ~(device_id + length + instruction + sum(payload)) & 0xFF


def encode_frame(device_id: int, instruction: int, payload: bytes = b"") -> bytes:
    """Serialize one frame; deterministic and bit-exact."""
    if not 0 <= device_id <= MAX_DEVICE_ID:
        raise ValueError(f"device id {device_id} out of range 0..{MAX_DEVICE_ID}")
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= instruction <= 0xFF:
        raise ValueError("instruction must be one byte")
    length = len(payload) + 2
    return bytes(
        (
            *HEADER,
            device_id,
            length,
            instruction,
            *payload,
            _checksum(device_id, length, instruction, payload),
        )
    )


def frame_size(payload_len: int) -> int:
    return 6 + payload_len


def decode_frame(data: bytes, start: int = 0) -> DecodedFrame:
    """Parse the next frame in data, resynchronizing on the 0xFF 0xFF header.

    Raises NoHeaderError when no header exists, TruncatedFrameError when a
    header is found but bytes are missing, BadChecksumError on mismatch.
    """
    idx = data.find(HEADER, start)
    # 0xFF..0xFF runs: the header is the *last* two 0xFF before a non-0xFF id
    while idx != -1 and idx + 2 < len(data) and data[idx + 2] == 0xFF and idx + 3 < len(data) and data[idx + 3] != 0xFF:
        idx += 1
    if idx == -1:
        raise NoHeaderError(f"no frame header in {len(data) - start} bytes")
    if idx + 4 > len(data):
        raise TruncatedFrameError("header found but frame incomplete")
    device_id = data[idx + 2]
    length = data[idx + 3]
    if length < 2:
        raise BadChecksumError(f"length byte {length} below minimum 2")
    end = idx + 4 + length
    if end > len(data):
        raise TruncatedFrameError("frame body incomplete")
    instruction = data[idx + 4]
    payload = bytes(data[idx + 5 : end - 1])
    expect = _checksum(device_id, length, instruction, payload)
    got = data[end - 1]
    if got != expect:
        raise BadChecksumError(f"checksum 0x{got:02X} != expected 0x{expect:02X}")
    return DecodedFrame(
        frame=BusFrame(device_id, instruction, payload),
        skipped=idx - start,
        end=end,
    )


@dataclass(frozen=True)
class ModuleDescriptor:
    """One addressable module on the bus."""

    device_id: int
    kind: str
    label: str = ""
    read_payload_bytes: int = 0
    write_payload_bytes: int = 0
    poll_rate_hz: int = CYCLE_HZ

    def __post_init__(self) -> None:
        if not 0 <= self.device_id < BROADCAST_ID:
            raise ValueError("device_id must be 0..253")
        if self.kind not in MODULE_KINDS:
            raise ValueError(f"unknown module kind {self.kind!r}")
        if not 0 <= self.read_payload_bytes <= MAX_PAYLOAD:
            raise ValueError("read_payload_bytes out of range")
        if not 0 <= self.write_payload_bytes <= MAX_PAYLOAD:
            raise ValueError("write_payload_bytes out of range")
        if not 0 < self.poll_rate_hz <= CYCLE_HZ:
            raise ValueError("poll_rate_hz must be in 1..100")


class Registry:
    """Module table keyed by unique device id."""

    def __init__(self, descriptors: Optional[list[ModuleDescriptor]] = None):
        self._by_id: dict[int, ModuleDescriptor] = {}
        for d in descriptors or []:
            self.register(d)

    def register(self, descriptor: ModuleDescriptor) -> "Registry":
        if descriptor.device_id in self._by_id:
            raise DuplicateIdError(f"device id {descriptor.device_id} already registered")
        self._by_id[descriptor.device_id] = descriptor
        return self

    def get(self, device_id: int) -> ModuleDescriptor:
        return self._by_id[device_id]

    def __contains__(self, device_id: int) -> bool:
        return device_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[ModuleDescriptor]:
        return iter(sorted(self._by_id.values(), key=lambda d: d.device_id))

    def by_kind(self, kind: str) -> list[ModuleDescriptor]:
        return [d for d in self if d.kind == kind]


def default_registry() -> Registry:
    """Reference platform inventory: 4 wheels, 6 arm joints, 2 grippers,
    3 head joints, 2 IMUs, and the 12-element sonar ring as one array module.
    """
    mods: list[ModuleDescriptor] = []
    for i in range(4):
        mods.append(ModuleDescriptor(1 + i, "wheel-actuator", f"wheel{i + 1}", 8, 4, 100))
    arm = ("lift", "theta1", "theta2", "theta3", "theta4", "theta5")
    for i, label in enumerate(arm):
        mods.append(ModuleDescriptor(10 + i, "arm-joint", label, 8, 4, 100))
    mods.append(ModuleDescriptor(20, "gripper", "gripper", 4, 2, 50))
    mods.append(ModuleDescriptor(21, "gripper", "base_gripper", 4, 2, 50))
    for i, label in enumerate(("pan", "tilt", "roll")):
        mods.append(ModuleDescriptor(30 + i, "ptru-joint", label, 8, 4, 100))
    mods.append(ModuleDescriptor(40, "imu", "imu_body", 40, 0, 100))
    mods.append(ModuleDescriptor(41, "imu", "imu_head", 40, 0, 100))
    mods.append(ModuleDescriptor(50, "sonar-array", "sonar", 48, 0, 20))
    return Registry(mods)


@dataclass(frozen=True)
class Transaction:
    device_id: int
    instruction: int
    status: str           # "ok" or "timeout"
    start_bits: int       # wire-time offset within the cycle, bit-times
    end_bits: int


@dataclass(frozen=True)
class CycleReport:
    cycle_index: int
    bytes_on_wire: int
    bit_time_budget: int
    transactions: tuple[Transaction, ...]
    overrun: bool

    @property
    def bit_times(self) -> int:
        return self.bytes_on_wire * BITS_PER_BYTE_ON_WIRE


def _due(cycle_index: int, rate_hz: int) -> bool:
    return (cycle_index + 1) * rate_hz // CYCLE_HZ > cycle_index * rate_hz // CYCLE_HZ


class DeviceCommunicationManager:
    """Polls every registered module on a fixed 100 Hz schedule.

    Each cycle reads all modules due at their poll rate (ascending id),
    then flushes pending writes (ascending id).  Device behavior is
    supplied as read/write callables; missing or unresponsive devices
    produce timeout transactions.
    """

    def __init__(self, registry: Registry):
        self.registry = registry
        self.cycle_index = 0
        self._pending_writes: dict[int, bytes] = {}
        self._readers: dict[int, Callable[[], bytes]] = {}
        self._writers: dict[int, Callable[[bytes], None]] = {}
        self._last_reads: dict[int, bytes] = {}
        self._offline: set[int] = set()

    def attach_device(
        self,
        device_id: int,
        reader: Optional[Callable[[], bytes]] = None,
        writer: Optional[Callable[[bytes], None]] = None,
    ) -> None:
        if device_id not in self.registry:
            raise KeyError(f"device id {device_id} not in registry")
        if reader is not None:
            self._readers[device_id] = reader
        if writer is not None:
            self._writers[device_id] = writer

    def set_offline(self, device_id: int, offline: bool = True) -> None:
        """Mark a module unresponsive; its transactions report timeouts."""
        if offline:
            self._offline.add(device_id)
        else:
            self._offline.discard(device_id)

    def queue_write(self, device_id: int, payload: bytes) -> None:
        desc = self.registry.get(device_id)
        if len(payload) != desc.write_payload_bytes:
            raise ValueError(
                f"write payload for id {device_id} must be {desc.write_payload_bytes} bytes"
            )
        self._pending_writes[device_id] = payload

    def last_read(self, device_id: int) -> Optional[bytes]:
        return self._last_reads.get(device_id)

    def run_cycle(self) -> CycleReport:
        """Execute one 10 ms virtual cycle; deterministic given the pending state."""
        txns: list[Transaction] = []
        wire_bytes = 0
        clock_bits = 0

        def wire(n_bytes: int) -> int:
            nonlocal wire_bytes, clock_bits
            wire_bytes += n_bytes
            clock_bits += n_bytes * BITS_PER_BYTE_ON_WIRE
            return clock_bits

        for desc in self.registry:
            if not _due(self.cycle_index, desc.poll_rate_hz):
                continue
            start = clock_bits
            wire(frame_size(0))  # READ request carries no payload
            clock_bits += TURNAROUND_BITS
            if desc.device_id in self._offline:
                txns.append(
                    Transaction(desc.device_id, INSTR_READ, "timeout", start, clock_bits)
                )
                continue
            reader = self._readers.get(desc.device_id)
            payload = reader() if reader is not None else bytes(desc.read_payload_bytes)
            if len(payload) != desc.read_payload_bytes:
                raise ValueError(
                    f"device {desc.device_id} returned {len(payload)} bytes, "
                    f"descriptor says {desc.read_payload_bytes}"
                )
            self._last_reads[desc.device_id] = payload
            end = wire(frame_size(len(payload)))
            txns.append(Transaction(desc.device_id, INSTR_READ, "ok", start, end))

        for device_id in sorted(self._pending_writes):
            desc = self.registry.get(device_id)
            if not _due(self.cycle_index, desc.poll_rate_hz):
                continue
            payload = self._pending_writes.pop(device_id)
            start = clock_bits
            wire(frame_size(len(payload)))
            clock_bits += TURNAROUND_BITS
            if device_id in self._offline:
                txns.append(
                    Transaction(device_id, INSTR_WRITE, "timeout", start, clock_bits)
                )
                continue
            writer = self._writers.get(device_id)
            if writer is not None:
                writer(payload)
            end = wire(frame_size(0))  # empty STATUS acknowledge
            txns.append(Transaction(device_id, INSTR_WRITE, "ok", start, end))

        report = CycleReport(
            cycle_index=self.cycle_index,
            bytes_on_wire=wire_bytes,
            bit_time_budget=CYCLE_BIT_BUDGET,
            transactions=tuple(txns),
            overrun=wire_bytes * BITS_PER_BYTE_ON_WIRE > CYCLE_BIT_BUDGET,
        )
        self.cycle_index += 1
        return report


def _bytes_per_poll(desc: ModuleDescriptor) -> int:
    n = frame_size(0) + frame_size(desc.read_payload_bytes)
    if desc.write_payload_bytes > 0:
        n += frame_size(desc.write_payload_bytes) + frame_size(0)
    return n


def bus_utilization(registry: Registry) -> float:
    """Steady-state wire occupancy; above 1.0 the schedule is infeasible."""
    bits = sum(
        _bytes_per_poll(d) * d.poll_rate_hz * BITS_PER_BYTE_ON_WIRE for d in registry
    )
    return bits / BIT_RATE
