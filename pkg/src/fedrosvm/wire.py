"""Binary message framing for the federation protocol.

Every message travels as one frame: a 4-byte big-endian payload length
followed by the payload. Payloads start with a 1-byte tag and contain only
big-endian fixed-width fields (uint32 for counters, IEEE-754 float64 for
model coordinates), so the same logical message always produces the same
bytes on every platform. That is what makes the TCP transport bit-identical
to the in-process one.

Message payloads:

  RoundStart   0x01 | t: u32 | vec w      server -> clients, round begins
  SmResult     0x02 | g: u32 | vec v      client subgradient
  AdmmResult   0x03 | g: u32 | vec w_g    client proximal iterate
  Broadcast    0x04 | t: u32 | vec w      server -> clients, updated model
  Shutdown     0x05                       server -> clients, end of run

where `vec` is u32 count followed by count float64 values. Vectors must be
finite: NaN or infinity anywhere is a protocol error on both ends.
"""

import struct
from dataclasses import dataclass

import numpy as np

# Upper bound on a single payload; a peer announcing more is assumed broken
# or hostile and the connection is dropped.
DEFAULT_FRAME_CAP = 1 << 20

_TAG_ROUND_START = 0x01
_TAG_SM_RESULT = 0x02
_TAG_ADMM_RESULT = 0x03
_TAG_BROADCAST = 0x04
_TAG_SHUTDOWN = 0x05


class ProtocolError(Exception):
    """Malformed, oversized, or truncated wire data."""


@dataclass(frozen=True)
class RoundStart:
    t: int
    w: np.ndarray


@dataclass(frozen=True)
class SmResult:
    g: int
    v: np.ndarray


@dataclass(frozen=True)
class AdmmResult:
    g: int
    w_g: np.ndarray


@dataclass(frozen=True)
class Broadcast:
    t: int
    w: np.ndarray


@dataclass(frozen=True)
class Shutdown:
    pass


def _check_u32(value, name):
    if not (0 <= int(value) <= 0xFFFFFFFF):
        raise ProtocolError(f"{name} out of uint32 range: {value}")
    return int(value)


def _pack_vec(v):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ProtocolError(f"vector payloads must be 1-d, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ProtocolError("refusing to encode non-finite vector")
    return struct.pack(">I", arr.size) + arr.astype(">f8").tobytes()


def _unpack_vec(payload, off):
    if off + 4 > len(payload):
        raise ProtocolError("truncated vector header")
    (count,) = struct.unpack_from(">I", payload, off)
    off += 4
    end = off + 8 * count
    if end > len(payload):
        raise ProtocolError("truncated vector body")
    arr = np.frombuffer(payload[off:end], dtype=">f8").astype(np.float64)
    if not np.isfinite(arr).all():
        raise ProtocolError("received non-finite vector")
    return arr, end


def encode_message(msg):
    """Serialize a protocol message to its payload bytes (no length prefix)."""
    if isinstance(msg, RoundStart):
        return (
            struct.pack(">BI", _TAG_ROUND_START, _check_u32(msg.t, "t"))
            + _pack_vec(msg.w)
        )
    if isinstance(msg, SmResult):
        return (
            struct.pack(">BI", _TAG_SM_RESULT, _check_u32(msg.g, "g"))
            + _pack_vec(msg.v)
        )
    if isinstance(msg, AdmmResult):
        return (
            struct.pack(">BI", _TAG_ADMM_RESULT, _check_u32(msg.g, "g"))
            + _pack_vec(msg.w_g)
        )
    if isinstance(msg, Broadcast):
        return (
            struct.pack(">BI", _TAG_BROADCAST, _check_u32(msg.t, "t"))
            + _pack_vec(msg.w)
        )
    if isinstance(msg, Shutdown):
        return struct.pack(">B", _TAG_SHUTDOWN)
    raise ProtocolError(f"unknown message type: {type(msg).__name__}")


def decode_message(payload):
    """Parse payload bytes back into a protocol message.

    Trailing bytes after a well-formed message are an error; a frame holds
    exactly one message.
    """
    if len(payload) < 1:
        raise ProtocolError("empty payload")
    tag = payload[0]
    if tag == _TAG_SHUTDOWN:
        if len(payload) != 1:
            raise ProtocolError("trailing bytes after shutdown")
        return Shutdown()
    if len(payload) < 5:
        raise ProtocolError("truncated message header")
    (field,) = struct.unpack_from(">I", payload, 1)
    vec, end = _unpack_vec(payload, 5)
    if end != len(payload):
        raise ProtocolError("trailing bytes after message")
    if tag == _TAG_ROUND_START:
        return RoundStart(t=field, w=vec)
    if tag == _TAG_SM_RESULT:
        return SmResult(g=field, v=vec)
    if tag == _TAG_ADMM_RESULT:
        return AdmmResult(g=field, w_g=vec)
    if tag == _TAG_BROADCAST:
        return Broadcast(t=field, w=vec)
    raise ProtocolError(f"unknown message tag 0x{tag:02x}")


def write_frame(sock, msg, frame_cap=DEFAULT_FRAME_CAP):
    """Encode msg and send it as one length-prefixed frame."""
    payload = encode_message(msg)
    if len(payload) > frame_cap:
        raise ProtocolError(
            f"payload of {len(payload)} bytes exceeds the frame cap {frame_cap}"
        )
    sock.sendall(struct.pack(">I", len(payload)) + payload)


def _recv_exact(sock, count):
    chunks = []
    got = 0
    while got < count:
        chunk = sock.recv(count - got)
        if not chunk:
            raise ConnectionError("peer closed the connection mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock, frame_cap=DEFAULT_FRAME_CAP):
    """Read one length-prefixed frame and decode it.

    Raises ConnectionError on clean or mid-frame EOF and ProtocolError on
    malformed or oversized frames.
    """
    header = _recv_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    if length > frame_cap:
        raise ProtocolError(
            f"announced frame of {length} bytes exceeds the cap {frame_cap}"
        )
    return decode_message(_recv_exact(sock, length))
