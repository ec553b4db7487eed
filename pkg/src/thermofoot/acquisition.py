"""Capture-device simulation and the framed byte-stream protocol.

The physical rig (plantar camera plus a C-arm stepping through four 90
degree stops) is reduced to its observable behavior: a strict capture
sequence of one plantar and four periphery frames, streamed as framed
messages over TCP.

Wire format, little-endian throughout:

    magic   4 bytes  ASCII "NIRT"
    version 1 byte
    type    1 byte   0x01 frame, 0x02 sequence-start, 0x03 sequence-end,
                     0x7F error
    length  4 bytes  payload byte count
    payload
    crc     4 bytes  CRC-32 of the payload

A frame payload is a 4-byte JSON-header length, the UTF-8 JSON header
(the sidecar fields), then the raw u16 counts.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import zlib
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import ParseError, PreconditionError, SourceExhausted
from .phantom import PhantomSpec, generate, generate_periphery
from .radiometry import FrameView, RawFrame

MAGIC = b"NIRT"
PROTOCOL_VERSION = 1
MSG_FRAME = 0x01
MSG_SEQUENCE_START = 0x02
MSG_SEQUENCE_END = 0x03
MSG_ERROR = 0x7F
_HEADER = struct.Struct("<4sBBI")
MAX_PAYLOAD = 16 * 1024 * 1024

CAPTURE_ORDER = (
    FrameView.plantar(),
    FrameView.periphery(0),
    FrameView.periphery(90),
    FrameView.periphery(180),
    FrameView.periphery(270),
)


@dataclass(frozen=True)
class Message:
    """One decoded protocol message."""

    msg_type: int
    payload: bytes

    def json(self) -> dict:
        return json.loads(self.payload.decode("utf-8"))


def encode_message(msg_type: int, payload: bytes) -> bytes:
    if not 0 <= msg_type <= 0xFF:
        raise PreconditionError("message type must fit one byte")
    if len(payload) > MAX_PAYLOAD:
        raise PreconditionError("payload too large")
    header = _HEADER.pack(MAGIC, PROTOCOL_VERSION, msg_type, len(payload))
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def encode_frame(frame: RawFrame) -> bytes:
    header = {
        "frame_id": frame.frame_id,
        "view": {"kind": frame.view.kind, "angle_deg": frame.view.angle_deg},
        "captured_at": frame.captured_at.isoformat(),
        "width": frame.shape[1],
        "height": frame.shape[0],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = (
        struct.pack("<I", len(header_bytes))
        + header_bytes
        + frame.counts.astype("<u2").tobytes(order="C")
    )
    return encode_message(MSG_FRAME, payload)


def decode_frame_payload(payload: bytes) -> RawFrame:
    if len(payload) < 4:
        raise ParseError("frame payload too short")
    (header_len,) = struct.unpack_from("<I", payload, 0)
    if 4 + header_len > len(payload):
        raise ParseError("frame header length exceeds payload")
    try:
        header = json.loads(payload[4 : 4 + header_len].decode("utf-8"))
        width = int(header["width"])
        height = int(header["height"])
        view = FrameView(
            kind=header["view"]["kind"], angle_deg=header["view"].get("angle_deg")
        )
        captured_at = datetime.fromisoformat(header["captured_at"])
        frame_id = str(header["frame_id"])
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad frame header: {exc}") from exc
    data = payload[4 + header_len :]
    if len(data) != width * height * 2:
        raise ParseError("frame data length mismatch")
    counts = np.frombuffer(data, dtype="<u2").reshape(height, width).copy()
    return RawFrame(counts=counts, view=view, captured_at=captured_at, frame_id=frame_id)


@dataclass
class DroppedMessage:
    """A framed message that failed its checksum."""

    msg_type: int
    reason: str


class StreamDecoder:
    """Incremental protocol parser tolerant of arbitrary chunking.

    Bad magic resynchronizes at the next magic; a checksum mismatch drops
    that single message (recorded in ``drops``) and decoding continues
    with the next one.
    """

    def __init__(self):
        self._buf = bytearray()
        self.drops: list[DroppedMessage] = []

    def feed(self, chunk: bytes) -> list[Message]:
        self._buf.extend(chunk)
        out: list[Message] = []
        while True:
            start = self._buf.find(MAGIC)
            if start < 0:
                # nothing frame-like; keep a magic-sized tail for splits
                del self._buf[: max(0, len(self._buf) - (len(MAGIC) - 1))]
                return out
            if start > 0:
                del self._buf[:start]
            if len(self._buf) < _HEADER.size:
                return out
            magic, version, msg_type, length = _HEADER.unpack_from(self._buf, 0)
            if version != PROTOCOL_VERSION or length > MAX_PAYLOAD:
                # corrupt header: skip this magic and rescan
                del self._buf[: len(MAGIC)]
                continue
            total = _HEADER.size + length + 4
            if len(self._buf) < total:
                return out
            payload = bytes(self._buf[_HEADER.size : _HEADER.size + length])
            (crc,) = struct.unpack_from("<I", self._buf, _HEADER.size + length)
            del self._buf[:total]
            if crc != zlib.crc32(payload):
                self.drops.append(
                    DroppedMessage(msg_type=msg_type, reason="checksum mismatch")
                )
                continue
            out.append(Message(msg_type=msg_type, payload=payload))


def decode_stream(data: bytes) -> tuple[list[Message], list[DroppedMessage]]:
    """One-shot decode of a complete byte string."""
    decoder = StreamDecoder()
    messages = decoder.feed(data)
    return messages, decoder.drops


# -- capture sequence ------------------------------------------------------------


@dataclass
class CaptureSequence:
    """State machine enforcing the plantar-first, four-stop capture order."""

    states: list = field(default_factory=lambda: ["Idle"])
    frame_ids: dict = field(default_factory=dict)

    @property
    def state(self) -> str:
        return self.states[-1]

    def advance(self, frame: RawFrame) -> None:
        step = len(self.states) - 1  # completed captures so far
        if step >= len(CAPTURE_ORDER):
            raise PreconditionError("sequence already complete")
        expected = CAPTURE_ORDER[step]
        if frame.view != expected:
            raise PreconditionError(
                f"expected {expected.kind}/{expected.angle_deg}, "
                f"got {frame.view.kind}/{frame.view.angle_deg}"
            )
        name = (
            "PlantarCapture"
            if frame.view.kind == "plantar"
            else f"PeripheryCapture({frame.view.angle_deg})"
        )
        self.states.append(name)
        self.frame_ids[name] = frame.frame_id
        if len(self.states) - 1 == len(CAPTURE_ORDER):
            self.states.append("Complete")

    @property
    def complete(self) -> bool:
        return self.state == "Complete"


def phantom_frame_source(spec: PhantomSpec, seed: int):
    """Yield the five-frame capture set for one phantom subject."""
    plantar, _ = generate(spec, seed)
    yield plantar
    for angle in (0, 90, 180, 270):
        yield generate_periphery(spec, angle, seed=seed)


def run_sequence(source) -> tuple[list[bytes], CaptureSequence]:
    """Produce the wire messages for one capture run.

    Emits sequence-start, five frames in capture order, sequence-end.
    A source that runs dry yields an error message (0x7F) instead and the
    sequence aborts.
    """
    sequence = CaptureSequence()
    messages: list[bytes] = [
        encode_message(
            MSG_SEQUENCE_START,
            json.dumps(
                {"frame_count": len(CAPTURE_ORDER), "protocol_version": PROTOCOL_VERSION},
                sort_keys=True,
            ).encode(),
        )
    ]
    iterator = iter(source)
    for expected in CAPTURE_ORDER:
        try:
            frame = next(iterator)
        except StopIteration:
            messages.append(
                encode_message(
                    MSG_ERROR,
                    json.dumps(
                        {
                            "code": "SourceExhausted",
                            "message": f"source ran dry before {expected.kind} capture",
                            "frames_delivered": len(sequence.states) - 1,
                        },
                        sort_keys=True,
                    ).encode(),
                )
            )
            return messages, sequence
        sequence.advance(frame)
        messages.append(encode_frame(frame))
    messages.append(
        encode_message(
            MSG_SEQUENCE_END,
            json.dumps({"status": "complete"}, sort_keys=True).encode(),
        )
    )
    return messages, sequence


# -- TCP transport -----------------------------------------------------------------


class CaptureServer:
    """Streams one capture sequence to every client that connects."""

    def __init__(self, spec: PhantomSpec, seed: int, host: str = "127.0.0.1", port: int = 0):
        self.spec = spec
        self.seed = seed
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def serve_forever(self) -> None:
        self._sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            threading.Thread(target=self._serve_one, args=(conn,), daemon=True).start()

    def _serve_one(self, conn: socket.socket) -> None:
        try:
            messages, _ = run_sequence(phantom_frame_source(self.spec, self.seed))
            for message in messages:
                conn.sendall(message)
        finally:
            conn.close()

    def start(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self._sock.close()


def receive_sequence(host: str, port: int, timeout: float = 10.0) -> list[RawFrame]:
    """Connect to a capture server and collect one full sequence."""
    decoder = StreamDecoder()
    frames: list[RawFrame] = []
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.settimeout(timeout)
        done = False
        while not done:
            chunk = sock.recv(65536)
            if not chunk:
                break
            for message in decoder.feed(chunk):
                if message.msg_type == MSG_FRAME:
                    frames.append(decode_frame_payload(message.payload))
                elif message.msg_type == MSG_ERROR:
                    info = message.json()
                    raise SourceExhausted(info.get("message", "capture aborted"))
                elif message.msg_type == MSG_SEQUENCE_END:
                    done = True
    if len(frames) != len(CAPTURE_ORDER):
        raise SourceExhausted(f"received {len(frames)} of {len(CAPTURE_ORDER)} frames")
    return frames
