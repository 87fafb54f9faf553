import base64
import hashlib
import json
import os
import socket
import struct
import time

import pytest

from telesim.config import load_config
from telesim.engine import DT
from telesim.protocol import Envelope, encode_envelope
from telesim.server import TeleopServer, ws_encode_text

ROOM = """
wall -3 -3  3 -3
wall  3 -3  3  3
wall  3  3 -3  3
wall -3  3 -3 -3
start 0 0 0
seed 2
"""


@pytest.fixture
def server():
    srv = TeleopServer(load_config(), ROOM, listen=("127.0.0.1", 0), rate_scale=20.0)
    srv.start()
    yield srv
    srv.stop()


def read_lines(sock: socket.socket, n: int, timeout=10.0) -> list[dict]:
    sock.settimeout(timeout)
    buf = b""
    lines = []
    while len(lines) < n:
        chunk = sock.recv(65536)
        if not chunk:
            break
        buf += chunk
        while b"\n" in buf and len(lines) < n:
            line, buf = buf.split(b"\n", 1)
            if line.strip():
                lines.append(json.loads(line))
    return lines


class TestTcpClient:
    def test_telemetry_flows(self, server):
        with socket.create_connection(server.address) as sock:
            lines = read_lines(sock, 50)
        topics = {l["topic"] for l in lines}
        assert "pose2d" in topics
        assert "joint_states" in topics

    def test_command_round_trip(self, server):
        with socket.create_connection(server.address) as sock:
            env = Envelope("cmd_vel", 0.0, 0, {"vx": 0.3, "vy": 0.0, "w": 0.0})
            sock.sendall(encode_envelope(env))
            deadline = time.time() + 10.0
            moved = False
            sock.settimeout(10.0)
            buf = b""
            while time.time() < deadline and not moved:
                buf += sock.recv(65536)
                *complete, buf = buf.split(b"\n")
                for line in complete:
                    if line.strip():
                        rec = json.loads(line)
                        if rec["topic"] == "pose2d" and rec["payload"]["x"] > 0.01:
                            moved = True
            assert moved

    def test_unknown_topic_ignored(self, server):
        with socket.create_connection(server.address) as sock:
            sock.sendall(encode_envelope(Envelope("not_a_topic", 0.0, 0, {})))
            # connection stays healthy and telemetry keeps flowing
            lines = read_lines(sock, 10)
            assert len(lines) == 10


def ws_client_frame(payload: bytes) -> bytes:
    mask = os.urandom(4)
    masked = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
    length = len(payload)
    if length < 126:
        header = struct.pack("!BB", 0x81, 0x80 | length)
    else:
        header = struct.pack("!BBH", 0x81, 0x80 | 126, length)
    return header + mask + masked


def ws_read_message(sock: socket.socket) -> bytes:
    def exact(n):
        out = b""
        while len(out) < n:
            chunk = sock.recv(n - len(out))
            if not chunk:
                raise ConnectionError("closed")
            out += chunk
        return out

    b0, b1 = exact(2)
    length = b1 & 0x7F
    if length == 126:
        (length,) = struct.unpack("!H", exact(2))
    elif length == 127:
        (length,) = struct.unpack("!Q", exact(8))
    return exact(length)


class TestWebSocketClient:
    def handshake(self, server) -> socket.socket:
        sock = socket.create_connection(server.address)
        key = base64.b64encode(os.urandom(16)).decode()
        request = (
            f"GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\n"
            f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
            f"Sec-WebSocket-Version: 13\r\n\r\n"
        )
        sock.sendall(request.encode())
        sock.settimeout(10.0)
        response = b""
        while b"\r\n\r\n" not in response:
            response += sock.recv(4096)
        assert b"101 Switching Protocols" in response
        expect = base64.b64encode(
            hashlib.sha1(
                (key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode()
            ).digest()
        )
        assert expect in response
        return sock

    def test_upgrade_and_telemetry(self, server):
        sock = self.handshake(server)
        try:
            message = ws_read_message(sock)
            record = json.loads(message.decode().strip().split("\n")[0])
            assert record["topic"] in {
                "pose2d", "wheel_states", "joint_states", "ptru_state",
                "imu_body", "imu_head", "scan", "sonar", "map_delta",
                "bus_cycle", "camera_pose",
            }
        finally:
            sock.close()

    def test_ws_command(self, server):
        sock = self.handshake(server)
        try:
            env = encode_envelope(Envelope("cmd_vel", 0.0, 0, {"vx": 0.4, "vy": 0, "w": 0}))
            sock.sendall(ws_client_frame(env))
            deadline = time.time() + 10.0
            moved = False
            while time.time() < deadline and not moved:
                message = ws_read_message(sock)
                for line in message.decode().strip().split("\n"):
                    rec = json.loads(line)
                    if rec["topic"] == "pose2d" and rec["payload"]["x"] > 0.01:
                        moved = True
                        break
            assert moved
        finally:
            sock.close()


class TestFrameHelpers:
    def test_short_frame_layout(self):
        frame = ws_encode_text(b"hi")
        assert frame == b"\x81\x02hi"

    def test_medium_frame_layout(self):
        frame = ws_encode_text(b"x" * 300)
        assert frame[:4] == struct.pack("!BBH", 0x81, 126, 300)


class TestBackpressure:
    def test_slow_client_drops_oldest_without_stalling(self):
        cfg = load_config({"server": {"client_queue_limit": 16}})
        srv = TeleopServer(cfg, ROOM, listen=("127.0.0.1", 0), rate_scale=0.0)
        try:
            srv._listener.settimeout(1.0)
            # connect but never read
            lazy = socket.create_connection(srv.address)
            # give the accept loop a chance to register the client
            srv.start()
            time.sleep(0.3)
            srv.run_for(2.0)
            time.sleep(0.3)
            with srv._clients_lock:
                stats = [c.stats for c in srv._clients]
            assert stats and stats[0].dropped > 0
            assert srv.station.tick_index == 200
            lazy.close()
        finally:
            srv.stop()


class TestPortConflict:
    def test_port_in_use_raises(self, server):
        with pytest.raises(OSError):
            TeleopServer(load_config(), ROOM, listen=server.address)
