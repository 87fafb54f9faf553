"""Stream-socket front end for the teleop station.

One listening port serves both framings: plain TCP clients exchange
newline-delimited JSON envelopes directly, and browser clients send an
HTTP GET, get upgraded to a WebSocket, and exchange the same lines as
text messages.  A single tick thread owns the station; socket readers
push decoded envelopes into an inbox the tick thread drains, and each
client gets a bounded egress queue (drop-oldest) so a slow consumer
never stalls the simulation.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import queue
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

from .config import RobotConfig
from .engine import DT, LatencyModel, TeleopStation
from .protocol import COMMAND_TOPICS, DecodeError, Envelope, StreamDecoder, encode_envelope

logger = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class _WsClosed(Exception):
    pass


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(payload: bytes) -> bytes:
    """Server-to-client text frame (FIN set, no masking)."""
    length = len(payload)
    if length < 126:
        header = struct.pack("!BB", 0x81, length)
    elif length < 1 << 16:
        header = struct.pack("!BBH", 0x81, 126, length)
    else:
        header = struct.pack("!BBQ", 0x81, 127, length)
    return header + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise _WsClosed()
        buf += chunk
    return buf


def ws_read_message(sock: socket.socket) -> bytes:
    """Read one client message, unmasking; answers pings, raises on close."""
    payload = b""
    while True:
        b0, b1 = _recv_exact(sock, 2)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            (length,) = struct.unpack("!H", _recv_exact(sock, 2))
        elif length == 127:
            (length,) = struct.unpack("!Q", _recv_exact(sock, 8))
        mask = _recv_exact(sock, 4) if masked else b""
        data = _recv_exact(sock, length) if length else b""
        if masked:
            data = bytes(c ^ mask[i % 4] for i, c in enumerate(data))
        if opcode == 0x8:  # close
            raise _WsClosed()
        if opcode == 0x9:  # ping -> pong
            sock.sendall(struct.pack("!BB", 0x8A, len(data)) + data)
            continue
        if opcode == 0xA:  # pong
            continue
        payload += data
        if b0 & 0x80:  # FIN
            return payload


@dataclass
class ClientStats:
    sent: int = 0
    dropped: int = 0
    unknown_topics: int = 0


class _Client:
    def __init__(self, sock: socket.socket, addr, is_websocket: bool, queue_limit: int):
        self.sock = sock
        self.addr = addr
        self.is_websocket = is_websocket
        self.egress: deque[bytes] = deque(maxlen=queue_limit)
        self.wakeup = threading.Condition()
        self.stats = ClientStats()
        self.alive = True

    def offer(self, line: bytes) -> None:
        with self.wakeup:
            if len(self.egress) == self.egress.maxlen:
                self.stats.dropped += 1
            self.egress.append(line)
            self.wakeup.notify()

    def close(self) -> None:
        self.alive = False
        with self.wakeup:
            self.wakeup.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class TeleopServer:
    """Hosts one TeleopStation behind a stream socket.

    rate_scale is virtual seconds per wall second; 0 free-runs a fixed
    duration and is only useful for scripted sessions.
    """

    def __init__(
        self,
        config: RobotConfig,
        scenario_text: str,
        listen: tuple[str, int] = ("127.0.0.1", 0),
        seed: int | None = None,
        rate_scale: float = 1.0,
        latency: LatencyModel | None = None,
    ):
        if rate_scale < 0.0:
            raise ValueError("rate_scale must be >= 0")
        self.station = TeleopStation(config, scenario_text, seed=seed, latency=latency)
        self.rate_scale = rate_scale
        self._inbox: "queue.Queue[Envelope]" = queue.Queue()
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind(listen)
        except OSError as exc:
            self._listener.close()
            raise OSError(f"cannot listen on {listen[0]}:{listen[1]}: {exc}") from None
        self._listener.listen(8)
        self.address = self._listener.getsockname()

        self.station.subscribe(self._broadcast)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "TeleopServer":
        self._spawn(self._accept_loop, name="accept")
        if self.rate_scale > 0.0:
            self._spawn(self._tick_loop, name="tick")
        # rate_scale 0 free-runs under an external run_for() driver
        return self

    def _spawn(self, target, name: str, args=()) -> None:
        t = threading.Thread(target=target, name=f"telesim-{name}", args=args, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()
        for t in self._threads:
            t.join(timeout=2.0)

    # -- simulation tick ------------------------------------------------------

    def _drain_inbox(self) -> None:
        while True:
            try:
                env = self._inbox.get_nowait()
            except queue.Empty:
                return
            # live commands are re-stamped at arrival in virtual time
            self.station.submit(
                Envelope(env.topic, self.station.now_s, env.seq, env.payload)
            )

    def _tick_loop(self) -> None:
        wall_start = time.monotonic()
        while not self._stop.is_set():
            self._drain_inbox()
            self.station.tick()
            if self.rate_scale > 0.0:
                target = wall_start + self.station.now_s / self.rate_scale
                delay = target - time.monotonic()
                if delay > 0:
                    self._stop.wait(delay)

    def run_for(self, virtual_seconds: float) -> None:
        """Free-run the paced loop until the station reaches the duration."""
        ticks = int(round(virtual_seconds / DT))
        while self.station.tick_index < ticks and not self._stop.is_set():
            self._drain_inbox()
            self.station.tick()

    # -- networking -----------------------------------------------------------

    def _broadcast(self, env: Envelope) -> None:
        line = encode_envelope(env)
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.offer(line)

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            self._spawn(self._serve_client, name=f"client-{addr[1]}", args=(sock, addr))

    def _sniff_websocket(self, sock: socket.socket) -> bool:
        """Peek for an HTTP upgrade; silence means a plain TCP client."""
        first = b""
        deadline = time.monotonic() + 0.5
        try:
            while len(first) < 4:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                sock.settimeout(remaining)
                got = sock.recv(4, socket.MSG_PEEK)
                if not got or not b"GET ".startswith(got[: min(len(got), 4)]):
                    first = got
                    break
                first = got
                if len(first) < 4:
                    time.sleep(0.01)  # partial prefix: wait for more bytes
        except socket.timeout:
            pass
        finally:
            sock.settimeout(None)
        return first.startswith(b"GET ")

    def _serve_client(self, sock: socket.socket, addr) -> None:
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            is_ws = self._sniff_websocket(sock)
            if is_ws:
                if not self._ws_handshake(sock):
                    sock.close()
                    return
            client = _Client(sock, addr, is_ws, self.station.config.server.client_queue_limit)
            with self._clients_lock:
                self._clients.append(client)
            logger.info("client %s connected (%s)", addr, "ws" if is_ws else "tcp")
            self._spawn(self._writer_loop, name=f"writer-{addr[1]}", args=(client,))
            self._reader_loop(client)
        except (OSError, _WsClosed):
            pass
        finally:
            with self._clients_lock:
                self._clients = [c for c in self._clients if c.sock is not sock]
            try:
                sock.close()
            except OSError:
                pass

    def _ws_handshake(self, sock: socket.socket) -> bool:
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(4096)
            if not chunk or len(data) > 65536:
                return False
            data += chunk
        headers = {}
        for raw_line in data.split(b"\r\n")[1:]:
            if b":" in raw_line:
                k, v = raw_line.split(b":", 1)
                headers[k.strip().lower().decode()] = v.strip().decode()
        key = headers.get("sec-websocket-key")
        if not key or "websocket" not in headers.get("upgrade", "").lower():
            sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return False
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n"
        )
        sock.sendall(response.encode("ascii"))
        return True

    def _reader_loop(self, client: _Client) -> None:
        decoder = StreamDecoder(known_topics=COMMAND_TOPICS)
        while not self._stop.is_set() and client.alive:
            if client.is_websocket:
                data = ws_read_message(client.sock)
                if not data.endswith(b"\n"):
                    data += b"\n"
            else:
                data = client.sock.recv(4096)
                if not data:
                    return
            try:
                envelopes = decoder.feed(data)
            except DecodeError as exc:
                logger.warning("client %s: %s", client.addr, exc)
                continue
            client.stats.unknown_topics = decoder.unknown_topic_count
            for env in envelopes:
                self._inbox.put(env)

    def _writer_loop(self, client: _Client) -> None:
        while client.alive and not self._stop.is_set():
            with client.wakeup:
                while not client.egress and client.alive and not self._stop.is_set():
                    client.wakeup.wait(timeout=0.5)
                batch = []
                while client.egress:
                    batch.append(client.egress.popleft())
            if not batch:
                continue
            try:
                if client.is_websocket:
                    payload = b"".join(ws_encode_text(line) for line in batch)
                else:
                    payload = b"".join(batch)
                client.sock.sendall(payload)
                client.stats.sent += len(batch)
            except OSError:
                return
