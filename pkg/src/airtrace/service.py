"""Interactive drawing service: stream stroke points in, get the
reconstructed emitter positions back while the stroke is still being drawn.

A session maps canvas coordinates (u, v) in [0,1]^2 onto the plane x1 = 0
inside the search cube, synthesizes the receiver column for each new sample
with the homogeneous retarded-time model, perturbs it with the session's
counter-based noise stream, and runs one velocity-bounded search step
seeded by the previous estimate (the first point searches the whole
lattice).  Because every step reuses the exact batch-pipeline routines and
the noise stream is indexed by step, replaying a finished session offline
reproduces the streamed points bit for bit.

Transport is newline-delimited JSON objects over a local TCP socket.  The
same port answers plain HTTP (static files for the browser client) and
WebSocket upgrades carrying the identical message protocol.

Message types: config, stroke_point {t,u,v}, recon_point
{t,x1,x2,x3,indicator}, segment {ranges}, smooth {segment, coeffs},
error {phase, message}; plus two service extensions: skip {t, reason} for
steps whose indicator is undefined, stats (latency summary) after
finalize, and the client-sent finalize trigger {type: "finalize"}.
"""
from __future__ import annotations

import base64
import hashlib
import json
import math
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import (
    PotentialMode,
    RetardedSolveParams,
    SourceSignal,
    WaveRecord,
    noise_column,
    retarded_potential,
)
from .geometry import Cuboid, SamplingMesh, TimeGrid, make_receiver_array
from .imaging import (
    EmptyBallError,
    IndicatorParams,
    LatticeEvaluator,
    UndefinedIndicatorError,
    grid_argmax,
    reconstruct_sequential,
)
from .smoothing import smooth
from .trajectories import Trajectory

__all__ = [
    "ServiceConfig",
    "ServiceError",
    "Session",
    "create_session",
    "map_canvas",
    "encode_message",
    "decode_message",
    "replay_session",
    "AirtraceServer",
    "serve_forever",
]

_SIN_FLOOR = 1e-12  # machine floor under the configurable tone threshold
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class ServiceError(Exception):
    """Client-visible failure; carried to the wire as an error message."""

    def __init__(self, phase: str, message: str):
        super().__init__(message)
        self.phase = phase


@dataclass(frozen=True)
class ServiceConfig:
    """Per-session acquisition and reconstruction settings."""

    omega0: float = 1.0
    c0: float = 330.0
    noise: float = 0.05
    seed: int = 1
    dt: float = 0.1
    method: str = "sequential"
    resolution: int = 25
    v_max: float = 80.0
    order: int = 3
    gap_factor: float = 3.0
    radius: float = 10.0
    n_receivers: int = 200
    polar_lo: float = float(np.pi / 4)
    polar_hi: float = float(3 * np.pi / 4)
    azimuth_lo: float = float(-np.pi / 4)
    azimuth_hi: float = float(np.pi / 4)
    domain_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    domain_size: tuple[float, float, float] = (16.0, 16.0, 16.0)

    def validate(self) -> None:
        if self.omega0 <= 0 or self.c0 <= 0:
            raise ServiceError("config", "omega0 and c0 must be positive")
        if self.noise < 0:
            raise ServiceError("config", "noise level must be non-negative")
        if self.dt <= 0:
            raise ServiceError("config", "dt must be positive")
        if self.method != "sequential":
            raise ServiceError("config", f"online reconstruction supports only the sequential method, got {self.method!r}")
        if self.resolution < 2:
            raise ServiceError("config", "mesh resolution must be at least 2")
        if self.v_max <= 0:
            raise ServiceError("config", "v_max must be positive")
        if self.order < 0:
            raise ServiceError("config", "smoothing order must be non-negative")
        if self.n_receivers < 1:
            raise ServiceError("config", "need at least one receiver")

    def echo(self, session_id: str) -> dict:
        return {
            "type": "config",
            "session": session_id,
            "omega0": self.omega0,
            "c0": self.c0,
            "noise": self.noise,
            "seed": self.seed,
            "dt": self.dt,
            "method": self.method,
            "resolution": self.resolution,
            "v_max": self.v_max,
            "order": self.order,
            "n_receivers": self.n_receivers,
            "radius": self.radius,
        }


_CONFIG_KEYS = {
    "omega0": float, "c0": float, "noise": float, "seed": int, "dt": float,
    "method": str, "resolution": int, "v_max": float, "order": int,
    "gap_factor": float, "radius": float, "n_receivers": int,
}


def config_from_message(msg: dict) -> ServiceConfig:
    kwargs = {}
    for key, value in msg.items():
        if key in ("type", "plane", "session"):
            continue
        if key not in _CONFIG_KEYS:
            raise ServiceError("config", f"unknown config key {key!r}")
        try:
            kwargs[key] = _CONFIG_KEYS[key](value)
        except (TypeError, ValueError):
            raise ServiceError("config", f"bad value for {key!r}: {value!r}") from None
    if msg.get("plane") not in (None, "x1=0"):
        raise ServiceError("config", "only the fixed plane mapping x1=0 is supported")
    return ServiceConfig(**kwargs)


def map_canvas(u: float, v: float) -> np.ndarray:
    """Canvas (u, v) in [0,1]^2 onto the x1 = 0 slice of the search cube:
    (0, 16(u - 0.5), 16(0.5 - v)); v grows downward on screens."""
    return np.array([0.0, 16.0 * (u - 0.5), 16.0 * (0.5 - v)])


_session_lock = threading.Lock()
_session_counter = 0


def _next_session_id() -> str:
    global _session_counter
    with _session_lock:
        _session_counter += 1
        return f"s{_session_counter}"


class Session:
    """One stroke: owns its buffers, evaluator, and noise stream."""

    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        self.id = _next_session_id()
        self.receivers = make_receiver_array(
            radius=config.radius,
            polar_range=(config.polar_lo, config.polar_hi),
            azimuth_range=(config.azimuth_lo, config.azimuth_hi),
            n_receivers=config.n_receivers,
        )
        self.mesh = SamplingMesh(
            Cuboid(center=config.domain_center, size=config.domain_size), config.resolution
        )
        self.params = IndicatorParams()
        self.evaluator = LatticeEvaluator(self.mesh, self.receivers, self.params.exclusion_radius)
        self.evaluator.prepare()  # pay the lattice build here, not on the first stroke point
        self.solve_params = RetardedSolveParams()
        # stroke buffer and per-step outputs
        self.times: list[float] = []
        self.points: list[np.ndarray] = []
        self.columns: list[np.ndarray] = []
        self.recon_steps: list[int] = []
        self.recon_points: list[np.ndarray] = []
        self.recon_indicators: list[float] = []
        self.skipped: list[int] = []
        self.latencies: list[float] = []
        self.emitted = 0
        self.finalized = False

    # -- ingest ------------------------------------------------------------

    def _validate_sample(self, t: float, u: float, v: float) -> int:
        if self.finalized:
            raise ServiceError("ingest", "session already finalized")
        if not (math.isfinite(t) and math.isfinite(u) and math.isfinite(v)):
            raise ServiceError("ingest", "non-finite stroke sample")
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise ServiceError("ingest", f"point outside canvas: u={u:.4g}, v={v:.4g}")
        dt = self.config.dt
        step = round(t / dt)
        if abs(t - step * dt) > 1e-9 * max(1.0, abs(t)):
            raise ServiceError("ingest", f"t={t!r} is not on the session grid (dt={dt})")
        expected = len(self.times) + 1
        if step != expected:
            if step <= len(self.times):
                raise ServiceError("ingest", f"out-of-order timestamp t={t!r}")
            raise ServiceError("ingest", f"expected step {expected} (t={expected * dt:.6g}), got step {step}")
        return step

    def _record_so_far(self) -> WaveRecord:
        values = np.column_stack(self.columns)
        n = len(self.columns)
        grid = TimeGrid(duration=n * self.config.dt, n_steps=n)
        return WaveRecord(
            values=values,
            receivers=self.receivers,
            grid=grid,
            omega0=self.config.omega0,
            c0=self.config.c0,
            trajectory_id=f"session-{self.id}",
            forward="retarded",
            noise=self.config.noise,
            seed=self.config.seed,
        )

    def ingest(self, t: float, u: float, v: float) -> dict:
        """Accept one stroke sample; returns a recon_point or skip message."""
        started = time.perf_counter()
        step = self._validate_sample(float(t), float(u), float(v))
        t = step * self.config.dt  # exact grid time, matching offline replay
        point = map_canvas(float(u), float(v))
        self.times.append(t)
        self.points.append(point)

        traj = Trajectory.from_samples(
            np.asarray(self.times), np.vstack(self.points), name=f"session-{self.id}"
        )
        signal = SourceSignal(omega0=self.config.omega0, terminal_time=traj.duration)
        column = retarded_potential(
            self.receivers.positions, t, traj, self.config.c0, signal,
            mode=PotentialMode.UNIT_DIRECTION, params=self.solve_params,
        )
        if self.config.noise > 0:
            r = noise_column(self.config.seed, len(self.receivers), step)
            column = column * (1.0 + self.config.noise * r)
        self.columns.append(column)

        # weak probe tone or nothing arrived yet: mirrors valid_steps so the
        # offline replay skips the identical set
        u_norm = math.sqrt(float(np.sum(column * column * self.receivers.weights)))
        tone_floor = max(self.params.tone_threshold, _SIN_FLOOR)
        if abs(math.sin(self.config.omega0 * t)) <= tone_floor or u_norm == 0.0:
            self.skipped.append(step)
            self.latencies.append(time.perf_counter() - started)
            return {"type": "skip", "t": t, "reason": "uninformative step"}

        record = self._record_so_far()
        try:
            if not self.recon_steps:
                point_est, value, _ = grid_argmax(record, step, self.mesh, self.params, self.evaluator)
            else:
                gap = step - self.recon_steps[-1]
                radius = self.config.v_max * self.config.dt * gap + self.mesh.cell_diagonal
                candidates = self.mesh.ball_indices(self.recon_points[-1], radius)
                if candidates.size == 0:
                    raise EmptyBallError("search ball narrower than the mesh")
                point_est, value, _ = grid_argmax(
                    record, step, self.mesh, self.params, self.evaluator, candidates
                )
        except (UndefinedIndicatorError, EmptyBallError) as exc:
            self.skipped.append(step)
            self.latencies.append(time.perf_counter() - started)
            return {"type": "skip", "t": t, "reason": str(exc)}

        self.recon_steps.append(step)
        self.recon_points.append(point_est)
        self.recon_indicators.append(value)
        self.emitted += 1
        self.latencies.append(time.perf_counter() - started)
        return {
            "type": "recon_point",
            "t": t,
            "x1": float(point_est[0]),
            "x2": float(point_est[1]),
            "x3": float(point_est[2]),
            "indicator": value,
        }

    # -- finalize ----------------------------------------------------------

    def finalize(self) -> list[dict]:
        """Segment and smooth the reconstructed stroke; emits segment,
        smooth (one per segment), and stats messages."""
        if self.finalized:
            raise ServiceError("finalize", "session already finalized")
        if self.emitted < 2:
            raise ServiceError("finalize", f"need at least 2 reconstructed points, have {self.emitted}")
        self.finalized = True

        class _Raw:
            pass

        raw = _Raw()
        raw.steps = np.asarray(self.recon_steps, dtype=np.int64)
        raw.times = raw.steps * self.config.dt
        raw.points = np.vstack(self.recon_points)
        smoothed = smooth(raw, order=self.config.order, gap_factor=self.config.gap_factor)

        messages = [
            {"type": "segment", "ranges": [[int(lo), int(hi)] for lo, hi in smoothed.segments]}
        ]
        for k, curve in enumerate(smoothed.curves):
            messages.append(
                {
                    "type": "smooth",
                    "segment": k,
                    "coeffs": {
                        "order": curve.order,
                        "duration": curve.duration,
                        "t_offset": curve.t_offset,
                        "t_scale": curve.t_scale,
                        "a0": curve.a0.tolist(),
                        "a": curve.a.tolist(),
                        "b": curve.b.tolist(),
                    },
                }
            )
        lat_ms = sorted(1000.0 * x for x in self.latencies)
        stats = {
            "type": "stats",
            "n_points": self.emitted,
            "n_skipped": len(self.skipped),
            "latency_ms": {
                "mean": round(sum(lat_ms) / len(lat_ms), 3) if lat_ms else None,
                "max": round(lat_ms[-1], 3) if lat_ms else None,
                "p95": round(lat_ms[max(0, math.ceil(0.95 * len(lat_ms)) - 1)], 3) if lat_ms else None,
            },
        }
        messages.append(stats)
        return messages


def create_session(config: ServiceConfig | dict | None = None) -> Session:
    if config is None:
        config = ServiceConfig()
    elif isinstance(config, dict):
        config = config_from_message(config)
    return Session(config)


def replay_session(stroke_points, config: ServiceConfig | None = None):
    """Offline pipeline over a finished stroke: same synthesis, same noise
    stream, same lattice.  Returns the sequential reconstruction, for
    checking online/offline consistency bit for bit.

    stroke_points: iterable of (t, u, v) on the session grid.
    """
    config = config or ServiceConfig()
    samples = [(float(t), map_canvas(float(u), float(v))) for t, u, v in stroke_points]
    times = np.array([s[0] for s in samples])
    points = np.vstack([s[1] for s in samples])
    traj = Trajectory.from_samples(times, points, name="replay")
    receivers = make_receiver_array(
        radius=config.radius,
        polar_range=(config.polar_lo, config.polar_hi),
        azimuth_range=(config.azimuth_lo, config.azimuth_hi),
        n_receivers=config.n_receivers,
    )
    n = len(samples)
    grid = TimeGrid(duration=n * config.dt, n_steps=n)
    signal = SourceSignal(omega0=config.omega0, terminal_time=traj.duration)
    values = np.empty((len(receivers), n))
    for j, t in enumerate(grid.times):
        values[:, j] = retarded_potential(
            receivers.positions, t, traj, config.c0, signal,
            mode=PotentialMode.UNIT_DIRECTION, params=RetardedSolveParams(),
        )
    if config.noise > 0:
        for j in range(n):
            values[:, j] = values[:, j] * (1.0 + config.noise * noise_column(config.seed, len(receivers), j + 1))
    record = WaveRecord(
        values=values, receivers=receivers, grid=grid,
        omega0=config.omega0, c0=config.c0, trajectory_id="replay",
        forward="retarded", noise=config.noise, seed=config.seed,
    )
    mesh = SamplingMesh(Cuboid(center=config.domain_center, size=config.domain_size), config.resolution)
    return reconstruct_sequential(record, mesh, config.v_max, IndicatorParams())


# wire codec ---------------------------------------------------------------


def encode_message(msg: dict) -> bytes:
    """One message per line; insertion order of keys is preserved so the
    same message always serializes to the same bytes."""
    return (json.dumps(msg, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def decode_message(line: str | bytes) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    line = line.strip()
    if not line:
        raise ServiceError("protocol", "empty message line")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ServiceError("protocol", f"malformed JSON: {exc}") from None
    if not isinstance(msg, dict) or "type" not in msg:
        raise ServiceError("protocol", "message must be an object with a type field")
    return msg


def _error_message(exc: ServiceError) -> dict:
    return {"type": "error", "phase": exc.phase, "message": str(exc)}


class _Connection:
    """Protocol state machine shared by the raw-socket and WebSocket paths."""

    def __init__(self):
        self.session: Session | None = None

    def handle(self, msg: dict) -> list[dict]:
        try:
            kind = msg.get("type")
            if kind == "config":
                if self.session is not None:
                    raise ServiceError("config", "session already configured")
                self.session = create_session(msg)
                return [self.session.config.echo(self.session.id)]
            if kind == "stroke_point":
                for key in ("t", "u", "v"):
                    if key not in msg:
                        raise ServiceError("ingest", f"stroke_point missing field {key!r}")
                replies = []
                if self.session is None:
                    self.session = create_session(None)
                    replies.append(self.session.config.echo(self.session.id))
                replies.append(self.session.ingest(msg["t"], msg["u"], msg["v"]))
                return replies
            if kind == "finalize":
                if self.session is None:
                    raise ServiceError("finalize", "no session to finalize")
                return self.session.finalize()
            raise ServiceError("protocol", f"unknown message type {msg.get('type')!r}")
        except ServiceError as exc:
            return [_error_message(exc)]
        except Exception as exc:  # keep the connection alive on pipeline faults
            return [{"type": "error", "phase": "internal", "message": str(exc)}]


# transport ----------------------------------------------------------------

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".png": "image/png",
}

_LANDING_PAGE = b"""<!doctype html>
<meta charset="utf-8">
<title>airtrace service</title>
<p>airtrace drawing service is running.  Connect a client over WebSocket or
send newline-delimited JSON messages over this TCP port.</p>
"""


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        first = self.rfile.readline(65536)
        if not first:
            return
        text = first.decode("latin-1", errors="replace").strip()
        if text.startswith("{"):
            self._handle_ndjson(first)
        elif " HTTP/" in text:
            self._handle_http(text)
        else:
            self.wfile.write(encode_message(
                {"type": "error", "phase": "protocol", "message": "expected JSON line or HTTP request"}
            ))

    # raw newline-delimited JSON over the socket
    def _handle_ndjson(self, first_line: bytes):
        conn = _Connection()
        line = first_line
        while line:
            try:
                msg = decode_message(line)
            except ServiceError as exc:
                self.wfile.write(encode_message(_error_message(exc)))
                self.wfile.flush()
                line = self.rfile.readline(1 << 20)
                continue
            for reply in conn.handle(msg):
                self.wfile.write(encode_message(reply))
            self.wfile.flush()
            line = self.rfile.readline(1 << 20)

    # HTTP: either a WebSocket upgrade or a static file
    def _handle_http(self, request_line: str):
        headers = {}
        while True:
            raw = self.rfile.readline(65536)
            if not raw or raw in (b"\r\n", b"\n"):
                break
            if b":" in raw:
                key, _, val = raw.partition(b":")
                headers[key.decode("latin-1").strip().lower()] = val.decode("latin-1").strip()
        parts = request_line.split()
        method, path = parts[0], parts[1] if len(parts) > 1 else "/"
        if headers.get("upgrade", "").lower() == "websocket":
            self._handle_websocket(headers)
            return
        if method not in ("GET", "HEAD"):
            self._http_response("405 Method Not Allowed", b"method not allowed\n", "text/plain")
            return
        self._serve_static(method, path)

    def _http_response(self, status: str, body: bytes, content_type: str, head_only=False):
        head = (
            f"HTTP/1.1 {status}\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Connection: close\r\n\r\n"
        ).encode("latin-1")
        self.wfile.write(head if head_only else head + body)

    def _serve_static(self, method: str, path: str):
        root = self.server.static_dir
        path = path.split("?", 1)[0]
        if path == "/":
            path = "/index.html"
        if root is None:
            if path == "/index.html":
                self._http_response("200 OK", _LANDING_PAGE, "text/html; charset=utf-8", method == "HEAD")
            else:
                self._http_response("404 Not Found", b"not found\n", "text/plain")
            return
        target = (Path(root) / path.lstrip("/")).resolve()
        if not target.is_relative_to(Path(root).resolve()) or not target.is_file():
            self._http_response("404 Not Found", b"not found\n", "text/plain")
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._http_response("200 OK", target.read_bytes(), ctype, method == "HEAD")

    # minimal RFC 6455 server side
    def _handle_websocket(self, headers: dict):
        key = headers.get("sec-websocket-key")
        if not key:
            self._http_response("400 Bad Request", b"missing websocket key\n", "text/plain")
            return
        accept = base64.b64encode(hashlib.sha1((key + _WS_GUID).encode("latin-1")).digest()).decode()
        self.wfile.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("latin-1")
        )
        self.wfile.flush()
        conn = _Connection()
        buffer = b""
        fragments: list[bytes] = []
        while True:
            frame = self._read_frame()
            if frame is None:
                return
            opcode, payload = frame
            if opcode == 0x8:  # close
                try:
                    self._send_frame(0x8, payload[:2])
                except OSError:
                    pass
                return
            if opcode == 0x9:  # ping
                self._send_frame(0xA, payload)
                continue
            if opcode == 0xA:  # pong
                continue
            if opcode in (0x1, 0x2, 0x0):
                fragments.append(payload)
                fin = self._last_fin
                if not fin:
                    continue
                data = b"".join(fragments)
                fragments = []
                buffer += data
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    if not line.strip():
                        continue
                    self._dispatch_ws_line(conn, line)
                # frame boundary also delimits a message
                if buffer.strip():
                    self._dispatch_ws_line(conn, buffer)
                buffer = b""

    def _dispatch_ws_line(self, conn: _Connection, line: bytes):
        try:
            msg = decode_message(line)
        except ServiceError as exc:
            self._send_frame(0x1, encode_message(_error_message(exc)).rstrip(b"\n"))
            return
        for reply in conn.handle(msg):
            self._send_frame(0x1, encode_message(reply).rstrip(b"\n"))

    def _read_exact(self, n: int) -> bytes | None:
        data = b""
        while len(data) < n:
            chunk = self.rfile.read(n - len(data))
            if not chunk:
                return None
            data += chunk
        return data

    def _read_frame(self):
        head = self._read_exact(2)
        if head is None:
            return None
        b0, b1 = head
        self._last_fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            ext = self._read_exact(2)
            if ext is None:
                return None
            (length,) = struct.unpack(">H", ext)
        elif length == 127:
            ext = self._read_exact(8)
            if ext is None:
                return None
            (length,) = struct.unpack(">Q", ext)
        if length > (1 << 24):
            return None  # refuse absurd frames
        mask = b""
        if masked:
            mask = self._read_exact(4)
            if mask is None:
                return None
        payload = self._read_exact(length) if length else b""
        if payload is None:
            return None
        if masked and length:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return opcode, payload

    def _send_frame(self, opcode: int, payload: bytes):
        header = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header += bytes([n])
        elif n < (1 << 16):
            header += bytes([126]) + struct.pack(">H", n)
        else:
            header += bytes([127]) + struct.pack(">Q", n)
        self.wfile.write(header + payload)
        self.wfile.flush()


class AirtraceServer(socketserver.ThreadingTCPServer):
    """Threaded server; each connection owns one session, so interleaved
    sessions never share mutable state."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 8765, static_dir=None):
        super().__init__((host, port), _Handler)
        self.static_dir = str(static_dir) if static_dir else None

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve_forever(host: str = "127.0.0.1", port: int = 8765, static_dir=None) -> None:
    """Blocking entry point used by the command line."""
    if static_dir is None:
        default = Path.cwd() / "frontend" / "dist"
        static_dir = default if default.is_dir() else None
    server = AirtraceServer(host=host, port=port, static_dir=static_dir)
    location = f"{host}:{server.port}"
    print(f"airtrace service listening on {location}" + (f", serving UI from {static_dir}" if static_dir else ""))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
