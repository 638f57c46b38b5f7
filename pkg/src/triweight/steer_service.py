"""Interactive steering service for live packing runs.

Clients connect over TCP and exchange newline-delimited JSON frames: the
service streams snapshots of the run, clients send steering commands
(drag, vacancy transport, pause/resume, parameter tweaks). Commands land
in a queue that one bridge reasoner drains per iteration, so a command
never takes effect mid-phase. An idle client leaves the run identical to
a headless one with the same seed.
"""

from __future__ import annotations

import json
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, field

from .errors import DecodeError, PortInUse, UnknownCircle
from .packing import (
    DragReasoner,
    MaintenanceReasoner,
    PackingInstance,
    TransportReasoner,
    build_instance,
    density,
)
from .twa_engine import EngineConfig, GlobalContext, GlobalReasoner, run

SNAPSHOT_MIN_SPACING_S = 0.033  # broadcast throttle


# --- frames ---------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    iteration: int
    circles: tuple[float, ...]  # flat (id, x, y) triples
    radius: float
    density: float
    overlap_circle: int
    overlap_depth: float
    converged: bool


@dataclass(frozen=True)
class DragStart:
    id: int


@dataclass(frozen=True)
class DragMove:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class DragEnd:
    id: int


@dataclass(frozen=True)
class Vacancy:
    x: float
    y: float


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(frozen=True)
class SetParam:
    key: str
    value: float


@dataclass(frozen=True)
class ErrorFrame:
    message: str
    offset: int | None = None


Frame = (
    Snapshot | DragStart | DragMove | DragEnd | Vacancy | Pause | Resume | SetParam | ErrorFrame
)

_COMMANDS = {DragStart, DragMove, DragEnd, Vacancy, Pause, Resume, SetParam}


def encode(frame: Frame) -> bytes:
    """One JSON object per frame, newline-terminated."""
    if isinstance(frame, Snapshot):
        obj = {
            "type": "snapshot",
            "iteration": frame.iteration,
            "circles": list(frame.circles),
            "radius": frame.radius,
            "density": frame.density,
            "max_overlap": {"circle": frame.overlap_circle, "depth": frame.overlap_depth},
            "converged": frame.converged,
        }
    elif isinstance(frame, DragStart):
        obj = {"type": "command", "cmd": "drag_start", "id": frame.id}
    elif isinstance(frame, DragMove):
        obj = {"type": "command", "cmd": "drag_move", "id": frame.id, "x": frame.x, "y": frame.y}
    elif isinstance(frame, DragEnd):
        obj = {"type": "command", "cmd": "drag_end", "id": frame.id}
    elif isinstance(frame, Vacancy):
        obj = {"type": "command", "cmd": "vacancy", "x": frame.x, "y": frame.y}
    elif isinstance(frame, Pause):
        obj = {"type": "command", "cmd": "pause"}
    elif isinstance(frame, Resume):
        obj = {"type": "command", "cmd": "resume"}
    elif isinstance(frame, SetParam):
        obj = {"type": "command", "cmd": "set_param", "key": frame.key, "value": frame.value}
    elif isinstance(frame, ErrorFrame):
        obj = {"type": "error", "message": frame.message, "offset": frame.offset}
    else:
        raise TypeError(f"not a frame: {frame!r}")
    return json.dumps(obj, separators=(",", ":")).encode() + b"\n"


def _need(obj: dict, key: str, kinds, offset: int | None):
    if key not in obj:
        raise DecodeError(f"frame missing {key!r}", offset=offset)
    val = obj[key]
    if not isinstance(val, kinds) or isinstance(val, bool) and kinds is not bool:
        raise DecodeError(f"frame field {key!r} has wrong type", offset=offset)
    return val

def _coord(obj: dict, key: str, offset: int | None) -> float:
    val = float(_need(obj, key, (int, float), offset))
    if not (0.0 <= val <= 1.0) or math.isnan(val):
        raise DecodeError(f"coordinate {key!r} outside [0, 1]", offset=offset)
    return val


def decode(data: bytes, offset: int = 0) -> Frame:
    """Decode one frame; `offset` locates this frame in its stream for errors."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DecodeError(f"frame is not UTF-8: {exc}", offset=offset + exc.start) from exc
    except json.JSONDecodeError as exc:
        raise DecodeError(f"bad JSON: {exc.msg}", offset=offset + exc.pos) from exc
    if not isinstance(obj, dict):
        raise DecodeError("frame is not an object", offset=offset)
    ftype = _need(obj, "type", str, offset)
    if ftype == "snapshot":
        ov = _need(obj, "max_overlap", dict, offset)
        circles = _need(obj, "circles", list, offset)
        if len(circles) % 3 != 0:
            raise DecodeError("snapshot circles not (id, x, y) triples", offset=offset)
        return Snapshot(
            iteration=int(_need(obj, "iteration", int, offset)),
            circles=tuple(float(v) for v in circles),
            radius=float(_need(obj, "radius", (int, float), offset)),
            density=float(_need(obj, "density", (int, float), offset)),
            overlap_circle=int(_need(ov, "circle", int, offset)),
            overlap_depth=float(_need(ov, "depth", (int, float), offset)),
            converged=bool(_need(obj, "converged", bool, offset)),
        )
    if ftype == "error":
        off = obj.get("offset")
        return ErrorFrame(
            message=str(_need(obj, "message", str, offset)),
            offset=None if off is None else int(off),
        )
    if ftype != "command":
        raise DecodeError(f"unknown frame type {ftype!r}", offset=offset)
    cmd = _need(obj, "cmd", str, offset)
    if cmd == "drag_start":
        return DragStart(id=int(_need(obj, "id", int, offset)))
    if cmd == "drag_move":
        return DragMove(
            id=int(_need(obj, "id", int, offset)),
            x=_coord(obj, "x", offset),
            y=_coord(obj, "y", offset),
        )
    if cmd == "drag_end":
        return DragEnd(id=int(_need(obj, "id", int, offset)))
    if cmd == "vacancy":
        return Vacancy(x=_coord(obj, "x", offset), y=_coord(obj, "y", offset))
    if cmd == "pause":
        return Pause()
    if cmd == "resume":
        return Resume()
    if cmd == "set_param":
        return SetParam(
            key=str(_need(obj, "key", str, offset)),
            value=float(_need(obj, "value", (int, float), offset)),
        )
    raise DecodeError(f"unknown command {cmd!r}", offset=offset)


class FrameReader:
    """Splits a byte stream into frames, tracking absolute offsets."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._consumed = 0  # bytes handed out or discarded so far

    def feed(self, data: bytes) -> list[tuple[Frame | None, DecodeError | None]]:
        """Returns (frame, None) per good line, (None, error) per bad one."""
        self._buf.extend(data)
        out: list[tuple[Frame | None, DecodeError | None]] = []
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                return out
            line = bytes(self._buf[:nl])
            del self._buf[: nl + 1]
            at = self._consumed
            self._consumed += nl + 1
            if not line.strip():
                continue
            try:
                out.append((decode(line, offset=at), None))
            except DecodeError as exc:
                out.append((None, exc))


# --- session --------------------------------------------------------------


class _Client:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.reader = FrameReader()
        self.lock = threading.Lock()
        self.dead = False

    def send(self, payload: bytes) -> None:
        if self.dead:
            return
        try:
            with self.lock:
                self.sock.sendall(payload)
        except OSError:
            self.dead = True


class _CommandBridge(GlobalReasoner):
    """Drains the network command queue once per iteration.

    Runs between maintenance and the steering reasoners, so a command's
    effects enter the graph at the next boundary and are visible in the
    snapshot one or two iterations after receipt.
    """

    name = "command_bridge"

    def __init__(self, service: SteerService):
        self.service = service

    def reason(self, ctx: GlobalContext) -> None:
        self.service._apply_commands(ctx)


@dataclass
class SessionTelemetry:
    iterations: int = 0
    snapshots_sent: int = 0
    commands_applied: int = 0
    bad_frames: int = 0


class SteerService:
    """One packing run exposed to browser-grade clients.

    The caller's thread drives the solver via serve(); socket accept and
    per-client reads run on daemon threads. Commands take effect in the
    global-reasoner section only. The run keeps going after convergence
    waiting for more steering until stop() or client commands end it.
    """

    def __init__(
        self,
        n: int,
        radius: float,
        seed: int = 0,
        config: EngineConfig | None = None,
        buffer_fraction: float = 0.05,
        host: str = "127.0.0.1",
        port: int = 7870,
        snapshot_every: int | None = None,
    ):
        self.instance = PackingInstance(n, radius, buffer_fraction)
        if config is None:
            config = EngineConfig(epsilon_convergence=1e-6, max_iterations=100_000, rng_seed=seed)
        self.config = config
        self.graph, self.cvars = build_instance(
            n, radius, seed=seed, buffer_fraction=buffer_fraction
        )
        self.maintenance = MaintenanceReasoner(self.instance, self.cvars, rng_seed=config.rng_seed)
        self.drag = DragReasoner(self.cvars)
        self.transport = TransportReasoner(self.cvars, self.maintenance)
        # every iteration at desk scale; thin out for bigger instances
        self.snapshot_every = snapshot_every or (1 if n <= 10_000 else 10)

        self.telemetry = SessionTelemetry()
        self._commands: queue.Queue[Frame] = queue.Queue()
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._paused = False
        self._stop = threading.Event()
        self._last_sent = 0.0
        self._last_snapshot: bytes | None = None
        self._iteration = 0
        self._converged = False

        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            self._sock.close()
            raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
        self._sock.listen(8)
        self.host, self.port = self._sock.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    # --- network side -----------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                self._sock.settimeout(0.2)
                sock, _addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            client = _Client(sock)
            with self._clients_lock:
                self._clients.append(client)
            # join semantics: a fresh client sees the state immediately
            snap = self._last_snapshot
            if snap is not None:
                client.send(snap)
            threading.Thread(target=self._read_loop, args=(client,), daemon=True).start()

    def _read_loop(self, client: _Client) -> None:
        while not self._stop.is_set() and not client.dead:
            try:
                client.sock.settimeout(0.2)
                data = client.sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            for frame, err in client.reader.feed(data):
                if err is not None:
                    # malformed frame: answer, keep the connection
                    self.telemetry.bad_frames += 1
                    client.send(encode(ErrorFrame(message=str(err), offset=err.offset)))
                elif type(frame) in _COMMANDS:
                    self._commands.put(frame)
                else:
                    client.send(encode(ErrorFrame(message="clients send commands only")))
        client.dead = True
        try:
            client.sock.close()
        except OSError:
            pass
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)

    def _broadcast(self, payload: bytes) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            client.send(payload)

    # --- command application ---------------------------------------------

    def _apply_commands(self, ctx: GlobalContext) -> None:
        while True:
            try:
                frame = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                self._apply_one(frame)
                self.telemetry.commands_applied += 1
            except UnknownCircle as exc:
                self._broadcast(encode(ErrorFrame(message=str(exc))))

    def _apply_one(self, frame: Frame) -> None:
        if isinstance(frame, DragStart):
            if frame.id not in self.cvars.x_of:
                raise UnknownCircle(f"no circle {frame.id}")
            # circle ids are dense 0..n-1, so they index the position arrays
            self.drag.press(
                frame.id,
                float(self.maintenance.x[frame.id]),
                float(self.maintenance.y[frame.id]),
            )
        elif isinstance(frame, DragMove):
            if self.drag._target != frame.id:
                self.drag.press(frame.id, frame.x, frame.y)
            else:
                self.drag.move(frame.x, frame.y)
        elif isinstance(frame, DragEnd):
            if self.drag._target == frame.id:
                self.drag.release()
        elif isinstance(frame, Vacancy):
            self.transport.trigger(frame.x, frame.y)
        elif isinstance(frame, Pause):
            self._paused = True
        elif isinstance(frame, Resume):
            self._paused = False
        elif isinstance(frame, SetParam):
            if frame.key == "drag_weight":
                if frame.value <= 0:
                    self._broadcast(encode(ErrorFrame(message="drag_weight must be positive")))
                else:
                    self.drag.weight = float(frame.value)
            elif frame.key == "snapshot_every":
                if frame.value < 1:
                    self._broadcast(encode(ErrorFrame(message="snapshot_every must be >= 1")))
                else:
                    self.snapshot_every = int(frame.value)
            else:
                self._broadcast(encode(ErrorFrame(message=f"unknown param {frame.key!r}")))

    def _drain_paused(self) -> None:
        """Handle commands while the solver is held still."""
        while self._paused and not self._stop.is_set():
            try:
                frame = self._commands.get(timeout=0.02)
            except queue.Empty:
                self._maybe_heartbeat()
                continue
            try:
                self._apply_one(frame)
                self.telemetry.commands_applied += 1
            except UnknownCircle as exc:
                self._broadcast(encode(ErrorFrame(message=str(exc))))
            self._maybe_heartbeat()

    def _maybe_heartbeat(self) -> None:
        snap = self._last_snapshot
        if snap is None:
            return
        now = time.perf_counter()
        if now - self._last_sent >= SNAPSHOT_MIN_SPACING_S:
            self._broadcast(snap)
            self._last_sent = now

    # --- snapshots --------------------------------------------------------

    def _build_snapshot(self) -> Snapshot:
        xs = self.maintenance.x
        ys = self.maintenance.y
        flat: list[float] = []
        for c in range(len(xs)):
            flat.extend((float(c), float(xs[c]), float(ys[c])))
        report = self.maintenance.last_report
        return Snapshot(
            iteration=self._iteration,
            circles=tuple(flat),
            radius=self.instance.radius,
            density=density(self.instance.n_circles, self.instance.radius),
            overlap_circle=report.circle,
            overlap_depth=report.depth,
            converged=self._converged,
        )

    def _publish(self, force: bool = False) -> None:
        payload = encode(self._build_snapshot())
        self._last_snapshot = payload
        now = time.perf_counter()
        if force or now - self._last_sent >= SNAPSHOT_MIN_SPACING_S:
            self._broadcast(payload)
            self._last_sent = now
            self.telemetry.snapshots_sent += 1

    # --- solver side ------------------------------------------------------

    def steering_pending(self) -> bool:
        return (
            not self._commands.empty()
            or self.drag.active
            or self.transport.active
        )

    def serve(self, idle_wait: float = 0.05, max_sessions: int | None = None) -> None:
        """Drive the run, restarting it when steering arrives after convergence.

        Blocks the calling thread until stop(). idle_wait is the poll
        interval while converged with nothing to do; max_sessions caps
        run restarts for tests.
        """
        bridge = _CommandBridge(self)
        reasoners = [self.maintenance, bridge, self.drag, self.transport]
        sessions = 0
        offset = 0
        try:
            while not self._stop.is_set():
                sessions += 1
                last_iter = 0
                for status in run(self.graph, self.config, (), reasoners):
                    last_iter = status.iteration
                    self._iteration = offset + status.iteration
                    self._converged = status.converged
                    self.telemetry.iterations += 1
                    if status.iteration % self.snapshot_every == 0 or status.converged:
                        self._publish(force=status.converged)
                    if self._paused:
                        self._drain_paused()
                    if self._stop.is_set():
                        break
                offset += last_iter
                if max_sessions is not None and sessions >= max_sessions:
                    return
                # settled: wait for new steering, then spin the run back up
                while not self._stop.is_set() and not self.steering_pending():
                    if self._paused:
                        self._drain_paused()
                    self._maybe_heartbeat()
                    time.sleep(idle_wait)
        finally:
            self._shutdown()

    def stop(self) -> None:
        self._stop.set()
        try:
            self._sock.close()  # unblocks accept; serve()'s cleanup does the rest
        except OSError:
            pass

    def _shutdown(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
            self._clients.clear()
        for client in clients:
            try:
                client.sock.close()
            except OSError:
                pass


def serve_packing(
    n: int,
    radius: float,
    seed: int = 0,
    port: int = 7870,
    host: str = "127.0.0.1",
    snapshot_every: int | None = None,
    config: EngineConfig | None = None,
    buffer_fraction: float = 0.05,
) -> SteerService:
    """Create a service bound to the port; the caller then runs serve()."""
    return SteerService(
        n,
        radius,
        seed=seed,
        config=config,
        buffer_fraction=buffer_fraction,
        host=host,
        port=port,
        snapshot_every=snapshot_every,
    )
