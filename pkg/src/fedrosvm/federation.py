"""Synchronous federated training runtime.

One server orchestrates G clients for T rounds. Every round is a strict
barrier: the server broadcasts the current model, every client answers with
its local result (a subgradient for SM rounds, a proximal iterate for ADMM
rounds), and only when all G results are in does the server update. A
client failure aborts the whole run with a diagnostic naming the client;
there is no partial-participation fallback.

Two interchangeable transports carry the messages: an in-process one built
on queues (the default; client workers run on threads inside
`run_federation`) and a TCP one speaking the length-prefixed frame format
from `wire`. Both move the exact same message sequence and the server
reduces results in client order, so the two produce bit-identical models
on the same inputs.

ADMM bookkeeping: multipliers live at the clients (the wire only ever
carries w_g), and the server maintains its own mirror by applying the same
deterministic update rule, which is what lets it form the Prop.-5-style
weighted sum without extra traffic.
"""

import queue
import socket
import threading
import time
import traceback
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .core import GlobalModel
from .robust import (
    ClientModel,
    admm_client_step,
    admm_multiplier_update,
    build_sm_lp,
    extract_worst_case,
    sm_subgradient,
    worst_case_risk_dual,
)
from .solver import SolverStatus, solve
from .wire import (
    DEFAULT_FRAME_CAP,
    AdmmResult,
    Broadcast,
    ProtocolError,
    RoundStart,
    Shutdown,
    SmResult,
    read_frame,
    write_frame,
)


class Algorithm(Enum):
    SM = "sm"
    ADMM = "admm"
    ADMM_SC = "admm_sc"


@dataclass
class FederationConfig:
    """Run-level knobs. Client weights (alpha) and robustness parameters
    live in the per-client configs; the federation-level rho is
    authoritative and is copied over each client's rho at run start so the
    proximal penalty always matches the server's aggregation rule.

    T = 0 is allowed and returns the initial model untouched with an empty
    trace.
    """

    clients: list
    T: int
    algorithm: Algorithm = Algorithm.SM
    gamma0: float = 1.0
    rho: float = 1.0
    w0: np.ndarray = None
    mu0: np.ndarray = None

    def __post_init__(self):
        if len(self.clients) < 1:
            raise ValueError("at least one client is required")
        if self.T < 0:
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if self.gamma0 <= 0.0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.rho <= 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        total = sum(c.alpha for c in self.clients)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"client weights must sum to 1, got {total!r}")
        taus = [c.tau for c in self.clients]
        if self.algorithm is Algorithm.ADMM and any(t != 0.0 for t in taus):
            raise ValueError("plain ADMM expects tau = 0 on every client")
        if self.algorithm is Algorithm.ADMM_SC and any(t <= 0.0 for t in taus):
            raise ValueError("the strongly convex variant needs tau > 0 everywhere")

    @property
    def G(self):
        return len(self.clients)

    @property
    def alphas(self):
        return np.array([c.alpha for c in self.clients])


@dataclass
class RoundTrace:
    t: int
    w_after: np.ndarray
    global_objective: float
    consensus_residual: float
    wall_time: float


@dataclass
class FederationResult:
    """Final and best-objective iterates plus the per-round trace. The
    subgradient method only guarantees convergence of the best objective
    value, so downstream reporting uses w_best; ADMM callers usually want
    w_last."""

    w_last: GlobalModel
    w_best: GlobalModel
    best_round: int
    best_objective: float
    traces: list


def sm_server_update(w, subgradients, t, gamma0):
    """Diminishing-step aggregation: w - (gamma0/t) * sum alpha_g v_g."""
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    if not subgradients:
        raise ValueError("no subgradients to aggregate (barrier violated)")
    w = np.asarray(w, dtype=float)
    step = np.zeros_like(w)
    for alpha, v in subgradients:
        step += alpha * np.asarray(v, dtype=float)
    return w - (gamma0 / t) * step


def admm_server_update(pairs):
    """Weighted consensus: w = sum alpha_g (w_g + mu_g)."""
    if not pairs:
        raise ValueError("no client iterates to aggregate (barrier violated)")
    first = np.asarray(pairs[0][1], dtype=float)
    w = np.zeros_like(first)
    for alpha, w_g, mu_g in pairs:
        w += alpha * (np.asarray(w_g, dtype=float) + np.asarray(mu_g, dtype=float))
    return w


def rho_upper_bound(alphas, taus):
    """Largest penalty with a convergence guarantee for the strongly
    convex variant: min over g < G of 4*alpha_g*tau_g / (g(2G+1-g)),
    together with 4*alpha_G*tau_G / ((G-1)(G+2)) for the last client."""
    alphas = np.asarray(alphas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    G = alphas.size
    if G < 2:
        raise ValueError("the penalty bound needs at least two clients")
    if taus.size != G:
        raise ValueError("need one tau per client")
    if (alphas <= 0).any() or (taus <= 0).any():
        raise ValueError("weights and taus must be positive")
    cands = [
        4.0 * alphas[g - 1] * taus[g - 1] / (g * (2 * G + 1 - g))
        for g in range(1, G)
    ]
    cands.append(4.0 * alphas[G - 1] * taus[G - 1] / ((G - 1) * (G + 2)))
    return float(min(cands))


def global_objective(w, client_data, client_cfgs):
    """Mixture objective sum alpha_g * worst-case risk of client g at w,
    evaluated through the exact dual."""
    total = 0.0
    for data, cfg in zip(client_data, client_cfgs):
        total += cfg.alpha * worst_case_risk_dual(w, data, cfg)[0]
    return total


# --------------------------------------------------------------- transports


class _ClientFailure:
    def __init__(self, description):
        self.description = description


class _QueueChannel:
    """Client endpoint of the in-process transport."""

    def __init__(self, inbox, outbox):
        self._inbox = inbox
        self._outbox = outbox

    def send(self, msg):
        self._outbox.put(("result", msg))

    def send_failure(self, description):
        self._outbox.put(("failure", description))

    def recv(self):
        return self._inbox.get()

    def close(self):
        pass


class InProcessTransport:
    """Queue-backed transport; `run_federation` spawns the client workers
    itself when given one of these."""

    needs_local_workers = True

    def __init__(self):
        self._to_client = []
        self._from_clients = queue.Queue()

    def start(self, G):
        self._to_client = [queue.Queue() for _ in range(G)]

    def client_channel(self, g):
        return _QueueChannel(self._to_client[g], self._from_clients)

    def broadcast(self, msg):
        for q in self._to_client:
            q.put(msg)

    def collect(self, G):
        results = {}
        while len(results) < G:
            kind, payload = self._from_clients.get()
            if kind == "failure":
                raise RuntimeError(f"federation aborted: {payload}")
            g = payload.g
            if g in results:
                raise RuntimeError(f"barrier violation: duplicate result from client {g}")
            if not (0 <= g < G):
                raise RuntimeError(f"barrier violation: unknown client id {g}")
            results[g] = payload
        return results

    def close(self):
        pass


class TcpServerTransport:
    """Server side of the TCP transport. Binds immediately; `start`
    accepts exactly G client connections before the first round."""

    needs_local_workers = False

    def __init__(self, host="127.0.0.1", port=0, frame_cap=DEFAULT_FRAME_CAP,
                 accept_timeout=60.0):
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(accept_timeout)
        self._frame_cap = frame_cap
        self._conns = []
        self._readers = []
        self._from_clients = queue.Queue()

    @property
    def address(self):
        return self._listener.getsockname()

    def start(self, G):
        for i in range(G):
            try:
                conn, peer = self._listener.accept()
            except socket.timeout:
                raise RuntimeError(
                    f"only {i} of {G} clients connected before the accept timeout"
                )
            self._conns.append(conn)
            reader = threading.Thread(
                target=self._read_loop, args=(conn, peer), daemon=True
            )
            reader.start()
            self._readers.append(reader)

    def _read_loop(self, conn, peer):
        while True:
            try:
                msg = read_frame(conn, self._frame_cap)
            except (ConnectionError, OSError):
                self._from_clients.put(
                    ("failure", f"connection from {peer} lost")
                )
                return
            except ProtocolError as exc:
                self._from_clients.put(
                    ("failure", f"protocol error from {peer}: {exc}")
                )
                return
            self._from_clients.put(("result", msg))

    def broadcast(self, msg):
        for conn in self._conns:
            write_frame(conn, msg, self._frame_cap)

    def collect(self, G):
        results = {}
        while len(results) < G:
            kind, payload = self._from_clients.get()
            if kind == "failure":
                raise RuntimeError(f"federation aborted: {payload}")
            g = payload.g
            if g in results:
                raise RuntimeError(f"barrier violation: duplicate result from client {g}")
            if not (0 <= g < G):
                raise RuntimeError(f"barrier violation: unknown client id {g}")
            results[g] = payload
        return results

    def close(self):
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass
        self._listener.close()


class _SocketChannel:
    """Client endpoint of the TCP transport."""

    def __init__(self, sock, frame_cap=DEFAULT_FRAME_CAP):
        self._sock = sock
        self._frame_cap = frame_cap

    def send(self, msg):
        write_frame(self._sock, msg, self._frame_cap)

    def recv(self):
        return read_frame(self._sock, self._frame_cap)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


def transport_tcp_serve(host="127.0.0.1", port=0, frame_cap=DEFAULT_FRAME_CAP,
                        accept_timeout=60.0):
    return TcpServerTransport(host, port, frame_cap, accept_timeout)


def transport_tcp_connect(address, frame_cap=DEFAULT_FRAME_CAP, timeout=60.0):
    sock = socket.create_connection(address, timeout=timeout)
    sock.settimeout(None)
    return _SocketChannel(sock, frame_cap)


# ------------------------------------------------------------- client side


def run_client(channel, g, data, cfg, algorithm, mu0=None, solver_cfg=None):
    """Message loop for one client; returns when the server shuts the
    federation down.

    SM rounds: solve the worst-case LP at the received model, extract the
    extremal distribution, reply with the subgradient. ADMM rounds: solve
    the proximal QP (warm-started across rounds), reply with w_g, and fold
    the follow-up broadcast into the local multipliers.
    """
    state = None
    cache = {}
    if algorithm is not Algorithm.SM:
        mu = np.ones(data.p) if mu0 is None else np.asarray(mu0, dtype=float).copy()
        state = ClientModel(w_g=np.zeros(data.p), mu_g=mu)
    try:
        while True:
            msg = channel.recv()
            if isinstance(msg, Shutdown):
                return
            if isinstance(msg, RoundStart):
                if algorithm is Algorithm.SM:
                    sol = solve(build_sm_lp(msg.w, data, cfg), solver_cfg)
                    if sol.status is not SolverStatus.OPTIMAL:
                        raise RuntimeError(
                            f"worst-case LP did not converge: {sol.message}"
                        )
                    dist = extract_worst_case(sol, data, cfg)
                    channel.send(SmResult(g=g, v=sm_subgradient(msg.w, dist)))
                else:
                    state = admm_client_step(
                        msg.w, state, data, cfg,
                        solver_cfg=solver_cfg, cache=cache, client_id=g,
                    )
                    channel.send(AdmmResult(g=g, w_g=state.w_g))
            elif isinstance(msg, Broadcast):
                if state is not None:
                    state = admm_multiplier_update(state, msg.w)
            else:
                raise RuntimeError(f"unexpected message: {type(msg).__name__}")
    finally:
        channel.close()


def _worker(channel, g, data, cfg, algorithm, mu0, solver_cfg):
    try:
        run_client(channel, g, data, cfg, algorithm, mu0=mu0, solver_cfg=solver_cfg)
    except Exception:
        channel.send_failure(f"client {g} failed:\n{traceback.format_exc()}")


# ------------------------------------------------------------- server side


def _as_vector(value, p, name, fill):
    if value is None:
        return np.full(p, fill, dtype=float)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(p, float(arr))
    if arr.shape != (p,):
        raise ValueError(f"{name} must have length {p}, got shape {arr.shape}")
    return arr.copy()


def run_federation(cfg, client_data, transport=None, solver_cfg=None):
    """Run T synchronous rounds and return the result with full telemetry.

    `client_data` is one DatasetView per client (also used to evaluate the
    global objective after each round). With the default in-process
    transport the client workers run on local threads; with a TCP server
    transport the clients are expected to have connected already (see
    `run_client` / `transport_tcp_connect`).
    """
    G = cfg.G
    if len(client_data) != G:
        raise ValueError(f"expected {G} client datasets, got {len(client_data)}")
    dims = {d.p for d in client_data}
    if len(dims) != 1:
        raise ValueError(f"clients disagree on feature dimension: {sorted(dims)}")
    p = dims.pop()

    w = _as_vector(cfg.w0, p, "w0", 0.0)
    mu0 = _as_vector(cfg.mu0, p, "mu0", 1.0)
    ccfgs = [replace(c, rho=cfg.rho) for c in cfg.clients]
    is_admm = cfg.algorithm is not Algorithm.SM

    if cfg.algorithm is Algorithm.ADMM_SC and G >= 2:
        cap = rho_upper_bound(cfg.alphas, [c.tau for c in ccfgs])
        if cfg.rho > cap:
            warnings.warn(
                f"rho={cfg.rho:.6g} exceeds the convergence bound {cap:.6g}; "
                "consensus is no longer guaranteed",
                RuntimeWarning,
            )

    if cfg.T == 0:
        model = GlobalModel(w=w)
        return FederationResult(
            w_last=model, w_best=model, best_round=0,
            best_objective=None, traces=[],
        )

    transport = transport if transport is not None else InProcessTransport()
    transport.start(G)

    workers = []
    if getattr(transport, "needs_local_workers", False):
        for g in range(G):
            th = threading.Thread(
                target=_worker,
                args=(transport.client_channel(g), g, client_data[g], ccfgs[g],
                      cfg.algorithm, mu0, solver_cfg),
            )
            th.start()
            workers.append(th)

    server_mu = [mu0.copy() for _ in range(G)]
    traces = []
    try:
        for t in range(1, cfg.T + 1):
            started = time.perf_counter()
            transport.broadcast(RoundStart(t=t, w=w))
            results = transport.collect(G)
            if cfg.algorithm is Algorithm.SM:
                for g in range(G):
                    if not isinstance(results[g], SmResult):
                        raise RuntimeError(
                            f"client {g} sent {type(results[g]).__name__} in an SM round"
                        )
                w = sm_server_update(
                    w, [(ccfgs[g].alpha, results[g].v) for g in range(G)],
                    t, cfg.gamma0,
                )
                consensus = 0.0
            else:
                for g in range(G):
                    if not isinstance(results[g], AdmmResult):
                        raise RuntimeError(
                            f"client {g} sent {type(results[g]).__name__} in an ADMM round"
                        )
                iterates = [results[g].w_g for g in range(G)]
                w = admm_server_update(
                    [(ccfgs[g].alpha, iterates[g], server_mu[g]) for g in range(G)]
                )
                consensus = max(
                    float(np.linalg.norm(iterates[g] - w)) for g in range(G)
                )
                transport.broadcast(Broadcast(t=t, w=w))
                for g in range(G):
                    server_mu[g] += iterates[g] - w
            objective = global_objective(w, client_data, ccfgs)
            traces.append(RoundTrace(
                t=t, w_after=w.copy(), global_objective=objective,
                consensus_residual=consensus,
                wall_time=time.perf_counter() - started,
            ))
    finally:
        try:
            transport.broadcast(Shutdown())
        except Exception:
            pass  # sockets may already be gone; shutdown is best-effort
        for th in workers:
            th.join(timeout=30.0)
        transport.close()

    best = min(traces, key=lambda tr: tr.global_objective)
    return FederationResult(
        w_last=GlobalModel(w=w),
        w_best=GlobalModel(w=best.w_after.copy()),
        best_round=best.t,
        best_objective=best.global_objective,
        traces=traces,
    )
