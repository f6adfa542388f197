"""Message-passing multiuser detection for SCMA.

Two domains are supported. The probability domain runs sum-product updates on
likelihoods ``exp(-d / N0)``; the log domain (Max-Log) replaces sums by maxima
and products by sums. Each can use the exact initial metric or one of three
cheaper ones:

=========  ==========================  =====================
variant    probability domain          log domain
=========  ==========================  =====================
exact      ``exp(-|r|^2 / N0)``        ``-|r|^2 / N0``
a1         ``exp(-|r| / N0)``          ``-|r| / N0``
a2         ``exp(-|r|^2)``             ``-|r|^2``
a3         ``exp(-|r|)``               ``-|r|``
=========  ==========================  =====================

where ``r = y_k - h_k * sum_i x_{k,i}`` is the residual at resource ``k``.

All kernels are batched: the leading axis indexes independent frames.
Messages are stored per factor-graph edge as arrays of shape ``(B, E, M)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .channel import ReceivedFrame
from .fixedpoint import Quantization
from .metrics import OpCounters
from .system import ScmaSystem

ALGORITHMS = ("dmpa", "maxlog")
APPROXIMATIONS = ("exact", "a1", "a2", "a3")
MONITORS = ("both", "r2l", "l2r", "beliefs")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder selection and tuning.

    ``normalization`` controls the per-vector max subtraction applied to
    log-domain layer messages: ``"auto"`` enables it only with quantization.
    ``monitor`` picks what the stability test watches: ``"both"`` message
    directions, one of them (``"r2l"``, ``"l2r"``), or the normalized layer
    beliefs (``"beliefs"``). ``relative_to`` sets the denominator of the
    relative change: each entry itself (``"entry"``) or the peak magnitude of
    its vector (``"peak"``).
    ``adaption_schedule`` optionally maps SNR (dB, ascending) to ``(alpha, beta)``;
    the last row whose SNR does not exceed the operating point applies.
    """

    algorithm: str = "maxlog"
    approximation: str = "exact"
    max_iterations: int = 5
    early_termination: bool = False
    self_adaption: bool = False
    epsilon: float = 0.01
    alpha: float = 1.1
    beta: float = 0.9
    adaption_schedule: tuple[tuple[float, float, float], ...] = ()
    monitor: str = "beliefs"
    relative_to: str = "peak"
    delta: float = 1e-12
    normalization: str = "auto"
    quantization: Quantization | None = None

    def __post_init__(self):
        object.__setattr__(self, "adaption_schedule",
                           tuple(tuple(float(v) for v in row) for row in self.adaption_schedule))
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.approximation not in APPROXIMATIONS:
            raise ConfigError(f"approximation must be one of {APPROXIMATIONS}, got {self.approximation!r}")
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.monitor not in MONITORS:
            raise ConfigError(f"monitor must be one of {MONITORS}, got {self.monitor!r}")
        if self.relative_to not in ("entry", "peak"):
            raise ConfigError(f"relative_to must be 'entry' or 'peak', got {self.relative_to!r}")
        if self.normalization not in ("auto", "on", "off"):
            raise ConfigError(f"normalization must be 'auto', 'on' or 'off', got {self.normalization!r}")
        if self.stopping and not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.self_adaption:
            for _, a, b in self.adaption_schedule + ((0.0, self.alpha, self.beta),):
                if not a > 1:
                    raise ConfigError("alpha must be > 1")
                if not 0 < b < 1:
                    raise ConfigError("beta must lie in (0, 1)")
        if not self.delta > 0:
            raise ConfigError("delta must be > 0")

    @property
    def domain(self) -> str:
        return "log" if self.algorithm == "maxlog" else "probability"

    @property
    def uses_n0(self) -> bool:
        return self.approximation in ("exact", "a1")

    @property
    def stopping(self) -> bool:
        return self.early_termination or self.self_adaption

    @property
    def shift_messages(self) -> bool:
        if self.normalization == "auto":
            return self.quantization is not None
        return self.normalization == "on"

    @property
    def name(self) -> str:
        parts = [self.algorithm, self.approximation, f"i{self.max_iterations}"]
        if self.self_adaption:
            parts.append("sa")
        elif self.early_termination:
            parts.append("et")
        if self.quantization is not None:
            parts.append("fx")
        return "-".join(parts)

    def for_snr(self, snr_db: float) -> "DecoderConfig":
        """Resolve ``alpha``/``beta`` from the schedule at one operating point."""
        rows = [r for r in sorted(self.adaption_schedule) if r[0] <= snr_db]
        if not rows:
            return self
        _, a, b = rows[-1]
        return replace(self, alpha=a, beta=b)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adaption_schedule"] = [list(r) for r in self.adaption_schedule]
        d["quantization"] = None if self.quantization is None else self.quantization.to_dict()
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "DecoderConfig":
        doc = dict(doc)
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown decoder config keys: {sorted(unknown)}")
        if doc.get("quantization") is not None:
            doc["quantization"] = Quantization.from_dict(doc["quantization"])
        return cls(**doc)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "DecoderConfig":
        return cls.from_dict(json.loads(text))


# -- precomputed tables ------------------------------------------------------------


@lru_cache(maxsize=32)
def _superpositions(system: ScmaSystem, quant_key: tuple | None) -> tuple[np.ndarray, ...]:
    """Per resource, ``sum_i x_{k,i}`` over all symbol combinations of its users.

    Axis ``i`` of the ``M x ... x M`` table belongs to the ``i``-th user at the
    resource (ascending user index).
    """
    cb = system.codebook
    if quant_key is not None:
        from .fixedpoint import FixedPointFormat, quantize
        cb = quantize(cb, FixedPointFormat(*quant_key))
    M = system.M
    tables = []
    for k, users in enumerate(system.graph.resource_users):
        d = len(users)
        s = np.zeros((M,) * d, dtype=complex)
        for i, j in enumerate(users):
            shape = [1] * d
            shape[i] = M
            s = s + cb[j, :, k].reshape(shape)
        tables.append(s)
    return tuple(tables)


def _expand(v: np.ndarray, axis: int, d: int) -> np.ndarray:
    """View ``(B, M)`` as ``(B, 1, .., M, .., 1)`` with ``M`` on combination axis ``axis``."""
    shape = [v.shape[0]] + [1] * d
    shape[1 + axis] = v.shape[1]
    return v.reshape(shape)


# -- state -------------------------------------------------------------------------


@dataclass
class BeliefState:
    """Messages and bookkeeping for a batch of frames.

    ``stable`` is the stability matrix: one flag per message vector, column 0
    for resource-to-layer and column 1 for layer-to-resource messages.
    ``stable_beliefs`` holds one flag per layer belief vector.
    """

    domain: str
    init: list[np.ndarray]
    r2l: np.ndarray
    l2r: np.ndarray
    stable: np.ndarray
    prev_r2l: np.ndarray | None = None
    prev_l2r: np.ndarray | None = None
    fallbacks: np.ndarray | None = None
    stable_beliefs: np.ndarray | None = None
    prev_beliefs: np.ndarray | None = None

    @property
    def batch(self) -> int:
        return self.r2l.shape[0]

    def take(self, idx: np.ndarray) -> "BeliefState":
        pick = lambda a: None if a is None else a[idx]
        return BeliefState(self.domain, [p[idx] for p in self.init], self.r2l[idx], self.l2r[idx],
                           self.stable[idx], pick(self.prev_r2l), pick(self.prev_l2r), pick(self.fallbacks),
                           pick(self.stable_beliefs), pick(self.prev_beliefs))

    def put(self, idx: np.ndarray, sub: "BeliefState") -> None:
        for p, q in zip(self.init, sub.init):
            p[idx] = q
        self.r2l[idx] = sub.r2l
        self.l2r[idx] = sub.l2r
        self.stable[idx] = sub.stable
        if sub.prev_r2l is not None:
            if self.prev_r2l is None:
                self.prev_r2l = np.zeros_like(self.r2l)
            self.prev_r2l[idx] = sub.prev_r2l
        if sub.prev_l2r is not None:
            if self.prev_l2r is None:
                self.prev_l2r = np.zeros_like(self.l2r)
            self.prev_l2r[idx] = sub.prev_l2r
        self.fallbacks[idx] = sub.fallbacks
        self.stable_beliefs[idx] = sub.stable_beliefs
        if sub.prev_beliefs is not None:
            if self.prev_beliefs is None:
                self.prev_beliefs = np.zeros(sub.prev_beliefs.shape[1:], dtype=float)[None].repeat(self.batch, 0)
            self.prev_beliefs[idx] = sub.prev_beliefs


def new_state(system: ScmaSystem, init: list[np.ndarray], domain: str) -> BeliefState:
    B = init[0].shape[0]
    E, M = system.graph.num_edges, system.M
    start = 1.0 / M if domain == "probability" else 0.0
    return BeliefState(
        domain=domain,
        init=init,
        r2l=np.zeros((B, E, M)),
        l2r=np.full((B, E, M), start),
        stable=np.zeros((B, E, 2), dtype=bool),
        fallbacks=np.zeros(B, dtype=np.int64),
        stable_beliefs=np.zeros((B, system.J), dtype=bool),
    )


# -- initialization ------------------------------------------------------------------


def init_probabilities(y, system: ScmaSystem, cfg: DecoderConfig, *, N0=None, h=None,
                       counters: OpCounters | None = None) -> list[np.ndarray]:
    """Initial metric for every resource and every symbol combination of its users.

    Parameters
    ----------
    y : array_like, shape (B, K) or (K,)
        Received samples.
    N0 : float or array of shape (B,)
        Noise density; required by the ``exact`` and ``a1`` variants.
    h : array_like, optional
        Channel gains with the shape of ``y``; ``None`` means all ones.

    Returns
    -------
    list of np.ndarray
        Entry ``k`` has shape ``(B, M, ..., M)`` with one axis per user at ``k``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    B = y.shape[0]
    precision = None
    if cfg.uses_n0:
        if N0 is None or np.any(np.asarray(N0) <= 0):
            raise ConfigError(f"{cfg.algorithm}/{cfg.approximation} needs N0 > 0")
        precision = 1.0 / np.broadcast_to(np.asarray(N0, dtype=float), (B,))
    q = cfg.quantization
    if q is not None:
        y = q.input(y)
    tables = _superpositions(system, None if q is None else (q.input.total_bits, q.input.frac_bits))
    out = []
    for k, s in enumerate(tables):
        d = s.ndim
        n = B * s.size
        bshape = (B,) + (1,) * d
        if h is None:
            target = s[None]
        else:
            target = np.asarray(h)[:, k].reshape(bshape) * s[None]
            if counters is not None:
                counters.add("init", "MUL", 4 * n)
                counters.add("init", "ADD", 2 * n)
        r = y[:, k].reshape(bshape) - target
        if counters is not None:
            counters.add("init", "ADD", 2 * n)
        if cfg.approximation in ("exact", "a2"):
            dist = r.real * r.real + r.imag * r.imag
            if counters is not None:
                counters.add("init", "MUL", 2 * n)
                counters.add("init", "ADD", n)
        else:
            dist = np.abs(r)
            if counters is not None:
                counters.add("init", "MAG", n)
        if precision is not None:
            dist = dist * precision.reshape(bshape)
            if counters is not None:
                counters.add("init", "MUL", n)
        if cfg.domain == "probability":
            metric = np.exp(-dist)
            if counters is not None:
                counters.add("init", "EXP", n)
        else:
            metric = -dist
        if q is not None:
            metric = q.intermediate(metric)
        out.append(metric)
    return out


# -- node updates -------------------------------------------------------------------


def resource_kernel(P: np.ndarray, incoming: np.ndarray, domain: str,
                    counters: OpCounters | None = None) -> np.ndarray:
    """Outgoing messages of one resource node.

    ``P`` has shape ``(B, M, ..., M)`` with ``d`` symbol axes and ``incoming``
    has shape ``(B, d, M)``. Output ``a`` combines ``P`` with every incoming
    message except the ``a``-th, then marginalizes (sum or max) onto axis ``a``.
    """
    B, d, M = incoming.shape
    out = np.empty_like(incoming, dtype=float)
    for a in range(d):
        acc = P
        for i in range(d):
            if i == a:
                continue
            if domain == "probability":
                acc = acc * _expand(incoming[:, i], i, d)
            else:
                acc = acc + _expand(incoming[:, i], i, d)
        axes = tuple(1 + i for i in range(d) if i != a)
        if domain == "probability":
            out[:, a] = acc.sum(axis=axes) if axes else acc
        else:
            out[:, a] = acc.max(axis=axes) if axes else acc
    if counters is not None:
        n = B * d * M**d
        if domain == "probability":
            counters.add("resource", "MUL", (d - 1) * n)
            counters.add("resource", "ADD", n)
        else:
            counters.add("resource", "ADD", (d - 1) * n)
            counters.add("resource", "MAX", n)
    return out


def resource_node_update(state: BeliefState, k: int, system: ScmaSystem, cfg: DecoderConfig,
                         counters: OpCounters | None = None) -> np.ndarray:
    """Update (in place) and return the messages leaving resource ``k``, shape ``(B, d_k, M)``."""
    edges = system.graph.resource_edges[k]
    out = resource_kernel(state.init[k], state.l2r[:, edges], state.domain, counters)
    if cfg.quantization is not None:
        out = cfg.quantization.intermediate(out)
    state.r2l[:, edges] = out
    return out


def layer_kernel(incoming: np.ndarray, domain: str, *, shift: bool = False,
                 counters: OpCounters | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Outgoing messages of one layer node from its ``(B, N, M)`` incoming messages.

    Probability domain: normalized product of the other incoming messages; an
    all-zero product falls back to the uniform vector. Log domain: sum of the
    other incoming messages, optionally shifted so each vector peaks at 0.
    Returns the messages and a per-frame count of uniform fallbacks.
    """
    B, N, M = incoming.shape
    out = np.empty_like(incoming, dtype=float)
    fallbacks = np.zeros(B, dtype=np.int64)
    for a in range(N):
        others = [incoming[:, i] for i in range(N) if i != a]
        if domain == "probability":
            v = np.ones((B, M)) if not others else others[0].copy()
            for o in others[1:]:
                v = v * o
            total = v.sum(axis=1, keepdims=True)
            bad = ~(np.isfinite(total[:, 0]) & (total[:, 0] > 0))
            with np.errstate(invalid="ignore", divide="ignore"):
                v = v / total
            v[bad] = 1.0 / M
            fallbacks += bad
        else:
            v = np.zeros((B, M)) if not others else others[0].copy()
            for o in others[1:]:
                v = v + o
            if shift:
                v = v - v.max(axis=1, keepdims=True)
        out[:, a] = v
    if counters is not None:
        n = B * N * M
        extra = max(N - 2, 0) * n
        if domain == "probability":
            counters.add("layer", "MUL", extra)
            counters.add("layer", "ADD", n)
            counters.add("layer", "DIV", n)
        else:
            counters.add("layer", "ADD", extra)
            if shift:
                counters.add("layer", "MAX", n)
                counters.add("layer", "ADD", n)
        counters.add("layer", "SWOP", n)
    return out, fallbacks


def layer_node_update(state: BeliefState, j: int, system: ScmaSystem, cfg: DecoderConfig,
                      counters: OpCounters | None = None) -> np.ndarray:
    """Update (in place) and return the messages leaving layer ``j``, shape ``(B, N, M)``."""
    edges = system.graph.layer_edges[j]
    out, fb = layer_kernel(state.r2l[:, edges], state.domain, shift=cfg.shift_messages, counters=counters)
    if cfg.quantization is not None:
        out = cfg.quantization.intermediate(out)
    state.l2r[:, edges] = out
    state.fallbacks += fb
    return out


def judge(state: BeliefState, system: ScmaSystem, counters: OpCounters | None = None,
          quantization: Quantization | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Final beliefs ``Q`` of shape ``(B, J, M)`` and argmax decisions ``(B, J)``.

    Ties go to the smallest symbol index.
    """
    B, M = state.batch, system.M
    Q = _combine_incoming(state, system)
    if quantization is not None:
        Q = quantization.intermediate(Q)
    if counters is not None:
        n = B * sum((len(e) - 1) * M for e in system.graph.layer_edges)
        counters.add("judge", "MUL" if state.domain == "probability" else "ADD", n)
        counters.add("judge", "CMP", B * system.J * M)
    return Q.argmax(axis=2), Q


def _combine_incoming(state: BeliefState, system: ScmaSystem) -> np.ndarray:
    Q = np.empty((state.batch, system.J, system.M))
    for j, edges in enumerate(system.graph.layer_edges):
        msgs = state.r2l[:, edges]
        q = msgs[:, 0].copy()
        for i in range(1, msgs.shape[1]):
            q = q * msgs[:, i] if state.domain == "probability" else q + msgs[:, i]
        Q[:, j] = q
    return Q


def normalized_beliefs(state: BeliefState, system: ScmaSystem,
                       counters: OpCounters | None = None) -> np.ndarray:
    """Layer beliefs scaled to sum to 1 (probability) or shifted to peak at 0 (log).

    Used by the stability test when ``monitor="beliefs"``; costs are booked
    under the stability procedure.
    """
    Q = _combine_incoming(state, system)
    if state.domain == "probability":
        total = Q.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            Q = np.where(total > 0, Q / np.where(total > 0, total, 1.0), 1.0 / system.M)
    else:
        Q = Q - Q.max(axis=-1, keepdims=True)
    if counters is not None:
        B, M = state.batch, system.M
        n = B * sum((len(e) - 1) * M for e in system.graph.layer_edges)
        counters.add("stability", "MUL" if state.domain == "probability" else "ADD", n)
        counters.add("stability", "ADD", B * system.J * M)
        counters.add("stability", "DIV" if state.domain == "probability" else "MAX", B * system.J * M)
    return Q


def judge_beliefs(Q) -> np.ndarray:
    """Argmax with ties toward the smallest index."""
    return np.asarray(Q).argmax(axis=-1)


# -- stability ------------------------------------------------------------------------


def relative_change(V: np.ndarray, V_prev: np.ndarray, eps: float, delta: float,
                    relative_to: str = "entry") -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ``(V - V_prev) / V_prev`` and a stability mask.

    With ``relative_to="peak"`` the denominator is ``max |V_prev|`` over the
    last axis instead, so each vector is judged against its own scale rather
    than against its smallest entries.

    Where the denominator magnitude is at most ``delta`` the ratio is
    undefined; those entries are stable when ``|V - V_prev| <= eps * delta``
    and otherwise take the sign of the difference as ``+-inf``.
    """
    diff = V - V_prev
    if relative_to == "peak":
        denom = np.broadcast_to(np.abs(V_prev).max(axis=-1, keepdims=True), V_prev.shape)
    elif relative_to == "entry":
        denom = V_prev
    else:
        raise ValueError(f"relative_to must be 'entry' or 'peak', got {relative_to!r}")
    small = np.abs(denom) <= delta
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(small, 0.0, diff / np.where(small, 1.0, denom))
    fallback_stable = np.abs(diff) <= eps * delta
    r = np.where(small & ~fallback_stable, np.copysign(np.inf, diff), r)
    stable = np.where(small, fallback_stable, np.abs(r) <= eps)
    return r, stable


def check_stability_and_adapt(V: np.ndarray, V_prev: np.ndarray, cfg: DecoderConfig, domain: str,
                              mode: str = "terminate",
                              counters: OpCounters | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stability flags per message vector and (in ``adapt`` mode) rescaled beliefs.

    ``V`` and ``V_prev`` have shape ``(B, E, M)``. A vector is stable when all
    of its entries are. In ``adapt`` mode entries whose relative change is at
    least ``eps`` are multiplied by ``alpha`` and those at most ``-eps`` by
    ``beta``. Log-domain vectors are compared (and scaled) relative to their
    maximum, which leaves every decision unchanged.
    """
    if mode not in ("terminate", "adapt"):
        raise ValueError(f"mode must be 'terminate' or 'adapt', got {mode!r}")
    n = V.size
    if domain == "log":
        peak = V.max(axis=-1, keepdims=True)
        cur = V - peak
        prev = V_prev - V_prev.max(axis=-1, keepdims=True)
        if counters is not None:
            counters.add("stability", "MAX", 2 * n)
            counters.add("stability", "ADD", 2 * n)
    else:
        peak, cur, prev = None, V, V_prev
    r, stable = relative_change(cur, prev, cfg.epsilon, cfg.delta, cfg.relative_to)
    if counters is not None:
        counters.add("stability", "ADD", n)
        counters.add("stability", "DIV", n)
        counters.add("stability", "CMP", n)
    out = V
    if mode == "adapt":
        factor = np.where(r >= cfg.epsilon, cfg.alpha, np.where(r <= -cfg.epsilon, cfg.beta, 1.0))
        stable = factor == 1.0
        scaled = cur * factor
        out = scaled + peak if domain == "log" else scaled
        if counters is not None:
            counters.add("stability", "CMP", n)
            counters.add("stability", "MUL", int(np.count_nonzero(factor != 1.0)))
    return stable.all(axis=-1), out


# -- decoding ---------------------------------------------------------------------------


@dataclass
class DecodeResult:
    """Outcome for a batch of frames (or a single frame when ``decisions`` is 1-D)."""

    decisions: np.ndarray
    beliefs: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    counters: OpCounters = field(default_factory=OpCounters)
    fallbacks: np.ndarray | int = 0

    def __getitem__(self, i: int) -> "DecodeResult":
        return DecodeResult(self.decisions[i], self.beliefs[i], self.iterations[i], self.converged[i],
                            self.counters, self.fallbacks[i])


def decode_batch(y, system: ScmaSystem, cfg: DecoderConfig, *, N0=None, h=None,
                 counters: OpCounters | None = None) -> DecodeResult:
    """Decode ``B`` frames at once.

    ``y`` has shape ``(B, K)``. Iterations run in a flooding schedule: all
    resource nodes, then all layer nodes. With early termination or self
    adaption, each frame stops independently once its stability matrix is all
    ones (checked from the second iteration on); stopped frames are frozen.
    """
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    B = y.shape[0]
    if counters is None:
        counters = OpCounters()
    if h is not None:
        h = np.broadcast_to(np.asarray(h, dtype=complex), y.shape)
    init = init_probabilities(y, system, cfg, N0=N0, h=h, counters=counters)
    state = new_state(system, init, cfg.domain)
    iterations = np.zeros(B, dtype=np.int64)
    converged = np.zeros(B, dtype=bool)
    active = np.arange(B)
    mode = "adapt" if cfg.self_adaption else "terminate"
    monitor_r2l = cfg.monitor in ("both", "r2l")
    monitor_l2r = cfg.monitor in ("both", "l2r")
    monitor_beliefs = cfg.monitor == "beliefs"

    for t in range(1, cfg.max_iterations + 1):
        if active.size == 0:
            break
        sub = state.take(active) if active.size < B else state
        for k in range(system.K):
            resource_node_update(sub, k, system, cfg, counters)
        check = cfg.stopping and t >= 2
        if check:
            sub.stable[:] = False
            raw = sub.r2l.copy()
            if monitor_r2l or mode == "adapt":
                s_r2l, adapted = check_stability_and_adapt(raw, sub.prev_r2l, cfg, sub.domain, mode, counters)
                if mode == "adapt":
                    sub.r2l = adapted if cfg.quantization is None else cfg.quantization.intermediate(adapted)
                sub.stable[:, :, 0] = s_r2l if monitor_r2l else True
            else:
                sub.stable[:, :, 0] = True
            sub.prev_r2l = raw
        elif cfg.stopping:
            sub.prev_r2l = sub.r2l.copy()
        for j in range(system.J):
            layer_node_update(sub, j, system, cfg, counters)
        if check:
            if monitor_l2r:
                s_l2r, _ = check_stability_and_adapt(sub.l2r, sub.prev_l2r, cfg, sub.domain, "terminate", counters)
                sub.stable[:, :, 1] = s_l2r
            else:
                sub.stable[:, :, 1] = True
        if cfg.stopping and monitor_beliefs:
            q = normalized_beliefs(sub, system, counters)
            if check:
                sub.stable_beliefs[:], _ = check_stability_and_adapt(q, sub.prev_beliefs, cfg, sub.domain,
                                                                     "terminate", counters)
            sub.prev_beliefs = q
        elif check:
            sub.stable_beliefs[:] = True
        if cfg.stopping:
            sub.prev_l2r = sub.l2r.copy()
        if sub is not state:
            state.put(active, sub)
        iterations[active] += 1
        if check:
            done = state.stable[active].all(axis=(1, 2)) & state.stable_beliefs[active].all(axis=1)
            converged[active[done]] = True
            active = active[~done]

    decisions, Q = judge(state, system, counters, cfg.quantization)
    return DecodeResult(decisions, Q, iterations, converged, counters, state.fallbacks)


def decode(received: ReceivedFrame, system: ScmaSystem, cfg: DecoderConfig,
           counters: OpCounters | None = None) -> DecodeResult:
    """Decode one received frame."""
    h = None if np.all(received.h == 1) else received.h[None]
    return decode_batch(received.y[None], system, cfg, N0=received.N0, h=h, counters=counters)[0]


def decode_noiseless_all(system: ScmaSystem, cfg: DecoderConfig, N0: float = 1.0,
                         frames: Sequence[Sequence[int]] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Decode the noiseless superposition of every frame (or the given ones)."""
    from .channel import encode, superpose
    if frames is None:
        frames = all_frames(system)
    frames = np.asarray(frames)
    y = superpose(encode(system, frames))
    return frames, decode_batch(y, system, cfg, N0=N0).decisions


def all_frames(system: ScmaSystem) -> np.ndarray:
    """Every joint symbol assignment, user 0 most significant, shape ``(M**J, J)``."""
    M, J = system.M, system.J
    idx = np.arange(M**J)
    return np.stack([(idx // M ** (J - 1 - j)) % M for j in range(J)], axis=1)
