"""Monte-Carlo error-rate sweeps with an exhaustive ML reference.

Frames are generated by :class:`~scmadec.channel.FrameStream`, so frame ``i``
sees the same symbols and noise no matter how the run is batched, and every
decoder variant in a sweep is evaluated on the same realizations.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import (
    DistributedMatrix,
    FrameStream,
    encode,
    superpose,
    symbols_to_bits,
    transmit_batch,
    ebn0_to_n0,
)
from .decoder import DecoderConfig, ConfigError, all_frames, decode_batch
from .metrics import OpCounters
from .system import ScmaSystem, load_codebook, reference_system

Z95 = 1.959963984540054
CSV_COLUMNS = ("snr_db", "variant", "frames", "block_errors", "bler", "bler_ci95", "ser", "ber",
               "mean_iters", "max_iters", "add", "mul", "div", "exp", "max", "swop")
ML_VARIANT = "ml"


class OracleError(ValueError):
    pass


# -- exhaustive maximum likelihood --------------------------------------------------------


@lru_cache(maxsize=8)
def _all_superpositions(system: ScmaSystem) -> tuple[np.ndarray, np.ndarray]:
    frames = all_frames(system)
    return frames, superpose(encode(system, frames))


def ml_oracle_decode(y, system: ScmaSystem, *, h=None, cap: int = 2**20,
                     chunk_elems: int = 2**23) -> np.ndarray:
    """Joint maximum-likelihood decisions by exhaustive search.

    Minimizes ``sum_k |y_k - h_k s_k|^2`` over all ``M**J`` joint frames.
    Ties go to the lexicographically smallest frame (user 0 most
    significant). Returns ``(B, J)`` symbol indices, or ``(J,)`` for a single
    received vector.
    """
    if system.M ** system.J > cap:
        raise OracleError(f"M**J = {system.M ** system.J} hypotheses exceeds the cap of {cap}")
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    frames, S = _all_superpositions(system)
    H = len(frames)
    out = np.empty((y.shape[0], system.J), dtype=np.int64)
    step = max(1, chunk_elems // (H * system.K))
    for a in range(0, y.shape[0], step):
        yb = y[a : a + step]
        if h is None:
            r = yb[:, None, :] - S[None]
        else:
            hb = np.broadcast_to(np.asarray(h, dtype=complex), y.shape)[a : a + step]
            r = yb[:, None, :] - hb[:, None, :] * S[None]
        d = (r.real**2 + r.imag**2).sum(axis=-1)
        out[a : a + step] = frames[d.argmin(axis=1)]
    return out[0] if single else out


# -- configuration ------------------------------------------------------------------------


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """``"A:B:STEP"`` (inclusive of ``B``) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"SNR range must be A:B:STEP with STEP > 0 and B >= A, got {text!r}")
        a, b, step = parts
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return tuple(round(a + i * step, 10) for i in range(n))
    return tuple(float(p) for p in text.split(",") if p.strip())


@dataclass(frozen=True)
class SweepConfig:
    """One Monte-Carlo campaign.

    ``frames`` is the budget per SNR point; with ``stop_errors`` set, a point
    ends early once every variant has seen that many block errors.
    ``noise_reduction`` is ``"off"``, ``"hadamard"`` or a JSON matrix file.
    """

    snr_db: tuple[float, ...]
    frames: int = 10000
    variants: tuple[DecoderConfig, ...] = (DecoderConfig(),)
    seed: int = 0
    oracle: bool = False
    codebook: str | None = None
    noise_reduction: str = "off"
    fading: str = "awgn"
    stop_errors: int | None = None
    batch: int = 4096
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "variants", tuple(self.variants))
        if not self.snr_db:
            raise ConfigError("SNR list is empty")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if not self.variants and not self.oracle:
            raise ConfigError("nothing to simulate: no decoder variants and oracle off")
        if self.fading not in ("awgn", "rayleigh"):
            raise ConfigError(f"fading must be 'awgn' or 'rayleigh', got {self.fading!r}")
        if self.stop_errors is not None and self.stop_errors < 1:
            raise ConfigError("stop_errors must be >= 1")

    def system(self) -> ScmaSystem:
        return reference_system() if self.codebook is None else load_codebook(self.codebook)

    def distributed_matrix(self, system: ScmaSystem) -> DistributedMatrix | None:
        if self.noise_reduction in ("off", "", None):
            return None
        if self.noise_reduction == "hadamard":
            return DistributedMatrix.hadamard(system.K)
        D = DistributedMatrix.load(self.noise_reduction)
        if D.K != system.K:
            raise ConfigError(f"distributed matrix is {D.K}x{D.K}, system has K={system.K}")
        return D

    def variant_names(self) -> list[str]:
        names, seen = [], {}
        for v in self.variants:
            n = v.name
            seen[n] = seen.get(n, 0) + 1
            names.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
        return names

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variants"] = [v.to_dict() for v in self.variants]
        d["snr_db"] = list(self.snr_db)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        doc = dict(doc)
        doc["variants"] = tuple(DecoderConfig.from_dict(v) for v in doc.get("variants", []))
        return cls(**doc)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- results --------------------------------------------------------------------------------


def ci95(errors: int, trials: int) -> float:
    """Normal-approximation 95% half-width of an error rate."""
    if trials <= 0:
        return 0.0
    p = errors / trials
    return Z95 * math.sqrt(p * (1 - p) / trials)


@dataclass
class SimPoint:
    """Tallies for one decoder variant at one SNR."""

    snr_db: float
    variant: str
    frames: int = 0
    block_errors: int = 0
    symbol_errors: int = 0
    bit_errors: int = 0
    iterations_total: int = 0
    max_iters: int = 0
    J: int = 1
    bits_per_symbol: int = 1
    counters: OpCounters = field(default_factory=OpCounters)
    frame_errors: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def bler(self) -> float:
        return self.block_errors / self.frames if self.frames else 0.0

    @property
    def ser(self) -> float:
        n = self.frames * self.J
        return self.symbol_errors / n if n else 0.0

    @property
    def ber(self) -> float:
        n = self.frames * self.J * self.bits_per_symbol
        return self.bit_errors / n if n else 0.0

    @property
    def bler_ci95(self) -> float:
        return ci95(self.block_errors, self.frames)

    @property
    def ser_ci95(self) -> float:
        return ci95(self.symbol_errors, self.frames * self.J)

    @property
    def ber_ci95(self) -> float:
        return ci95(self.bit_errors, self.frames * self.J * self.bits_per_symbol)

    @property
    def mean_iters(self) -> float:
        return self.iterations_total / self.frames if self.frames else 0.0

    @property
    def errors_per_frame(self) -> np.ndarray:
        """Block-error indicator per frame in frame order (kept only when requested)."""
        if not self.frame_errors:
            return np.zeros(0, dtype=bool)
        return np.concatenate(self.frame_errors)

    def tally(self, decisions: np.ndarray, symbols: np.ndarray, iterations=None, keep: bool = False) -> None:
        wrong = decisions != symbols
        block = wrong.any(axis=1)
        self.frames += len(symbols)
        self.block_errors += int(block.sum())
        self.symbol_errors += int(wrong.sum())
        self.bit_errors += int((symbols_to_bits(decisions, self.bits_per_symbol)
                                != symbols_to_bits(symbols, self.bits_per_symbol)).sum())
        if iterations is not None:
            self.iterations_total += int(np.sum(iterations))
            self.max_iters = max(self.max_iters, int(np.max(iterations)))
        if keep:
            self.frame_errors.append(block)

    def row(self) -> list[str]:
        c = self.counters
        vals = [_fmt(self.snr_db), self.variant, self.frames, self.block_errors, _fmt(self.bler),
                _fmt(self.bler_ci95), _fmt(self.ser), _fmt(self.ber), _fmt(self.mean_iters), self.max_iters,
                c.total("ADD"), c.total("MUL"), c.total("DIV"), c.total("EXP"), c.total("MAX"), c.total("SWOP")]
        return [str(v) for v in vals]


def _fmt(x: float) -> str:
    return f"{x:.10g}"


@dataclass
class SweepResult:
    config: SweepConfig
    points: list[SimPoint]
    system_name: str = ""

    def get(self, variant: str, snr_db: float) -> SimPoint:
        for p in self.points:
            if p.variant == variant and p.snr_db == snr_db:
                return p
        raise KeyError((variant, snr_db))

    def curve(self, variant: str) -> list[SimPoint]:
        return [p for p in self.points if p.variant == variant]

    def variants(self) -> list[str]:
        return list(dict.fromkeys(p.variant for p in self.points))

    def header(self) -> list[str]:
        cfg = self.config
        lines = [
            "scma sweep",
            f"codebook: {cfg.codebook or 'reference'} ({self.system_name})",
            "snr: Eb/N0 in dB; Eb = E_res * K / (J * log2 M); N0 = Eb / 10^(snr/10); "
            "complex noise variance N0 per resource",
            "block: one frame of J user symbols; bler_ci95 is a normal-approximation half-width",
            "ops: totals over all frames of the point (add, mul, div, exp, max, swop)",
            "config: " + json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")),
        ]
        return ["# " + ln for ln in lines]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("\n".join(self.header()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow(p.row())
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def read_csv(text: str) -> list[dict[str, str]]:
    """Parse sweep CSV text, skipping ``#`` header rows."""
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(body))


# -- simulation -----------------------------------------------------------------------------


def simulate_point(system: ScmaSystem, snr_db: float, variants: Sequence[DecoderConfig], *,
                   frames: int, seed: int = 0, names: Sequence[str] | None = None, oracle: bool = False,
                   fading: str = "awgn", distributed: DistributedMatrix | None = None,
                   stop_errors: int | None = None, batch: int = 4096, start: int = 0,
                   keep_frames: bool = False) -> list[SimPoint]:
    """Decode the same frames with every variant (and optionally the ML oracle).

    Frames ``start .. start + frames - 1`` of the ``seed`` stream are used.
    """
    names = list(names) if names is not None else [v.name for v in variants]
    stream = FrameStream(system, seed)
    N0 = ebn0_to_n0(system, snr_db)
    cfgs = [v.for_snr(snr_db) for v in variants]
    points = [SimPoint(snr_db, n, J=system.J, bits_per_symbol=system.bits_per_symbol) for n in names]
    if oracle:
        points.append(SimPoint(snr_db, ML_VARIANT, J=system.J, bits_per_symbol=system.bits_per_symbol))
    done = 0
    while done < frames:
        count = min(batch, frames - done)
        fb = transmit_batch(system, stream, start + done, count, N0, fading=fading, distributed=distributed)
        for p, cfg in zip(points, cfgs):
            r = decode_batch(fb.y, system, cfg, N0=N0, h=fb.h, counters=p.counters)
            p.tally(r.decisions, fb.symbols, r.iterations, keep_frames)
        if oracle:
            points[-1].tally(ml_oracle_decode(fb.y, system, h=fb.h), fb.symbols, keep=keep_frames)
        done += count
        if stop_errors is not None and all(p.block_errors >= stop_errors for p in points):
            break
    return points


def run_sweep(cfg: SweepConfig, *, keep_frames: bool = False, progress=None) -> SweepResult:
    """Every SNR point and variant of ``cfg``; writes ``cfg.out`` when set."""
    system = cfg.system()
    D = cfg.distributed_matrix(system)
    points: list[SimPoint] = []
    for snr in cfg.snr_db:
        pts = simulate_point(system, snr, cfg.variants, frames=cfg.frames, seed=cfg.seed,
                             names=cfg.variant_names(), oracle=cfg.oracle, fading=cfg.fading,
                             distributed=D, stop_errors=cfg.stop_errors, batch=cfg.batch,
                             keep_frames=keep_frames)
        points.extend(pts)
        if progress is not None:
            for p in pts:
                progress(p)
    result = SweepResult(cfg, points, system.name)
    if cfg.out:
        result.write_csv(cfg.out)
    return result


# -- trade-off analysis ---------------------------------------------------------------------


def crossing_snr(snr_db: Sequence[float], rates: Sequence[float], target: float = 1e-2,
                 frames: Sequence[int] | None = None) -> float | None:
    """SNR where the error rate first falls to ``target``, interpolated linearly in log-rate.

    A zero rate is replaced by half an error event (``0.5 / frames``) so the
    logarithm exists. Returns ``None`` if the curve never reaches the target
    inside the grid; nothing is extrapolated.
    """
    pts = sorted(zip(snr_db, rates, frames if frames is not None else [None] * len(rates)))
    if not pts:
        return None

    def lg(rate, n):
        if rate > 0:
            return math.log10(rate)
        return math.log10(0.5 / n) if n else -math.inf

    if pts[0][1] <= target:
        return pts[0][0] if pts[0][1] == target else None
    lt = math.log10(target)
    for (s0, r0, n0), (s1, r1, n1) in zip(pts, pts[1:]):
        if r0 > target >= r1:
            a, b = lg(r0, n0), lg(r1, n1)
            if r1 == target or b == -math.inf:
                return s1
            return s0 + (s1 - s0) * (a - lt) / (a - b)
    return None


@dataclass(frozen=True)
class TradeoffRow:
    variant: str
    crossing_db: float | None
    mean_iters: float | None
    ops_per_frame: float | None

    @property
    def reached(self) -> bool:
        return self.crossing_db is not None


def tradeoff_report(result: SweepResult, target: float = 1e-2, metric: str = "bler") -> list[TradeoffRow]:
    """Per variant: SNR needed for ``target`` error rate and iterations spent there.

    Mean iterations and operations per frame are interpolated linearly in SNR
    at the crossing.
    """
    rows = []
    for name in result.variants():
        curve = sorted(result.curve(name), key=lambda p: p.snr_db)
        snrs = [p.snr_db for p in curve]
        x = crossing_snr(snrs, [getattr(p, metric) for p in curve], target, [p.frames for p in curve])
        if x is None:
            rows.append(TradeoffRow(name, None, None, None))
            continue
        ops = [sum(p.counters.total(o) for o in ("ADD", "MUL", "DIV", "EXP", "MAX", "SWOP", "CMP", "MAG"))
               / p.frames for p in curve]
        if name == ML_VARIANT:
            # exhaustive search: no iterations and no counted operations
            rows.append(TradeoffRow(name, x, None, None))
            continue
        rows.append(TradeoffRow(name, x, float(np.interp(x, snrs, [p.mean_iters for p in curve])),
                                float(np.interp(x, snrs, ops))))
    return rows


def pareto_front(rows: Iterable[TradeoffRow], keys=("crossing_db", "mean_iters")) -> list[str]:
    """Variants not dominated on ``keys`` (smaller is better).

    Rows missing any key (unreached variants, the ML reference) are excluded.
    """
    rows = [r for r in rows if all(getattr(r, k) is not None for k in keys)]
    front = []
    for r in rows:
        rv = [getattr(r, k) for k in keys]
        dominated = False
        for o in rows:
            ov = [getattr(o, k) for k in keys]
            if o is not r and all(a <= b for a, b in zip(ov, rv)) and any(a < b for a, b in zip(ov, rv)):
                dominated = True
                break
        if not dominated:
            front.append(r.variant)
    return front


def format_tradeoff(rows: Sequence[TradeoffRow], target: float = 1e-2) -> str:
    lines = [f"{'variant':<24} {'SNR@' + format(target, 'g') + ' (dB)':>14} {'mean iters':>11} {'ops/frame':>11}"]
    for r in rows:
        if not r.reached:
            lines.append(f"{r.variant:<24} {'not reached':>14} {'-':>11} {'-':>11}")
        else:
            it = "-" if r.mean_iters is None else f"{r.mean_iters:.3f}"
            ops = "-" if r.ops_per_frame is None else f"{r.ops_per_frame:.0f}"
            lines.append(f"{r.variant:<24} {r.crossing_db:>14.3f} {it:>11} {ops:>11}")
    return "\n".join(lines)
