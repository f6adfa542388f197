"""Folding, lifetime analysis, register allocation and iteration bounds for dataflow graphs.

Graph text format (``#`` starts a comment)::

    node <id> <op> [T=<time>]
    edge <src> <dst> [w=<delays>]
    fold <N>
    unit <name> [P=<depth>]: <id|-> <id|-> ...

``T`` is a number or a symbol name (e.g. ``T_A``) resolved later. A ``-`` slot
in a ``unit`` line is an empty time partition. Graph and folding lines may live
in one file or two.
"""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

Number = int | Fraction


class DfgError(ValueError):
    pass


class DeadlockError(DfgError):
    """A directed cycle carries no delay."""


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    time: Number | str = 0


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    w: int = 0

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass
class Dfg:
    nodes: dict[str, Node] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)

    def add_node(self, id, op: str, time: Number | str = 0) -> Node:
        id = str(id)
        if id in self.nodes:
            raise DfgError(f"duplicate node id {id!r}")
        node = Node(id, op, time)
        self.nodes[id] = node
        return node

    def add_edge(self, src, dst, w: int = 0) -> Edge:
        src, dst = str(src), str(dst)
        for n in (src, dst):
            if n not in self.nodes:
                raise DfgError(f"edge references unknown node {n!r}")
        if int(w) != w or w < 0:
            raise DfgError(f"edge {src}->{dst}: delay count must be a nonnegative integer")
        e = Edge(src, dst, int(w))
        self.edges.append(e)
        return e

    def out_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node]


@dataclass
class FoldingSpec:
    """Time partitions of each unit (``None`` = empty slot) under folding factor ``factor``."""

    factor: int
    units: dict[str, list[str | None]] = field(default_factory=dict)
    depths: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        seen: dict[str, str] = {}
        for unit, slots in self.units.items():
            if len(slots) > self.factor:
                raise DfgError(f"unit {unit!r} has {len(slots)} slots, folding factor is {self.factor}")
            for node in slots:
                if node is None:
                    continue
                if node in seen:
                    raise DfgError(f"node {node!r} appears in units {seen[node]!r} and {unit!r}")
                seen[node] = unit
        self._where = {n: (u, s) for u, slots in self.units.items() for s, n in enumerate(slots) if n is not None}

    def slot(self, node: str) -> int:
        return self._locate(node)[1]

    def unit(self, node: str) -> str:
        return self._locate(node)[0]

    def depth(self, node: str) -> int:
        return self.depths.get(self.unit(node), 0)

    def _locate(self, node: str) -> tuple[str, int]:
        try:
            return self._where[node]
        except KeyError:
            raise DfgError(f"node {node!r} is not in any folding set") from None


# -- parsing ------------------------------------------------------------------------

_KV = re.compile(r"^(\w+)=(\S+)$")


def _number(text: str) -> Number | str:
    try:
        v = Fraction(text)
    except ValueError:
        return text
    return int(v) if v.denominator == 1 else v


def parse(text: str) -> tuple[Dfg, FoldingSpec | None]:
    """Parse graph and (optional) folding lines."""
    dfg = Dfg()
    factor = None
    units: dict[str, list[str | None]] = {}
    depths: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("unit"):
                head, _, body = line.partition(":")
                parts = head.split()
                name = parts[1]
                for kv in parts[2:]:
                    key, value = _KV.match(kv).groups()
                    if key != "P":
                        raise DfgError(f"unknown unit attribute {key!r}")
                    depths[name] = int(value)
                units[name] = [None if tok in ("-", "phi") else tok for tok in body.split()]
                continue
            parts = line.split()
            kind, args = parts[0], parts[1:]
            pos = [a for a in args if "=" not in a]
            kv = dict(_KV.match(a).groups() for a in args if "=" in a)
            if kind == "node":
                dfg.add_node(pos[0], pos[1] if len(pos) > 1 else "op", _number(kv.get("T", "0")))
            elif kind == "edge":
                dfg.add_edge(pos[0], pos[1], int(kv.get("w", 0)))
            elif kind == "fold":
                factor = int(pos[0])
            else:
                raise DfgError(f"unknown statement {kind!r}")
        except (IndexError, AttributeError, ValueError) as exc:
            raise DfgError(f"line {lineno}: cannot parse {raw.strip()!r}: {exc}") from None
    spec = None
    if units:
        if factor is None:
            raise DfgError("folding sets given without a 'fold <N>' line")
        spec = FoldingSpec(factor, units, depths)
    return dfg, spec


def load(*paths: str | Path) -> tuple[Dfg, FoldingSpec | None]:
    return parse("\n".join(Path(p).read_text() for p in paths))


# -- folding ------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldedEdge:
    edge: Edge
    delays: int

    @property
    def feasible(self) -> bool:
        return self.delays >= 0


def folded_delay(N: int, w: int, depth_u: int, u: int, v: int) -> int:
    return N * w - depth_u + v - u


def fold(dfg: Dfg, spec: FoldingSpec) -> list[FoldedEdge]:
    """Folded delays ``N w - P_U + v - u`` for every edge, in edge order.

    Negative values mean the graph must be retimed before folding; they are
    reported, not corrected.
    """
    out = []
    for e in dfg.edges:
        d = folded_delay(spec.factor, e.w, spec.depth(e.src), spec.slot(e.src), spec.slot(e.dst))
        out.append(FoldedEdge(e, d))
    return out


def retiming_required(folded: Iterable[FoldedEdge]) -> list[FoldedEdge]:
    return [f for f in folded if not f.feasible]


# -- lifetime analysis ---------------------------------------------------------------


@dataclass(frozen=True)
class Lifetime:
    """Value produced by ``var`` at ``birth`` and last consumed at ``death``.

    The value needs a register in every time step of ``(birth, death]``.
    """

    var: str
    birth: int
    death: int

    @property
    def length(self) -> int:
        return self.death - self.birth


@dataclass(frozen=True)
class LifetimeTable:
    factor: int
    lifetimes: tuple[Lifetime, ...]
    live: tuple[int, ...]

    @property
    def min_registers(self) -> int:
        return max(self.live, default=0)


def live_counts(lifetimes: Iterable[Lifetime], N: int) -> list[int]:
    """Live values at each time step modulo ``N`` (periodic schedule)."""
    counts = [0] * N
    for lt in lifetimes:
        for t in range(lt.birth + 1, lt.death + 1):
            counts[t % N] += 1
    return counts


def lifetime_analysis(dfg: Dfg, spec: FoldingSpec, folded: Iterable[FoldedEdge] | None = None) -> LifetimeTable:
    """Lifetimes of every produced value and the minimum register count."""
    if folded is None:
        folded = fold(dfg, spec)
    folded = list(folded)
    bad = retiming_required(folded)
    if bad:
        raise DfgError("negative folded delays on " + ", ".join(str(f.edge) for f in bad))
    by_src: dict[str, list[int]] = {}
    for f in folded:
        by_src.setdefault(f.edge.src, []).append(f.delays)
    lifetimes = []
    for node in dfg.nodes:
        if node not in by_src:
            continue
        birth = spec.slot(node) + spec.depth(node)
        lifetimes.append(Lifetime(node, birth, birth + max(by_src[node])))
    return LifetimeTable(spec.factor, tuple(lifetimes), tuple(live_counts(lifetimes, spec.factor)))


# -- forward-backward register allocation --------------------------------------------------


@dataclass(frozen=True)
class Allocation:
    """Register trajectory of every value: ``paths[var] = [(time, register), ...]``."""

    factor: int
    registers: int
    lifetimes: tuple[Lifetime, ...]
    paths: dict[str, tuple[tuple[int, int], ...]]

    def table(self) -> list[list[str | None]]:
        """Register contents per time step modulo the folding factor (one row per step)."""
        rows: list[list[str | None]] = [[None] * self.registers for _ in range(self.factor)]
        for var, path in self.paths.items():
            for t, r in path:
                rows[t % self.factor][r] = var
        return rows

    def moves(self) -> dict[int, list[tuple[int | None, int, str]]]:
        """Per time step mod ``N``: ``(source register or None for a fresh write, dest, var)``."""
        out: dict[int, list[tuple[int | None, int, str]]] = {t: [] for t in range(self.factor)}
        for var, path in self.paths.items():
            prev = None
            for t, r in path:
                out[t % self.factor].append((prev, r, var))
                prev = r
        return out

    def to_text(self) -> str:
        head = "step " + " ".join(f"R{r + 1:<4}" for r in range(self.registers))
        lines = [head]
        for t, row in enumerate(self.table()):
            lines.append(f"{t:>4} " + " ".join(f"{(v or '-'):<5}" for v in row))
        return "\n".join(lines)


class AllocationError(DfgError):
    pass


def allocate_registers(table: LifetimeTable, registers: int | None = None) -> Allocation:
    """Forward-backward allocation onto ``registers`` (default: the minimum) registers.

    Time advances one step at a time. A stored value moves forward from
    register ``i`` to ``i + 1``; a value in the last register (or whose
    forward register is taken) moves back to the lowest free register. New
    values enter the lowest free registers, longest lifetime first. Every
    placement reserves its register at that step modulo ``N``, which accounts
    for the values of neighbouring iterations.
    """
    N = table.factor
    R = table.min_registers if registers is None else registers
    for lt in table.lifetimes:
        if lt.death < lt.birth:
            raise AllocationError(f"value {lt.var!r} dies before it is born")
    pending = [lt for lt in table.lifetimes if lt.length > 0]
    paths: dict[str, list[tuple[int, int]]] = {lt.var: [] for lt in pending}
    if not pending:
        return Allocation(N, R, table.lifetimes, {})
    occ: list[list[str | None]] = [[None] * R for _ in range(N)]
    where: dict[str, int] = {}
    order = {lt.var: i for i, lt in enumerate(pending)}

    def free(t: int) -> list[int]:
        return [r for r in range(R) if occ[t % N][r] is None]

    def place(var: str, t: int, r: int) -> None:
        occ[t % N][r] = var
        where[var] = r
        paths[var].append((t, r))

    start = min(lt.birth for lt in pending) + 1
    stop = max(lt.death for lt in pending)
    for t in range(start, stop + 1):
        alive = [lt for lt in pending if lt.birth < t <= lt.death]
        carried = sorted((lt for lt in alive if lt.var in where), key=lambda lt: -where[lt.var])
        fresh = sorted((lt for lt in alive if lt.var not in where), key=lambda lt: (-lt.length, order[lt.var]))
        backward = []
        for lt in carried:
            nxt = where[lt.var] + 1
            if nxt < R and occ[t % N][nxt] is None:
                place(lt.var, t, nxt)
            else:
                backward.append(lt)
        for lt in fresh + sorted(backward, key=lambda lt: (lt.birth, order[lt.var])):
            slots = free(t)
            if not slots:
                raise AllocationError(f"no free register for {lt.var!r} at step {t} with {R} registers")
            place(lt.var, t, slots[0])
        for lt in alive:
            if lt.death == t:
                where.pop(lt.var, None)
    return Allocation(N, R, table.lifetimes, {v: tuple(p) for v, p in paths.items()})


def replay(alloc: Allocation, periods: int = 4) -> list[str]:
    """Run the allocation as a register file and report every delivery failure.

    Values of ``periods`` consecutive iterations are tagged ``(var, l)``. Each
    step applies only the register moves and fresh writes of its control step
    (``t mod N``); the value a consumer reads at ``death + l N`` must be its own.
    An empty list means the schedule is valid.
    """
    N, R = alloc.factor, alloc.registers
    moves = alloc.moves()
    problems = []
    lifetimes = [lt for lt in alloc.lifetimes if lt.length > 0]
    if not lifetimes:
        return problems
    missing = [lt.var for lt in lifetimes if lt.var not in alloc.paths]
    if missing:
        return [f"no path for {v}" for v in missing]
    first = min(lt.birth for lt in lifetimes) + 1
    last = max(lt.death for lt in lifetimes) + (periods - 1) * N
    regs: list[tuple[str, int] | None] = [None] * R
    births = {lt.var: lt.birth for lt in lifetimes}
    for tau in range(first, last + 1):
        new: list[tuple[str, int] | None] = [None] * R
        for src, dst, var in moves[tau % N]:
            if src is None:
                # fresh write of the instance produced at birth + l N
                l, rem = divmod(tau - 1 - births[var], N)
                if rem or not 0 <= l < periods:
                    continue
                value = (var, l)
            else:
                value = regs[src]
                if value is None or value[0] != var:
                    continue
            if new[dst] is not None:
                problems.append(f"step {tau}: register R{dst + 1} written twice")
            new[dst] = value
        regs = new
        for lt in lifetimes:
            l, rem = divmod(tau - lt.death, N)
            if rem == 0 and 0 <= l < periods:
                r = alloc.paths[lt.var][-1][1]
                if regs[r] != (lt.var, l):
                    problems.append(f"step {tau}: {lt.var} (iteration {l}) expected in R{r + 1}, found {regs[r]}")
    return problems


# -- iteration bound ----------------------------------------------------------------------


@dataclass(frozen=True)
class LoopBound:
    """One directed cycle with its delay count and symbolic computation time."""

    nodes: tuple[str, ...]
    delays: int
    terms: tuple[tuple[str, int], ...]
    constant: Fraction

    def value(self, times: Mapping[str, Number] | None = None) -> Fraction:
        total = Fraction(self.constant)
        for sym, count in self.terms:
            if times is None or sym not in times:
                raise DfgError(f"no value for computation time {sym!r}")
            total += count * Fraction(times[sym])
        return total / self.delays

    def expression(self) -> str:
        parts = [(f"{c}*{s}" if c != 1 else s) for s, c in self.terms]
        if self.constant or not parts:
            parts.append(str(self.constant))
        num = " + ".join(parts)
        if self.delays == 1:
            return num
        return f"({num})/{self.delays}" if len(parts) > 1 or "*" in num else f"{num}/{self.delays}"


@dataclass(frozen=True)
class IterationBound:
    bound: Fraction
    critical: LoopBound | None
    loops: tuple[LoopBound, ...]
    note: str = ""


def simple_cycles(dfg: Dfg) -> list[list[Edge]]:
    """All elementary directed cycles, as edge lists starting at their smallest node."""
    ids = list(dfg.nodes)
    rank = {n: i for i, n in enumerate(ids)}
    adj: dict[str, list[Edge]] = {n: [] for n in ids}
    for e in dfg.edges:
        adj[e.src].append(e)
    cycles = []
    for start in ids:
        stack = [(start, iter(adj[start]))]
        path: list[Edge] = []
        on_path = {start}
        while stack:
            node, it = stack[-1]
            for e in it:
                if rank[e.dst] < rank[start]:
                    continue
                if e.dst == start:
                    cycles.append(path + [e])
                elif e.dst not in on_path:
                    path.append(e)
                    on_path.add(e.dst)
                    stack.append((e.dst, iter(adj[e.dst])))
                    break
            else:
                stack.pop()
                if path:
                    on_path.discard(path.pop().dst)
    return cycles


def loop_bounds(dfg: Dfg) -> list[LoopBound]:
    out = []
    for cyc in simple_cycles(dfg):
        nodes = tuple(e.src for e in cyc)
        delays = sum(e.w for e in cyc)
        if delays == 0:
            raise DeadlockError("cycle without delays: " + " -> ".join(nodes + (nodes[0],)))
        symbols: Counter[str] = Counter()
        constant = Fraction(0)
        for n in nodes:
            t = dfg.nodes[n].time
            if isinstance(t, str):
                symbols[t] += 1
            else:
                constant += Fraction(t)
        out.append(LoopBound(nodes, delays, tuple(sorted(symbols.items())), constant))
    return out


def iteration_bound(dfg: Dfg, times: Mapping[str, Number] | None = None) -> IterationBound:
    """Maximum over directed cycles of computation time divided by delay count.

    Cycles are enumerated exhaustively, which suits hand-sized graphs; large
    graphs would call for a cycle-ratio search instead. Symbolic node times are
    substituted from ``times``.
    """
    loops = loop_bounds(dfg)
    if not loops:
        return IterationBound(Fraction(0), None, (), note="graph is acyclic")
    best = max(loops, key=lambda lb: lb.value(times))
    return IterationBound(best.value(times), best, tuple(loops))


# -- reports --------------------------------------------------------------------------------


def report(dfg: Dfg, spec: FoldingSpec | None, kind: str = "all",
           times: Mapping[str, Number] | None = None) -> tuple[str, str]:
    """Plain-text and CSV reports for ``folding``, ``lifetime``, ``alloc``, ``bound`` or ``all``."""
    kinds = ("folding", "lifetime", "alloc", "bound") if kind == "all" else (kind,)
    text: list[str] = []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "item", "key", "value"])
    folded = None
    table = None
    for k in kinds:
        if k in ("folding", "lifetime", "alloc") and spec is None:
            raise DfgError(f"report '{k}' needs folding sets")
        if k == "folding":
            folded = fold(dfg, spec)
            text.append(f"folded delays (N={spec.factor})")
            for f in folded:
                flag = "" if f.feasible else "  retiming required"
                text.append(f"  D_F({f.edge}) = {f.delays}{flag}")
                w.writerow(["folding", str(f.edge), "D_F", f.delays])
        elif k == "lifetime":
            table = lifetime_analysis(dfg, spec, folded)
            text.append("lifetimes (value: birth -> death)")
            for lt in table.lifetimes:
                text.append(f"  {lt.var}: {lt.birth} -> {lt.death}")
                w.writerow(["lifetime", lt.var, "birth", lt.birth])
                w.writerow(["lifetime", lt.var, "death", lt.death])
            text.append(f"  live per step: {list(table.live)}")
            text.append(f"  minimum registers: {table.min_registers}")
            w.writerow(["lifetime", "", "min_registers", table.min_registers])
        elif k == "alloc":
            table = table or lifetime_analysis(dfg, spec, folded)
            alloc = allocate_registers(table)
            problems = replay(alloc)
            text.append(f"register allocation ({alloc.registers} registers)")
            text.extend("  " + line for line in alloc.to_text().splitlines())
            text.append("  replay: " + ("ok" if not problems else f"{len(problems)} problems"))
            for t, row in enumerate(alloc.table()):
                for r, v in enumerate(row):
                    w.writerow(["alloc", t, f"R{r + 1}", v or ""])
        elif k == "bound":
            ib = iteration_bound(dfg, times) if times or not _symbolic(dfg) else None
            text.append("loop bounds")
            for lb in loop_bounds(dfg):
                val = "" if ib is None else f" = {lb.value(times)}"
                text.append(f"  {' -> '.join(lb.nodes)}: {lb.expression()}{val}")
                w.writerow(["bound", "->".join(lb.nodes), "expression", lb.expression()])
            if ib is not None:
                crit = " -> ".join(ib.critical.nodes) if ib.critical else "none"
                text.append(f"  iteration bound: {ib.bound} (critical loop {crit}){' ' + ib.note if ib.note else ''}")
                w.writerow(["bound", "", "iteration_bound", str(ib.bound)])
        else:
            raise DfgError(f"unknown report {k!r}")
    return "\n".join(text), buf.getvalue()


def _symbolic(dfg: Dfg) -> bool:
    return any(isinstance(n.time, str) for n in dfg.nodes.values())
