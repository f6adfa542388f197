"""Operation counters and the closed-form complexity model they are audited against.

Counting conventions
--------------------
* A complex addition or subtraction is two real ``ADD``.
* Squared magnitude ``re^2 + im^2`` is two ``MUL`` and one ``ADD``.
* A plain magnitude ``|z|`` (approximations 1 and 3) is one ``MAG``; it uses no
  multiplier and has no row in the reference table.
* Scaling by ``1/N0`` is one ``MUL``; the decoder receives the noise precision
  directly, so no division is spent forming it.
* A sum or max over ``n`` candidates costs ``n`` ``ADD``/``MAX`` (each candidate
  is accumulated once), and an ``n``-way product of message entries costs
  ``n - 1`` ``MUL`` per candidate.
* Writing a message vector into the opposite network costs one ``SWOP`` per entry.
* The final argmax costs one ``CMP`` per candidate symbol.
* Stability checks and belief adaption are booked under their own procedure.

Complexity tables use the reference notation: ``N`` physical resources and
``K`` users, i.e. swapped relative to :class:`~scmadec.system.ScmaSystem`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

OPS = ("ADD", "MUL", "DIV", "EXP", "MAX", "CMP", "SWOP", "MAG")
PROCEDURES = ("init", "resource", "layer", "judge", "stability")
# Procedures that have rows in the reference table.
TABLE_PROCEDURES = PROCEDURES[:4]


class OpCounters:
    """Per-procedure tallies of elementary operations."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((len(PROCEDURES), len(OPS)), dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)

    def add(self, procedure: str, op: str, n: int) -> None:
        if n < 0:
            raise ValueError("operation counts are nonnegative")
        self.counts[PROCEDURES.index(procedure), OPS.index(op)] += int(n)

    def get(self, procedure: str, op: str) -> int:
        return int(self.counts[PROCEDURES.index(procedure), OPS.index(op)])

    def total(self, op: str) -> int:
        return int(self.counts[:, OPS.index(op)].sum())

    def merge(self, other: "OpCounters") -> "OpCounters":
        self.counts += other.counts
        return self

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, OpCounters) and np.array_equal(self.counts, other.counts)

    def copy(self) -> "OpCounters":
        return OpCounters(self.counts.copy())

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {p: {o: self.get(p, o) for o in OPS} for p in PROCEDURES}

    def __repr__(self) -> str:
        nz = {p: {o: n for o, n in d.items() if n} for p, d in self.as_dict().items()}
        return f"OpCounters({ {p: d for p, d in nz.items() if d} })"


# -- closed-form model -----------------------------------------------------------

COLUMNS = ("this_work", "dmpa", "maxlog", "pruned")


@dataclass(frozen=True)
class ComplexityModel:
    """One column of the reference complexity table."""

    column: str

    def __post_init__(self):
        if self.column not in COLUMNS:
            raise ValueError(f"unknown column {self.column!r}; choose from {COLUMNS}")

    def predict(self, M: int, N: int, K: int, T=1) -> dict[str, dict[str, Fraction]]:
        """Counts per procedure; ``N`` resources, ``K`` users, iteration divisor ``T``.

        Initialization entries are divided by ``T``; all other entries are per
        iteration (judgment: per decode).
        """
        if min(M, N, K) < 1 or T <= 0:
            raise ValueError("parameters must be positive")
        c = Fraction(M**3 * N)
        mk = Fraction(M * K)
        T = Fraction(T)
        if self.column == "this_work":
            table = {
                "init": {"ADD": 2 * c / T, "MUL": 0, "EXP": 0},
                "resource": {"ADD": 2 * 3 * c, "MUL": 0, "MAX": 3 * c},
                "layer": {"ADD": 0, "MUL": 0, "SWOP": 2 * mk},
                "judge": {"ADD": mk, "MUL": 0, "MAX": 0},
            }
        elif self.column == "maxlog":
            table = {
                "init": {"ADD": 3 * c / T, "MUL": 3 * c / T, "EXP": 0},
                "resource": {"ADD": 2 * 3 * c, "MUL": 0, "MAX": 3 * c},
                "layer": {"ADD": 0, "MUL": 0, "SWOP": 2 * mk},
                "judge": {"ADD": mk, "MUL": 0, "MAX": 0},
            }
        else:  # dmpa and pruned share the same entries
            table = {
                "init": {"ADD": 3 * c / T, "MUL": 3 * c / T, "EXP": c / T},
                "resource": {"ADD": 3 * c, "MUL": 2 * 3 * c, "MAX": 0},
                "layer": {"ADD": 2 * mk, "MUL": 2 * mk, "SWOP": 2 * mk},
                "judge": {"ADD": 0, "MUL": mk, "MAX": mk},
            }
        return {p: {op: Fraction(v) for op, v in row.items()} for p, row in table.items()}


def predict(column: str, M: int, N: int, K: int, T=1) -> dict[str, dict[str, Fraction]]:
    return ComplexityModel(column).predict(M, N, K, T)


def column_for(algorithm: str, approximation: str) -> str | None:
    """Table column that a decoder configuration is built to realize, if any."""
    return {("maxlog", "a3"): "this_work", ("maxlog", "exact"): "maxlog", ("dmpa", "exact"): "dmpa"}.get(
        (algorithm, approximation)
    )


def _measured_view(counters: OpCounters, column: str) -> dict[str, dict[str, int]]:
    view = counters.as_dict()
    if column in ("dmpa", "pruned"):
        # Normalization divisions and the argmax are listed as MUL and MAX there.
        view["layer"]["MUL"] += view["layer"]["DIV"]
        view["judge"]["MAX"] += view["judge"]["CMP"]
    return view


@dataclass(frozen=True)
class AuditRow:
    procedure: str
    op: str
    predicted: Fraction
    measured: int

    @property
    def ok(self) -> bool:
        return self.predicted == self.measured


@dataclass(frozen=True)
class AuditReport:
    column: str
    rows: tuple[AuditRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def mismatches(self) -> list[AuditRow]:
        return [r for r in self.rows if not r.ok]

    def to_text(self) -> str:
        lines = [f"complexity audit against column '{self.column}'",
                 f"{'procedure':<10} {'op':<5} {'predicted':>12} {'measured':>12}  status"]
        for r in self.rows:
            lines.append(f"{r.procedure:<10} {r.op:<5} {str(r.predicted):>12} {r.measured:>12}  "
                         f"{'ok' if r.ok else 'MISMATCH'}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["column", "procedure", "op", "predicted", "measured", "ok"])
        for r in self.rows:
            w.writerow([self.column, r.procedure, r.op, str(r.predicted), r.measured, int(r.ok)])
        return buf.getvalue()


def audit(counters: OpCounters, column: str, *, M: int, N: int, K: int,
          frames: int, iterations: int) -> AuditReport:
    """Compare measured counts with the closed forms.

    ``iterations`` is the total number of iterations executed over all
    ``frames`` (so early-terminated runs are audited exactly). ``N`` and ``K``
    use the table's notation: resources and users.
    """
    model = ComplexityModel(column).predict(M, N, K, T=1)
    measured = _measured_view(counters, column)
    scale = {"init": frames, "resource": iterations, "layer": iterations, "judge": frames}
    rows = []
    for proc in TABLE_PROCEDURES:
        for op, value in model[proc].items():
            rows.append(AuditRow(proc, op, value * scale[proc], measured[proc][op]))
    return AuditReport(column, tuple(rows))
