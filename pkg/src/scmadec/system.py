"""SCMA system model: codebooks and the factor graph they induce.

``J`` users (layers) share ``K`` orthogonal resources; each user spreads one
of ``M`` codewords over ``N`` of them. Arrays
follow the layout ``codewords[j, m, k]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class CodebookError(ValueError):
    """Raised when a codebook or mapping matrix violates the system model."""

    def __init__(self, message: str, user: int | None = None):
        if user is not None:
            message = f"user {user}: {message}"
        super().__init__(message)
        self.user = user


def build_mapping_matrix(K: int, N: int, zero_row_positions: Sequence[int]) -> np.ndarray:
    """Insert all-zero rows into ``I_N`` to obtain a ``K x N`` mapping matrix.

    Parameters
    ----------
    K, N : int
        Number of resources and nonzero dimensions.
    zero_row_positions : sequence of int
        Strictly increasing row indices in ``[0, K)``; exactly ``K - N`` of them.

    Returns
    -------
    np.ndarray
        Binary ``(K, N)`` integer matrix.
    """
    pos = [int(p) for p in zero_row_positions]
    if N > K or N < 1:
        raise CodebookError(f"need 1 <= N <= K, got N={N}, K={K}")
    if len(pos) != K - N:
        raise CodebookError(f"expected {K - N} zero rows, got {len(pos)}")
    if any(p < 0 or p >= K for p in pos):
        raise CodebookError(f"zero row positions out of range [0, {K}): {pos}")
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise CodebookError(f"zero row positions must be strictly increasing: {pos}")
    V = np.zeros((K, N), dtype=np.int64)
    support = [k for k in range(K) if k not in pos]
    V[support, np.arange(N)] = 1
    return V


@dataclass(frozen=True, eq=False)
class UserLayer:
    """One user's mapping matrix and its ``M`` length-``K`` codewords."""

    mapping_matrix: np.ndarray
    codewords: np.ndarray

    @property
    def indicator(self) -> np.ndarray:
        V = self.mapping_matrix
        return np.diag(V @ V.T).astype(np.int64)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.indicator)

    @property
    def zero_rows(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.indicator == 0)]


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Bipartite graph between resources (rows) and users (columns).

    ``edges`` lists ``(k, j)`` pairs in row-major order; ``resource_edges[k]``
    and ``layer_edges[j]`` index into it with neighbours sorted ascending.
    """

    F: np.ndarray
    degrees: np.ndarray
    resource_users: tuple[tuple[int, ...], ...]
    layer_resources: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]
    resource_edges: tuple[np.ndarray, ...]
    layer_edges: tuple[np.ndarray, ...]

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class ScmaSystem:
    """Immutable ``(K, N, M, J)`` SCMA system.

    Validation runs at construction; see :class:`CodebookError`.
    """

    K: int
    N: int
    M: int
    users: tuple[UserLayer, ...]
    name: str = ""
    graph: FactorGraph = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        users = tuple(self.users)
        object.__setattr__(self, "users", users)
        K, N, M = self.K, self.N, self.M
        if not 1 <= N <= K:
            raise CodebookError(f"need 1 <= N <= K, got N={N}, K={K}")
        if M < 2 or M & (M - 1):
            raise CodebookError(f"M must be a power of two >= 2, got {M}")
        if not users:
            raise CodebookError("system needs at least one user")
        if len(users) > math.comb(K, N):
            raise CodebookError(f"J={len(users)} exceeds C({K},{N})")
        for j, u in enumerate(users):
            _validate_layer(u, K, N, M, j)
        object.__setattr__(self, "graph", derive_factor_graph(self))

    @property
    def J(self) -> int:
        return len(self.users)

    @property
    def overloading(self) -> float:
        return self.J / self.K

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.M))

    @property
    def codebook(self) -> np.ndarray:
        """Stacked ``(J, M, K)`` complex codewords."""
        return np.stack([u.codewords for u in self.users])

    @property
    def F(self) -> np.ndarray:
        return self.graph.F

    def energy_per_resource(self) -> float:
        """Mean over resources of ``E|sum_j x_jk|^2`` for uniform independent symbols."""
        cb = self.codebook
        mean = cb.mean(axis=1)  # (J, K)
        power = (np.abs(cb) ** 2).mean(axis=1)
        total = power.sum(axis=0) + np.abs(mean.sum(axis=0)) ** 2 - (np.abs(mean) ** 2).sum(axis=0)
        return float(total.mean())

    def energy_per_bit(self) -> float:
        return self.energy_per_resource() * self.K / (self.J * self.bits_per_symbol)


def _validate_layer(u: UserLayer, K: int, N: int, M: int, j: int) -> None:
    V = np.asarray(u.mapping_matrix)
    if V.shape != (K, N):
        raise CodebookError(f"mapping matrix shape {V.shape} != ({K}, {N})", j)
    if not np.isin(V, (0, 1)).all() or (V.sum(axis=0) != 1).any() or (V.sum(axis=1) > 1).any():
        raise CodebookError("mapping matrix is not an identity with zero rows inserted", j)
    support = np.flatnonzero(V.sum(axis=1))
    if not np.array_equal(V[support], np.eye(N, dtype=V.dtype)):
        raise CodebookError("mapping matrix rows are not in identity order", j)
    cw = np.asarray(u.codewords)
    if cw.shape != (M, K):
        raise CodebookError(f"codeword array shape {cw.shape} != ({M}, {K})", j)
    f = np.diag(V @ V.T)
    off = cw[:, f == 0]
    if np.any(off != 0):
        m = int(np.flatnonzero(np.any(off != 0, axis=1))[0])
        raise CodebookError(f"codeword {m} is nonzero outside the user's support", j)
    for a, b in itertools.combinations(range(M), 2):
        if np.array_equal(cw[a], cw[b]):
            raise CodebookError(f"codewords {a} and {b} are identical", j)


def derive_factor_graph(system: ScmaSystem) -> FactorGraph:
    F = np.stack([u.indicator for u in system.users], axis=1)
    K, J = F.shape
    resource_users = tuple(tuple(int(j) for j in np.flatnonzero(F[k])) for k in range(K))
    layer_resources = tuple(tuple(int(k) for k in np.flatnonzero(F[:, j])) for j in range(J))
    edges = tuple((k, j) for k in range(K) for j in resource_users[k])
    index = {e: i for i, e in enumerate(edges)}
    resource_edges = tuple(np.array([index[k, j] for j in resource_users[k]], dtype=np.intp) for k in range(K))
    layer_edges = tuple(np.array([index[k, j] for k in layer_resources[j]], dtype=np.intp) for j in range(J))
    F.setflags(write=False)
    return FactorGraph(
        F=F,
        degrees=F.sum(axis=1),
        resource_users=resource_users,
        layer_resources=layer_resources,
        edges=edges,
        resource_edges=resource_edges,
        layer_edges=layer_edges,
    )


def regular_supports(K: int, N: int) -> list[tuple[int, ...]]:
    """All ``N``-subsets of ``range(K)`` in lexicographic order."""
    return list(itertools.combinations(range(K), N))


def is_regular(system: ScmaSystem) -> bool:
    """True when the system uses every ``N``-subset of resources, in lexicographic column order."""
    expected = regular_supports(system.K, system.N)
    if system.J != len(expected):
        return False
    return all(tuple(system.graph.layer_resources[j]) == s for j, s in enumerate(expected))


def layers_from_supports(
    K: int, N: int, supports: Iterable[Sequence[int]], codewords: Sequence[np.ndarray]
) -> tuple[UserLayer, ...]:
    users = []
    for s, cw in zip(supports, codewords):
        zero_rows = [k for k in range(K) if k not in s]
        users.append(UserLayer(build_mapping_matrix(K, N, zero_rows), np.asarray(cw, dtype=complex)))
    return tuple(users)


# Reference codebook: every user repeats one QPSK symbol on both of its
# resources, phase-rotated by r * pi/7 on a resource where it is the r-th user.
# The rotation was picked by a search over rotations and dimension
# permutations (see demos/codebook_design.py) as the one with distinct
# superpositions for all frames and the lowest error rate near 1% BLER.
# Implementer-authored; not taken from any published table.
REFERENCE_ROTATION = np.pi / 7


def reference_codebook_array(K: int = 4, N: int = 2, rotation: float = REFERENCE_ROTATION,
                             permutation=(0, 1, 2, 3)) -> np.ndarray:
    """``(J, 4, K)`` codewords of the regular ``K, N`` system with a rotated QPSK mother.

    ``permutation`` relabels the QPSK points on every second nonzero dimension.
    """
    supports = regular_supports(K, N)
    J = len(supports)
    qpsk = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4))) / np.sqrt(N)
    cb = np.zeros((J, 4, K), dtype=complex)
    for j, s in enumerate(supports):
        for d, k in enumerate(s):
            rank = [jj for jj, ss in enumerate(supports) if k in ss].index(j)
            base = qpsk if d % 2 == 0 else qpsk[list(permutation)]
            cb[j, :, k] = base * np.exp(1j * rotation * rank)
    return cb


def reference_system() -> ScmaSystem:
    """The shipped ``K=4, N=2, M=4, J=6`` reference system."""
    ref = resources.files("scmadec") / "data" / "reference_codebook.json"
    return loads_codebook(ref.read_text())


# -- codebook documents -------------------------------------------------------


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def codebook_to_dict(system: ScmaSystem) -> dict:
    return {
        "name": system.name,
        "K": system.K,
        "N": system.N,
        "M": system.M,
        "J": system.J,
        "users": [
            {"zero_rows": u.zero_rows, "codewords": [[_pair(z) for z in cw] for cw in u.codewords]}
            for u in system.users
        ],
    }


def dumps_codebook(system: ScmaSystem) -> str:
    """JSON text with one codeword per line."""
    doc = codebook_to_dict(system)
    users = doc.pop("users")
    head = json.dumps(doc)[:-1]
    blocks = []
    for u in users:
        cws = ",\n      ".join(json.dumps(cw) for cw in u["codewords"])
        blocks.append(f'    {{"zero_rows": {json.dumps(u["zero_rows"])},\n     "codewords": [\n      {cws}]}}')
    return head + ',\n "users": [\n' + ",\n".join(blocks) + "\n ]\n}\n"


def codebook_from_dict(doc: dict) -> ScmaSystem:
    try:
        K, N, M, J = (int(doc[key]) for key in ("K", "N", "M", "J"))
        entries = list(doc["users"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CodebookError(f"malformed codebook header: {exc}") from exc
    if len(entries) != J:
        raise CodebookError(f"J={J} but {len(entries)} users listed")
    users = []
    for j, entry in enumerate(entries):
        try:
            V = build_mapping_matrix(K, N, entry["zero_rows"])
        except CodebookError as exc:
            raise CodebookError(str(exc), j) from None
        except (KeyError, TypeError) as exc:
            raise CodebookError(f"missing zero_rows: {exc}", j) from None
        try:
            raw = np.asarray(entry["codewords"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise CodebookError(f"unreadable codewords: {exc}", j) from None
        if raw.shape != (M, K, 2):
            raise CodebookError(f"codewords must have shape ({M}, {K}, 2), got {raw.shape}", j)
        users.append(UserLayer(V, raw[..., 0] + 1j * raw[..., 1]))
    return ScmaSystem(K, N, M, tuple(users), name=str(doc.get("name", "")))


def loads_codebook(text: str) -> ScmaSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookError(f"codebook is not valid JSON: {exc}") from exc
    return codebook_from_dict(doc)


def load_codebook(path: str | Path) -> ScmaSystem:
    """Read and validate a JSON codebook file."""
    return loads_codebook(Path(path).read_text())
