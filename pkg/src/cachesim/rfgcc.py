"""Packet-level simulation of random fractional caching with greedy
constrained coloring (GCC) delivery.

Files are split into packets of ``T`` bits; a version of length ``omega``
(bits/sample) of a ``tau``-bit file holds ``round(omega * tau / T)`` packets,
always a prefix of the file. Packet ids are ``(file, position)`` pairs with
0-based positions. Receiver sets are stored as bitmasks, so ``K <= 62``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .bounds import CacheDesign, theorem1_bound
from .errors import InfeasibleDesignError, InvalidArgumentError
from .oracles import chromatic_coloring

__all__ = [
    "SimParams",
    "packet_count",
    "packetize",
    "CacheConfiguration",
    "PacketDemand",
    "ConflictGraph",
    "Coloring",
    "random_fill_caches",
    "packet_demand",
    "build_conflict_graph",
    "gcc1_coloring",
    "gcc2_coloring",
    "exhaustive_coloring",
    "gcc_delivery",
    "verify_decodable",
    "coloring_is_valid",
    "simulate",
    "TrialResult",
]

MAX_RECEIVERS = 62
EXHAUSTIVE_MAX_VERTICES = 12


@dataclass(frozen=True)
class SimParams:
    tau: float
    T: float
    seed: int = 0

    def __post_init__(self):
        if not (self.tau > 0 and self.T > 0) or self.tau / self.T < 1:
            raise InvalidArgumentError("need tau >= T > 0")

    @property
    def ratio(self) -> float:
        return self.tau / self.T


def packet_count(x, ratio):
    """``x * ratio`` rounded half up, as int64."""
    return np.floor(np.asarray(x, dtype=float) * ratio + 0.5 + 1e-9).astype(np.int64)


def packetize(storing_ranges, params: SimParams) -> np.ndarray:
    """Number of packets in each version."""
    omega = np.asarray(storing_ranges, dtype=float)
    if np.any(omega < 0):
        raise InvalidArgumentError("storing ranges must be nonnegative")
    return packet_count(omega, params.ratio)


@dataclass(eq=False)
class CacheConfiguration:
    """Cached packet positions, ``cached[k][n]`` sorted, plus version lengths in packets."""

    cached: list
    version_len: np.ndarray  # (K, N) packets
    _masks: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return self.version_len.shape[0]

    @property
    def N(self) -> int:
        return self.version_len.shape[1]

    def holders(self, n: int) -> np.ndarray:
        """Bitmask of receivers caching each position of file ``n``."""
        if n not in self._masks:
            length = max([int(self.version_len[:, n].max())] + [int(c[n][-1]) + 1 for c in self.cached if c[n].size])
            m = np.zeros(length, dtype=np.int64)
            for k in range(self.K):
                m[self.cached[k][n]] |= np.int64(1) << k
            self._masks[n] = m
        return self._masks[n]

    def contains(self, k: int, n: int, pos) -> np.ndarray:
        h = self.holders(n)
        pos = np.asarray(pos, dtype=np.int64)
        inside = pos < h.size
        out = np.zeros(pos.shape, dtype=bool)
        out[inside] = (h[pos[inside]] >> k) & 1 == 1
        return out


@dataclass(eq=False)
class PacketDemand:
    """Requested file per receiver and the uncached packet positions of its version."""

    d: np.ndarray
    missing: list  # per receiver, sorted positions


class Coloring(NamedTuple):
    colors: np.ndarray  # color per vertex
    n_colors: int
    origin: str  # "gcc1" | "gcc2" | "exhaustive" | other


def random_fill_caches(design: CacheDesign, params: SimParams, trial: int = 0, files=None) -> CacheConfiguration:
    """Each receiver stores a uniformly random subset of each version's packets.

    ``round(p mu tau/T)`` distinct positions are drawn without replacement from
    the ``round(omega tau/T)`` packets of the version, clamped to the version
    length. Draws use a generator seeded by ``(seed, trial)``, consumed
    receiver by receiver and file by file, so a trial is reproducible on its
    own. ``files`` restricts filling to a subset of files (others stay empty).
    """
    if design.K > MAX_RECEIVERS:
        raise InvalidArgumentError(f"at most {MAX_RECEIVERS} receivers supported")
    M = design.cache_alloc
    if np.any(M > design.omega * (1 + 1e-9) + 1e-9):
        raise InfeasibleDesignError("a receiver caches more of a file than its storing range")
    L = packetize(design.omega, params)
    C = np.minimum(packet_count(M, params.ratio), L)
    rng = np.random.default_rng([params.seed, trial])
    wanted = set(range(design.N)) if files is None else {int(n) for n in files}
    empty = np.empty(0, dtype=np.int64)
    cached = []
    for k in range(design.K):
        row = []
        for n in range(design.N):
            if n in wanted and C[k, n] > 0:
                pos = rng.choice(L[k, n], size=C[k, n], replace=False)
                row.append(np.sort(pos).astype(np.int64))
            else:
                row.append(empty)
        cached.append(row)
    return CacheConfiguration(cached, L)


def packet_demand(C: CacheConfiguration, d) -> PacketDemand:
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (C.K,) or np.any(d < 0) or np.any(d >= C.N):
        raise InvalidArgumentError("demand must hold one file index in [0, N) per receiver")
    missing = []
    for k in range(C.K):
        n = int(d[k])
        allpos = np.arange(C.version_len[k, n], dtype=np.int64)
        missing.append(np.setdiff1d(allpos, C.cached[k][n], assume_unique=True))
    return PacketDemand(d, missing)


@dataclass(eq=False)
class ConflictGraph:
    """Conflict graph with one vertex per (requested packet, requester).

    Vertex ``v`` carries ``file[v]``, ``pos[v]``, requester ``beta[v]`` and
    the bitmask ``eta[v]`` of receivers caching the packet. Adjacency is a
    predicate on these labels and is never stored as an edge list.
    """

    file: np.ndarray
    pos: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    K: int

    @property
    def n_vertices(self) -> int:
        return self.file.size

    @property
    def label(self) -> np.ndarray:
        """Receiver label ``{beta} | eta`` as a bitmask."""
        return self.eta | (np.int64(1) << self.beta)

    @property
    def packet_key(self) -> np.ndarray:
        return self.file * (np.int64(1) << 32) + self.pos

    def adjacent(self, u, v) -> np.ndarray:
        """Interference between vertex arrays ``u`` and ``v`` (broadcasting)."""
        u = np.asarray(u)
        v = np.asarray(v)
        same = (self.file[u] == self.file[v]) & (self.pos[u] == self.pos[v])
        u_at_v = (self.eta[u] >> self.beta[v]) & 1
        v_at_u = (self.eta[v] >> self.beta[u]) & 1
        return ~same & ((u_at_v == 0) | (v_at_u == 0))

    def adjacency_matrix(self) -> np.ndarray:
        idx = np.arange(self.n_vertices)
        A = self.adjacent(idx[:, None], idx[None, :])
        np.fill_diagonal(A, False)
        return A


def build_conflict_graph(C: CacheConfiguration, Q: PacketDemand) -> ConflictGraph:
    files, pos, beta, eta = [], [], [], []
    for k in range(C.K):
        n = int(Q.d[k])
        p = Q.missing[k]
        files.append(np.full(p.size, n, dtype=np.int64))
        pos.append(p)
        beta.append(np.full(p.size, k, dtype=np.int64))
        h = C.holders(n)
        e = np.zeros(p.size, dtype=np.int64)
        inside = p < h.size
        e[inside] = h[p[inside]]
        eta.append(e)
    cat = lambda xs: np.concatenate(xs) if xs else np.empty(0, dtype=np.int64)  # noqa: E731
    g = ConflictGraph(cat(files), cat(pos), cat(beta), cat(eta), C.K)
    # a requested packet is never cached by its requester; this is what keeps
    # same-label vertices of different requesters independent
    if np.any((g.eta >> g.beta) & 1):
        raise AssertionError("requested packet found in the requester's cache")
    return g


def _classes(colors, n_colors):
    """Padded (n_colors, width) matrix of vertex ids per color, -1 padded."""
    order = np.argsort(colors, kind="stable")
    c_sorted = colors[order]
    counts = np.bincount(colors, minlength=n_colors)
    width = int(counts.max()) if counts.size else 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(order.size) - starts[c_sorted]
    out = np.full((n_colors, width), -1, dtype=np.int64)
    out[c_sorted, slot] = order
    return out


def coloring_is_valid(graph: ConflictGraph, coloring: Coloring) -> bool:
    """Every color class is an independent set."""
    if coloring.colors.size != graph.n_vertices:
        return False
    if graph.n_vertices == 0:
        return True
    cls = _classes(coloring.colors, coloring.n_colors)
    w = cls.shape[1]
    for a in range(w):
        for b in range(a + 1, w):
            u, v = cls[:, a], cls[:, b]
            ok = (u >= 0) & (v >= 0)
            if np.any(graph.adjacent(u[ok], v[ok])):
                return False
    return True


def gcc1_coloring(graph: ConflictGraph, check: bool = True) -> Coloring:
    """Label-grouped coloring.

    Vertices with equal receiver label are queued per requester in ascending
    vertex order and zipped: the ``j``-th color of a label takes the ``j``-th
    vertex of every requester that still has one.
    """
    colors, n = kernels.label_zip_colors(graph.label, graph.beta)
    out = Coloring(colors, int(n), "gcc1")
    if check and not coloring_is_valid(graph, out):
        raise AssertionError("GCC1 produced a non-independent color class")
    return out


def gcc2_coloring(graph: ConflictGraph) -> Coloring:
    """One color per distinct requested packet (uncoded multicast)."""
    _, inv = np.unique(graph.packet_key, return_inverse=True)
    inv = inv.astype(np.int64).reshape(-1)
    return Coloring(inv, int(inv.max()) + 1 if inv.size else 0, "gcc2")


def exhaustive_coloring(graph: ConflictGraph) -> Coloring:
    """Minimum coloring by backtracking; graphs up to 12 vertices."""
    if graph.n_vertices > EXHAUSTIVE_MAX_VERTICES:
        raise InvalidArgumentError(f"exhaustive coloring limited to {EXHAUSTIVE_MAX_VERTICES} vertices")
    col = chromatic_coloring(graph.adjacency_matrix())
    return Coloring(col, int(col.max()) + 1 if col.size else 0, "exhaustive")


class Delivery(NamedTuple):
    rate: float
    coloring: Coloring
    graph: ConflictGraph
    gcc1_colors: int
    gcc2_colors: int

    def codeword(self) -> list:
        """Per color, the sorted distinct packet ids XOR-ed together."""
        g = self.graph
        cls = _classes(self.coloring.colors, self.coloring.n_colors)
        out = []
        for row in cls:
            row = row[row >= 0]
            out.append(sorted({(int(g.file[v]), int(g.pos[v])) for v in row}))
        return out


def gcc_delivery(C: CacheConfiguration, Q: PacketDemand, params: SimParams) -> Delivery:
    """Run both colorings and keep the one with fewer colors (GCC1 on ties)."""
    g = build_conflict_graph(C, Q)
    c1 = gcc1_coloring(g)
    c2 = gcc2_coloring(g)
    best = c1 if c1.n_colors <= c2.n_colors else c2
    return Delivery(best.n_colors / params.ratio, best, g, c1.n_colors, c2.n_colors)


def verify_decodable(C: CacheConfiguration, Q: PacketDemand, graph: ConflictGraph, coloring: Coloring) -> bool:
    """Every requested packet sits in a color class whose other packets its requester has cached.

    Cache membership is looked up in ``C`` directly, not in the graph labels,
    and the colored vertices must cover exactly the packets in ``Q``.
    """
    if coloring.colors.size != graph.n_vertices:
        return False
    for k in range(C.K):
        mine = graph.beta == k
        if not (np.all(graph.file[mine] == Q.d[k]) and np.array_equal(np.sort(graph.pos[mine]), Q.missing[k])):
            return False
    if graph.n_vertices == 0:
        return True
    cls = _classes(coloring.colors, coloring.n_colors)
    w = cls.shape[1]
    for a in range(w):
        v = cls[:, a]
        for b in range(w):
            if a == b:
                continue
            u = cls[:, b]
            ok = (u >= 0) & (v >= 0)
            vv, uu = v[ok], u[ok]
            same = (graph.file[uu] == graph.file[vv]) & (graph.pos[uu] == graph.pos[vv])
            need = np.flatnonzero(~same)
            for k in np.unique(graph.beta[vv[need]]):
                sel = need[graph.beta[vv[need]] == k]
                for n in np.unique(graph.file[uu[sel]]):
                    s2 = sel[graph.file[uu[sel]] == n]
                    if not np.all(C.contains(int(k), int(n), graph.pos[uu[s2]])):
                        return False
    return True


class TrialResult(NamedTuple):
    trial: int
    demand: tuple
    rate: float
    gcc1_rate: float
    gcc2_rate: float
    bound: float
    psi1: float
    psi2: float
    decodable: bool
    n_vertices: int


def simulate(design: CacheDesign, params: SimParams, trials: int, demand=None, q=None, verify=True, start=0):
    """Independent RF-GCC trials.

    Each trial refills the caches with its own generator, seeded by
    ``(params.seed, trial)``. The demand is fixed when ``demand`` is given,
    otherwise drawn from the (K, N) matrix ``q`` with the same generator
    family (seed ``(params.seed, trial, 1)``). Trials are numbered from
    ``start``, so a run can be split into chunks without changing results.
    """
    if demand is None and q is None:
        raise InvalidArgumentError("give either a fixed demand or a demand matrix q")
    out = []
    bound_cache = {}
    for t in range(start, start + trials):
        if demand is not None:
            d = np.asarray(demand, dtype=np.int64)
        else:
            rng = np.random.default_rng([params.seed, t, 1])
            qm = np.asarray(q, dtype=float)
            cdf = np.cumsum(qm, axis=1)
            cdf[:, -1] = 1.0
            u = rng.random(design.K)
            d = np.array([np.searchsorted(cdf[k], u[k], side="right") for k in range(design.K)], dtype=np.int64)
        C = random_fill_caches(design, params, t)
        Q = packet_demand(C, d)
        dl = gcc_delivery(C, Q, params)
        ok = verify_decodable(C, Q, dl.graph, dl.coloring) if verify else True
        key = tuple(int(x) for x in d)
        if key not in bound_cache:
            bound_cache[key] = theorem1_bound(d, design)
        b = bound_cache[key]
        out.append(
            TrialResult(
                t,
                key,
                dl.rate,
                dl.gcc1_colors / params.ratio,
                dl.gcc2_colors / params.ratio,
                b.bound,
                b.psi1,
                b.psi2,
                bool(ok),
                dl.graph.n_vertices,
            )
        )
    return out
