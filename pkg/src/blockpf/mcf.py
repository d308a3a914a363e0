"""Exact integer minimum-cost flow and the size-constrained assignment network.

The cluster-assignment step of constrained k-means is expressed as a flow
network: one unit-supply node per data point, one cluster node with demand
-xi each, and a final sink absorbing the remaining d_x - K*xi units through
capacity (zeta - xi) arcs.  Solving it exactly gives 0/1 assignments with
cluster sizes in [xi, zeta].

The solver is successive shortest augmenting paths with node potentials
(Bellman-Ford once, Dijkstra thereafter).  All costs are integers; ties are
broken by lowest node index and build-time arc order, so identical networks
always produce identical flows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import Infeasible, InfeasibleConstraints, MalformedSolution

__all__ = [
    "FlowNetwork",
    "FlowSolution",
    "build_assignment_network",
    "solve_mcf",
    "extract_assignment",
    "solve_assignment",
    "COST_SCALE",
]

# real-valued squared distances are quantized at this scale before solving;
# integral costs give exact integral optima and reproducible tie-breaking
COST_SCALE = 10**6

_INF = np.int64(2**62)


@dataclass(frozen=True)
class FlowNetwork:
    node_count: int
    supplies: np.ndarray  # int64, one per node; positive = source
    tails: np.ndarray  # int64, one per arc
    heads: np.ndarray
    capacities: np.ndarray  # int64, >= 0
    costs: np.ndarray  # int64 per unit of flow

    def __post_init__(self):
        sup = np.asarray(self.supplies, dtype=np.int64)
        if sup.shape != (self.node_count,):
            raise ValueError("supplies must have one entry per node")
        if int(sup.sum()) != 0:
            raise ValueError("supplies must sum to zero")
        for name in ("tails", "heads", "capacities", "costs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "supplies", sup)
        if np.any(self.capacities < 0):
            raise ValueError("capacities must be nonnegative")
        if np.any(self.tails == self.heads):
            raise ValueError("self-loop arcs are not allowed")
        for nodes in (self.tails, self.heads):
            if np.any(nodes < 0) or np.any(nodes >= self.node_count):
                raise ValueError("arc endpoint out of range")

    @property
    def arc_count(self) -> int:
        return len(self.tails)


@dataclass(frozen=True)
class FlowSolution:
    flow: np.ndarray  # int64 per arc
    total_cost: int


@njit(cache=True)
def _ssp(n_nodes, supplies, tails, heads, caps, costs):  # pragma: no cover - jitted
    n = n_nodes + 2
    src = n_nodes
    snk = n_nodes + 1
    m_in = len(tails)

    n_sup = 0
    for v in range(n_nodes):
        if supplies[v] != 0:
            n_sup += 1
    m = m_in + n_sup

    # residual arcs 2j (forward) / 2j+1 (backward)
    to = np.empty(2 * m, dtype=np.int64)
    frm = np.empty(2 * m, dtype=np.int64)
    rcap = np.empty(2 * m, dtype=np.int64)
    rcost = np.empty(2 * m, dtype=np.int64)
    for j in range(m_in):
        frm[2 * j] = tails[j]
        to[2 * j] = heads[j]
        rcap[2 * j] = caps[j]
        rcost[2 * j] = costs[j]
        frm[2 * j + 1] = heads[j]
        to[2 * j + 1] = tails[j]
        rcap[2 * j + 1] = 0
        rcost[2 * j + 1] = -costs[j]
    k = m_in
    total_supply = np.int64(0)
    for v in range(n_nodes):
        s = supplies[v]
        if s == 0:
            continue
        if s > 0:
            a, b, c = src, v, s
            total_supply += s
        else:
            a, b, c = v, snk, -s
        frm[2 * k] = a
        to[2 * k] = b
        rcap[2 * k] = c
        rcost[2 * k] = 0
        frm[2 * k + 1] = b
        to[2 * k + 1] = a
        rcap[2 * k + 1] = 0
        rcost[2 * k + 1] = 0
        k += 1

    # CSR adjacency over residual arcs, stable in arc-id order
    deg = np.zeros(n + 1, dtype=np.int64)
    for e in range(2 * m):
        deg[frm[e] + 1] += 1
    for v in range(n):
        deg[v + 1] += deg[v]
    adj = np.empty(2 * m, dtype=np.int64)
    fill = deg[:-1].copy()
    for e in range(2 * m):
        v = frm[e]
        adj[fill[v]] = e
        fill[v] += 1

    # Bellman-Ford potentials from the super source
    pot = np.full(n, _INF, dtype=np.int64)
    pot[src] = 0
    for _ in range(n):
        changed = False
        for e in range(2 * m):
            if rcap[e] > 0 and pot[frm[e]] < _INF:
                nd = pot[frm[e]] + rcost[e]
                if nd < pot[to[e]]:
                    pot[to[e]] = nd
                    changed = True
        if not changed:
            break
    for v in range(n):
        if pot[v] == _INF:
            pot[v] = 0  # unreachable; any finite value keeps reduced costs valid

    dist = np.empty(n, dtype=np.int64)
    done = np.empty(n, dtype=np.bool_)
    par = np.empty(n, dtype=np.int64)  # residual arc id into each node

    sent = np.int64(0)
    while sent < total_supply:
        # Dijkstra with reduced costs; min-dist node of lowest index first
        dist[:] = _INF
        done[:] = False
        par[:] = -1
        dist[src] = 0
        while True:
            u = -1
            best = _INF
            for v in range(n):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = True
            du = dist[u]
            for idx in range(deg[u], deg[u + 1]):
                e = adj[idx]
                if rcap[e] <= 0:
                    continue
                v = to[e]
                if done[v]:
                    continue
                nd = du + rcost[e] + pot[u] - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    par[v] = e
        if dist[snk] >= _INF:
            return 1, rcap[: 2 * m_in : 2], pot  # infeasible: supply left unshipped
        # bottleneck along the path
        bott = total_supply - sent
        v = snk
        while v != src:
            e = par[v]
            if rcap[e] < bott:
                bott = rcap[e]
            v = frm[e]
        v = snk
        while v != src:
            e = par[v]
            rcap[e] -= bott
            rcap[e ^ 1] += bott
            v = frm[e]
        sent += bott
        for v in range(n):
            if dist[v] < _INF:
                pot[v] += dist[v]
            else:
                pot[v] += dist[snk]

    flow = np.empty(m_in, dtype=np.int64)
    for j in range(m_in):
        flow[j] = caps[j] - rcap[2 * j]
    return 0, flow, pot


def solve_mcf(net: FlowNetwork) -> FlowSolution:
    """Minimum-cost flow meeting all supplies. Raises Infeasible otherwise.

    Costs may be negative only if the network contains no negative-cost
    cycle (always true for the acyclic assignment networks built here).
    """
    status, flow, _pot = _ssp(
        net.node_count, net.supplies, net.tails, net.heads, net.capacities, net.costs
    )
    if status != 0:
        raise Infeasible("no flow satisfies the node supplies")
    # complementary slackness with the final node potentials
    pot = _pot[: net.node_count]
    reduced = net.costs + pot[net.tails] - pot[net.heads]
    if np.any(reduced[flow < net.capacities] < 0) or np.any(reduced[flow > 0] > 0):
        raise MalformedSolution("optimality certificate violated")
    total = int(np.dot(flow, net.costs))
    return FlowSolution(flow=flow, total_cost=total)


def build_assignment_network(costs: np.ndarray, xi: int, zeta: int,
                             scale: int = COST_SCALE) -> FlowNetwork:
    """Flow network whose optimum assigns points to clusters of size [xi, zeta].

    ``costs`` is a (n_points, K) matrix of real squared distances; they are
    quantized to integers at ``scale``.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:
        raise ValueError("costs must be a 2-D matrix")
    n, k = costs.shape
    if not (xi >= 0 and zeta >= xi):
        raise InfeasibleConstraints(f"need 0 <= xi <= zeta, got xi={xi}, zeta={zeta}")
    if not (xi * k <= n <= zeta * k):
        raise InfeasibleConstraints(
            f"no partition of {n} points into {k} clusters of size [{xi}, {zeta}]"
        )
    icost = np.rint(costs * scale).astype(np.int64)

    supplies = np.zeros(n + k + 1, dtype=np.int64)
    supplies[:n] = 1
    supplies[n : n + k] = -xi
    supplies[n + k] = -(n - k * xi)

    # point->cluster arcs, points ascending then clusters ascending
    tails = np.repeat(np.arange(n, dtype=np.int64), k)
    heads = np.tile(np.arange(n, n + k, dtype=np.int64), n)
    caps = np.ones(n * k, dtype=np.int64)
    arc_costs = icost.reshape(-1)
    # cluster->final-sink arcs with capacity zeta - xi
    tails = np.concatenate([tails, np.arange(n, n + k, dtype=np.int64)])
    heads = np.concatenate([heads, np.full(k, n + k, dtype=np.int64)])
    caps = np.concatenate([caps, np.full(k, zeta - xi, dtype=np.int64)])
    arc_costs = np.concatenate([arc_costs, np.zeros(k, dtype=np.int64)])

    return FlowNetwork(
        node_count=n + k + 1,
        supplies=supplies,
        tails=tails,
        heads=heads,
        capacities=caps,
        costs=arc_costs,
    )


def extract_assignment(net: FlowNetwork, sol: FlowSolution, n_points: int,
                       n_clusters: int) -> np.ndarray:
    """Cluster index per point from a solved assignment network."""
    assign = np.full(n_points, -1, dtype=np.int64)
    flow = sol.flow[: n_points * n_clusters].reshape(n_points, n_clusters)
    for i in range(n_points):
        hits = np.flatnonzero(flow[i] == 1)
        if len(hits) != 1 or flow[i].sum() != 1:
            raise MalformedSolution(f"point {i} ships {int(flow[i].sum())} units")
        assign[i] = hits[0]
    return assign


def solve_assignment(costs: np.ndarray, xi: int, zeta: int) -> np.ndarray:
    """Optimal size-constrained assignment: cluster index per point."""
    net = build_assignment_network(costs, xi, zeta)
    sol = solve_mcf(net)
    return extract_assignment(net, sol, costs.shape[0], costs.shape[1])
