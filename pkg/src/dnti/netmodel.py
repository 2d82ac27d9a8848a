"""Feeder graph model: switchable branches, loops, radiality, substation paths.

Node 1 is always the substation. Branches are stored with canonical
orientation ``from_node < to_node``; a positive branch current flows from
``from_node`` to ``to_node``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SUBSTATION = 1


class NetworkError(ValueError):
    """Raised for malformed network files or inconsistent topologies."""


@dataclass(frozen=True)
class Branch:
    id: int
    from_node: int
    to_node: int
    normally_closed: bool = True
    has_pmu: bool = False

    def __post_init__(self):
        if self.from_node >= self.to_node:
            raise NetworkError(
                f"branch {self.id}: requires from_node < to_node, "
                f"got ({self.from_node}, {self.to_node})"
            )

    def other(self, node: int) -> int:
        return self.to_node if node == self.from_node else self.from_node


@dataclass(frozen=True)
class Network:
    name: str
    nodes: tuple[int, ...]
    branches: tuple[Branch, ...]
    _by_id: dict = field(repr=False, compare=False, default=None)
    _adj: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        n = len(self.nodes)
        if list(self.nodes) != list(range(1, n + 1)):
            raise NetworkError("node ids must be contiguous integers starting at 1")
        by_id, pairs, adj = {}, set(), {i: [] for i in self.nodes}
        for br in self.branches:
            if br.id in by_id:
                raise NetworkError(f"duplicate branch id {br.id}")
            if br.from_node not in adj or br.to_node not in adj:
                raise NetworkError(f"branch {br.id} references unknown node")
            pair = (br.from_node, br.to_node)
            if pair in pairs:
                raise NetworkError(f"duplicate branch between nodes {pair}")
            pairs.add(pair)
            by_id[br.id] = br
            adj[br.from_node].append(br)
            adj[br.to_node].append(br)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_adj", adj)
        if not self._connected(set(by_id)):
            raise NetworkError("all-closed graph is not connected")

    def _connected(self, closed_ids: set[int]) -> bool:
        seen = {SUBSTATION}
        stack = [SUBSTATION]
        while stack:
            node = stack.pop()
            for br in self._adj[node]:
                if br.id not in closed_ids:
                    continue
                peer = br.other(node)
                if peer not in seen:
                    seen.add(peer)
                    stack.append(peer)
        return len(seen) == len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def branch(self, branch_id: int) -> Branch:
        try:
            return self._by_id[branch_id]
        except KeyError:
            raise NetworkError(f"unknown branch id {branch_id}") from None

    def incident(self, node: int) -> list[Branch]:
        return list(self._adj[node])

    @property
    def pmu_branches(self) -> list[int]:
        return [br.id for br in self.branches if br.has_pmu]

    @property
    def tie_branches(self) -> list[int]:
        return [br.id for br in self.branches if not br.normally_closed]


@dataclass(frozen=True)
class Topology:
    """Closed/open status of every branch. Radial-valid iff closed set is a
    spanning tree."""

    closed: dict

    def is_closed(self, branch_id: int) -> bool:
        return self.closed[branch_id]

    def closed_ids(self) -> set[int]:
        return {bid for bid, on in self.closed.items() if on}

    def open_ids(self) -> set[int]:
        return {bid for bid, on in self.closed.items() if not on}

    @staticmethod
    def from_open_branches(net: Network, open_ids) -> "Topology":
        open_ids = set(open_ids)
        for bid in open_ids:
            net.branch(bid)
        return Topology({br.id: br.id not in open_ids for br in net.branches})

    @staticmethod
    def default(net: Network) -> "Topology":
        """Normally-closed branches closed, tie branches open."""
        return Topology({br.id: br.normally_closed for br in net.branches})


@dataclass(frozen=True)
class Loop:
    """A simple cycle of the all-closed graph, as a set of branch ids."""

    branch_ids: tuple[int, ...]

    @property
    def n_branches(self) -> int:
        return len(self.branch_ids)

    def __contains__(self, branch_id: int) -> bool:
        return branch_id in self.branch_ids


def load_network(text: str) -> Network:
    """Parse network JSON into a validated Network.

    Schema: ``{"name": str, "nodes": int, "branches": [{"id", "from", "to",
    "normally_closed", "pmu"}]}``. Branch orientation is canonicalized.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"network file parse error at line {exc.lineno}: {exc.msg}") from exc
    try:
        n = int(raw["nodes"])
        name = str(raw.get("name", ""))
        raw_branches = raw["branches"]
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"network file missing/invalid field: {exc}") from exc
    branches = []
    for k, rb in enumerate(raw_branches):
        try:
            u, v = int(rb["from"]), int(rb["to"])
            bid = int(rb["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(f"branch entry #{k}: {exc}") from exc
        if u == v:
            raise NetworkError(f"branch {bid}: self-loop at node {u}")
        if min(u, v) < 1:
            raise NetworkError(f"branch {bid}: node ids start at 1, got ({u}, {v})")
        branches.append(
            Branch(
                id=bid,
                from_node=min(u, v),
                to_node=max(u, v),
                normally_closed=bool(rb.get("normally_closed", True)),
                has_pmu=bool(rb.get("pmu", False)),
            )
        )
    return Network(name=name, nodes=tuple(range(1, n + 1)), branches=tuple(branches))


def _check_covers(net: Network, topo: Topology) -> None:
    for bid in topo.closed:
        net.branch(bid)
    missing = [br.id for br in net.branches if br.id not in topo.closed]
    if missing:
        raise NetworkError(f"topology missing status for branches {missing}")


def validate_radial(net: Network, topo: Topology) -> bool:
    """True iff the closed subgraph is a spanning tree (N-1 branches, connected)."""
    _check_covers(net, topo)
    closed = topo.closed_ids()
    if len(closed) != net.n_nodes - 1:
        return False
    return net._connected(closed)


def enumerate_loops(net: Network) -> list[Loop]:
    """All simple cycles of the all-closed graph (the set of possible loops).

    Backtracking search anchored at each cycle's smallest node; each cycle is
    reported exactly once. Cycle count is exponential only in the cyclomatic
    number, which is small for feeders.
    """
    loops = []
    adj = {node: sorted(net._adj[node], key=lambda b: b.other(node)) for node in net.nodes}

    def extend(anchor, node, visited, path):
        for br in adj[node]:
            peer = br.other(node)
            if peer == anchor and len(path) >= 2:
                # canonical direction: second node on path < last node
                first = path[0].other(anchor)
                if first < node:
                    loops.append(Loop(tuple(sorted(b.id for b in path + [br]))))
            elif peer > anchor and peer not in visited:
                visited.add(peer)
                extend(anchor, peer, visited, path + [br])
                visited.remove(peer)

    for anchor in net.nodes:
        extend(anchor, anchor, {anchor}, [])
    loops.sort(key=lambda lp: lp.branch_ids)
    return loops


def independent_loops(net: Network) -> list[Loop]:
    """One fundamental cycle per tie branch w.r.t. the normally-closed tree."""
    tree = Topology.default(net)
    if not validate_radial(net, tree):
        raise NetworkError("normally-closed branches do not form a spanning tree")
    loops = []
    for bid in sorted(net.tie_branches):
        br = net.branch(bid)
        upstream = path_to_substation(net, tree, br.from_node)
        downstream = path_to_substation(net, tree, br.to_node)
        # tree path between endpoints = symmetric difference of the two root paths
        tree_path = set(upstream) ^ set(downstream)
        loops.append(Loop(tuple(sorted(tree_path | {bid}))))
    return loops


def path_to_substation(net: Network, topo: Topology, node: int) -> list[int]:
    """Ordered branch ids along the unique closed-tree path node -> substation."""
    _check_covers(net, topo)
    if node not in net._adj:
        raise NetworkError(f"unknown node {node}")
    closed = topo.closed_ids()
    parent_branch = {SUBSTATION: None}
    queue = [SUBSTATION]
    while queue:
        cur = queue.pop(0)
        if cur == node:
            break
        for br in net._adj[cur]:
            if br.id not in closed:
                continue
            peer = br.other(cur)
            if peer not in parent_branch:
                parent_branch[peer] = (br.id, cur)
                queue.append(peer)
    if node not in parent_branch:
        raise NetworkError(f"node {node} unreachable from substation (non-radial topology?)")
    path = []
    cur = node
    while cur != SUBSTATION:
        bid, nxt = parent_branch[cur]
        path.append(bid)
        cur = nxt
    return path


def random_radial_topology(net: Network, rng) -> Topology:
    """Random spanning tree of the all-closed graph (randomized Kruskal)."""
    order = list(net.branches)
    perm = rng.permutation(len(order))
    parent = {node: node for node in net.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    closed = set()
    for idx in perm:
        br = order[int(idx)]
        ru, rv = find(br.from_node), find(br.to_node)
        if ru != rv:
            parent[ru] = rv
            closed.add(br.id)
    return Topology({br.id: br.id in closed for br in net.branches})
