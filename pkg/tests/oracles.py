"""Independent reference implementations used only to check the package.

These deliberately use different algorithms from the library code: cycle-space
subset enumeration instead of backtracking search, plain BFS instead of the
library path walk, and scipy's LP solver as a reference optimum.
"""

from itertools import combinations

from dnti.netmodel import SUBSTATION


def bfs_path_branches(net, closed_ids, node):
    """Branch-id path node -> substation by plain BFS, or None if unreachable."""
    prev = {SUBSTATION: None}
    frontier = [SUBSTATION]
    while frontier:
        nxt = []
        for cur in frontier:
            for br in net.incident(cur):
                if br.id not in closed_ids:
                    continue
                peer = br.other(cur)
                if peer not in prev:
                    prev[peer] = (br.id, cur)
                    nxt.append(peer)
        frontier = nxt
    if node not in prev:
        return None
    path = []
    cur = node
    while cur != SUBSTATION:
        bid, cur = prev[cur]
        path.append(bid)
    return path


def spanning_tree_edges(net):
    seen = {SUBSTATION}
    tree = []
    stack = [SUBSTATION]
    while stack:
        cur = stack.pop()
        for br in net.incident(cur):
            peer = br.other(cur)
            if peer not in seen:
                seen.add(peer)
                tree.append(br.id)
                stack.append(peer)
    return set(tree)


def all_simple_cycles_by_cycle_space(net):
    """Every simple cycle, via XOR over subsets of fundamental cycles.

    Any cycle-space element is a symmetric difference of fundamental cycles;
    keep only the elements that form one connected subgraph with all node
    degrees equal to 2.
    """
    tree = spanning_tree_edges(net)
    chords = [br.id for br in net.branches if br.id not in tree]
    closed = {br.id: True for br in net.branches}
    fundamentals = []
    for chord in chords:
        br = net.branch(chord)
        up = bfs_path_branches(net, tree, br.from_node)
        down = bfs_path_branches(net, tree, br.to_node)
        fundamentals.append(frozenset(set(up) ^ set(down)) | {chord})

    cycles = set()
    for r in range(1, len(fundamentals) + 1):
        for combo in combinations(fundamentals, r):
            edges = frozenset()
            for c in combo:
                edges = edges ^ c
            if edges and _is_single_simple_cycle(net, edges):
                cycles.add(edges)
    return {frozenset(c) for c in cycles}


def _is_single_simple_cycle(net, edge_ids):
    degree = {}
    for bid in edge_ids:
        br = net.branch(bid)
        degree[br.from_node] = degree.get(br.from_node, 0) + 1
        degree[br.to_node] = degree.get(br.to_node, 0) + 1
    if any(d != 2 for d in degree.values()):
        return False
    # connectivity over the touched nodes
    nodes = set(degree)
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for br in net.incident(cur):
            if br.id in edge_ids:
                peer = br.other(cur)
                if peer not in seen:
                    seen.add(peer)
                    stack.append(peer)
    return seen == nodes
