"""Bandwidth-reducing multilevel reordering and super-row derivation.

The pipeline converts the matrix pattern into an undirected graph, coarsens
it level by level with heavy-edge matching, orders the coarsest graph with
a weight-aware reverse Cuthill-McKee pass, and then expands the ordering
back down, keeping the members of every coarse node contiguous.  The
coarse nodes of each level become the super-rows (level 1) and
super-super-rows (level 2) of the packed matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .format import CsrMatrix, Permutation

__all__ = [
    "AdjacencyGraph",
    "CoarseningMap",
    "BandKResult",
    "build_graph",
    "heavy_edge_matching",
    "coarsen",
    "weighted_bandwidth_order",
    "band_k",
]

# A matching round that removes less than this fraction of nodes counts as
# no progress and ends the coarsening loop (guards star-like graphs).
MIN_MATCH_SHRINK = 0.05


@dataclass(frozen=True, eq=False, repr=False)
class AdjacencyGraph:
    """Undirected graph in CSR-style adjacency form.

    ``node_weight[v]`` counts the original rows merged into node v (all
    ones at level 0).  ``edge_weight`` holds collapsed-edge multiplicities
    aligned with ``adj_idx``.  Adjacency lists are sorted, carry no
    self-loops, and are symmetric.
    """

    n_nodes: int
    adj_ptr: np.ndarray
    adj_idx: np.ndarray
    edge_weight: np.ndarray
    node_weight: np.ndarray

    def degrees(self) -> np.ndarray:
        return self.adj_ptr[1:] - self.adj_ptr[:-1]

    def __repr__(self) -> str:
        return (
            f"AdjacencyGraph(n_nodes={self.n_nodes}, "
            f"n_edges={len(self.adj_idx) // 2})"
        )


@dataclass(frozen=True, eq=False)
class CoarseningMap:
    """Partition of fine nodes into coarse nodes.

    ``fine_to_coarse[v]`` is the coarse node of fine node v and
    ``coarse_members[c]`` lists the fine nodes of coarse node c in
    ascending order.
    """

    fine_to_coarse: np.ndarray
    coarse_members: list


@dataclass(frozen=True, eq=False)
class BandKResult:
    """Outcome of :func:`band_k`.

    ``level_group_sizes[0]`` lists rows per super-row in permuted order;
    for k = 3, ``level_group_sizes[1]`` lists super-rows per
    super-super-row.  Both feed :func:`csrk.format.pack_csrk` directly.
    """

    perm: Permutation
    level_group_sizes: list


def _graph_from_edges(n: int, u: np.ndarray, v: np.ndarray,
                      w: np.ndarray, node_weight: np.ndarray) -> AdjacencyGraph:
    """Assemble a graph from directed edge lists (both directions present),
    merging parallel edges by summing their weights."""
    if len(u):
        key = u * n + v
        order = np.argsort(key, kind="stable")
        key = key[order]
        w = w[order]
        fresh = np.empty(len(key), dtype=bool)
        fresh[0] = True
        fresh[1:] = key[1:] != key[:-1]
        starts = np.nonzero(fresh)[0]
        seg = np.cumsum(fresh) - 1
        merged_w = np.zeros(len(starts), dtype=np.int64)
        np.add.at(merged_w, seg, w)
        key = key[starts]
        uu = key // n
        vv = key % n
    else:
        uu = np.empty(0, dtype=np.int64)
        vv = np.empty(0, dtype=np.int64)
        merged_w = np.empty(0, dtype=np.int64)
    adj_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(uu, minlength=n), out=adj_ptr[1:])
    return AdjacencyGraph(n, adj_ptr, vv, merged_w, node_weight)


def build_graph(a: CsrMatrix) -> AdjacencyGraph:
    """Build the undirected graph of the pattern of A + At.

    The diagonal is dropped and every node starts with weight 1.  Requires
    a square matrix.
    """
    if a.n_rows != a.n_cols:
        raise ValueError("graph construction requires a square matrix")
    n = a.n_rows
    rows = np.repeat(np.arange(n, dtype=np.int64), a.row_nnz())
    cols = a.col_idx.astype(np.int64)
    off = rows != cols
    rows = rows[off]
    cols = cols[off]
    pair = np.unique(np.minimum(rows, cols) * n + np.maximum(rows, cols))
    lo = pair // n
    hi = pair % n
    u = np.concatenate([lo, hi])
    v = np.concatenate([hi, lo])
    w = np.ones(len(u), dtype=np.int64)
    return _graph_from_edges(n, u, v, w, np.ones(n, dtype=np.int64))


def heavy_edge_matching(g: AdjacencyGraph) -> np.ndarray:
    """One maximal matching round; returns each node's partner (or itself).

    Nodes are visited in ascending degree order (ties toward the lower
    index).  Each unmatched node pairs with its unmatched neighbor of
    largest edge weight; ties go to the neighbor nearest in index, then
    to the lower index.  Nearness keeps pairs adjacent along the band
    when the graph is already labeled in a band order, which is what the
    multilevel driver arranges between rounds.
    """
    n = g.n_nodes
    deg = g.degrees()
    visit = np.lexsort((np.arange(n), deg))
    ptr = g.adj_ptr.tolist()
    idx = g.adj_idx.tolist()
    ew = g.edge_weight.tolist()
    match = np.full(n, -1, dtype=np.int64)
    for v in visit.tolist():
        if match[v] >= 0:
            continue
        best = -1
        best_key = None
        for p in range(ptr[v], ptr[v + 1]):
            u = idx[p]
            if match[u] >= 0:
                continue
            key = (-ew[p], abs(u - v), u)
            if best_key is None or key < best_key:
                best = u
                best_key = key
        if best >= 0:
            match[v] = best
            match[best] = v
        else:
            match[v] = v
    return match


def _contract(g: AdjacencyGraph, f2c: np.ndarray, m: int) -> AdjacencyGraph:
    src = np.repeat(np.arange(g.n_nodes, dtype=np.int64), g.degrees())
    cu = f2c[src]
    cv = f2c[g.adj_idx]
    keep = cu != cv
    node_weight = np.zeros(m, dtype=np.int64)
    np.add.at(node_weight, f2c, g.node_weight)
    return _graph_from_edges(m, cu[keep], cv[keep], g.edge_weight[keep], node_weight)


def _members_of(f2c: np.ndarray, m: int) -> list:
    order = np.argsort(f2c, kind="stable")
    bounds = np.searchsorted(f2c[order], np.arange(m + 1))
    return [order[bounds[c]:bounds[c + 1]] for c in range(m)]


def _relabel_graph(g: AdjacencyGraph, perm) -> AdjacencyGraph:
    """Renumber nodes so that node v becomes perm.fwd[v]."""
    src = np.repeat(np.arange(g.n_nodes, dtype=np.int64), g.degrees())
    return _graph_from_edges(g.n_nodes, perm.fwd[src], perm.fwd[g.adj_idx],
                             g.edge_weight, g.node_weight[perm.inv])


def coarsen(g: AdjacencyGraph, target_weight: int) -> tuple:
    """Coarsen by repeated heavy-edge matching.

    Rounds continue until each coarse node absorbs ``target_weight`` input
    nodes on average, or a round shrinks the node count by less than 5%.
    Isolated nodes pass through as singletons.

    Returns
    -------
    (AdjacencyGraph, CoarseningMap)
        The coarse graph and the partition of the input graph's nodes.
        Node weights aggregate; the target counts nodes of the graph given
        here, so coarsening a graph of super-rows is driven by super-row
        counts rather than original row counts.
    """
    if target_weight < 1:
        raise ValueError("target_weight must be at least 1")
    total = g.n_nodes
    cur = g
    f2c = np.arange(total, dtype=np.int64)
    first_round = True
    while cur.n_nodes and total / cur.n_nodes < target_weight:
        if not first_round:
            # renumber into band order between rounds so index-based
            # tie-breaks keep later matchings aligned with the band
            band = weighted_bandwidth_order(cur)
            cur = _relabel_graph(cur, band)
            f2c = band.fwd[f2c]
        first_round = False
        before = cur.n_nodes
        match = heavy_edge_matching(cur)
        reps = np.minimum(np.arange(before, dtype=np.int64), match)
        uniq, new_ids = np.unique(reps, return_inverse=True)
        m = len(uniq)
        f2c = new_ids[f2c]
        cur = _contract(cur, new_ids, m)
        if before - m < MIN_MATCH_SHRINK * before:
            break
    return cur, CoarseningMap(f2c, _members_of(f2c, cur.n_nodes))


def _bfs_levels(ptr, idx, start, level, stamp):
    """Level structure from start; returns (nodes in BFS order, ecc).

    ``level`` is a scratch int array stamped with ``stamp`` marks."""
    level[start] = stamp
    frontier = [start]
    out = [start]
    depth = 0
    while True:
        nxt = []
        for v in frontier:
            for p in range(ptr[v], ptr[v + 1]):
                u = idx[p]
                if level[u] != stamp:
                    level[u] = stamp
                    nxt.append(u)
        if not nxt:
            return out, depth, frontier
        out.extend(nxt)
        frontier = nxt
        depth += 1


def _pseudo_peripheral(g, ptr, idx, component, keys):
    start = min(component, key=lambda v: keys[v])
    stamp_arr = np.full(g.n_nodes, -1, dtype=np.int64)
    best_node = start
    best_ecc = -1
    stamp = 0
    while True:
        _, ecc, last_level = _bfs_levels(ptr, idx, start, stamp_arr, stamp)
        stamp += 1
        if ecc <= best_ecc:
            return best_node
        best_ecc = ecc
        best_node = start
        start = min(last_level, key=lambda v: keys[v])
        if start == best_node:
            return best_node


def weighted_bandwidth_order(g: AdjacencyGraph) -> Permutation:
    """Weight-aware reverse Cuthill-McKee ordering.

    BFS frontiers are expanded in ascending (degree, node weight, index)
    order from a pseudo-peripheral start node per connected component.
    Components are laid out largest first and the whole order is reversed
    at the end.
    """
    n = g.n_nodes
    ptr = g.adj_ptr.tolist()
    idx = g.adj_idx.tolist()
    deg = g.degrees()
    weight = g.node_weight
    keys = [(int(deg[v]), int(weight[v]), v) for v in range(n)]

    seen = np.zeros(n, dtype=bool)
    components = []
    for root in range(n):
        if seen[root]:
            continue
        comp = [root]
        seen[root] = True
        head = 0
        while head < len(comp):
            v = comp[head]
            head += 1
            for p in range(ptr[v], ptr[v + 1]):
                u = idx[p]
                if not seen[u]:
                    seen[u] = True
                    comp.append(u)
        components.append(comp)
    components.sort(key=lambda c: (-len(c), min(c)))

    order = []
    visited = np.zeros(n, dtype=bool)
    for comp in components:
        start = _pseudo_peripheral(g, ptr, idx, comp, keys)
        visited[start] = True
        order.append(start)
        head = len(order) - 1
        while head < len(order):
            v = order[head]
            head += 1
            fresh = []
            for p in range(ptr[v], ptr[v + 1]):
                u = idx[p]
                if not visited[u]:
                    visited[u] = True
                    fresh.append(u)
            fresh.sort(key=lambda u: keys[u])
            order.extend(fresh)
    order.reverse()
    fwd = np.empty(n, dtype=np.int64)
    fwd[np.asarray(order, dtype=np.int64)] = np.arange(n, dtype=np.int64)
    return Permutation.from_forward(fwd)


def _order_members(ptr, idx, members, in_block, keys, placed_pos):
    """Order one coarse node's members with a seeded BFS.

    The seed is the member adjacent to the earliest already placed node,
    so consecutive blocks join up end to end.  When nothing is placed yet
    (first block, or an isolated component) the member with the fewest
    ties to still unplaced outside nodes wins, which points the block away
    from its successors.  Frontier expansion follows ascending
    (degree, node weight, index), the same rule the coarse ordering uses.
    """
    remaining = set(members)
    out = []
    while remaining:
        best = None
        best_key = None
        for v in remaining:
            anchor = np.inf
            outside_unplaced = 0
            for p in range(ptr[v], ptr[v + 1]):
                u = idx[p]
                if in_block[u]:
                    continue
                pos = placed_pos[u]
                if pos >= 0:
                    if pos < anchor:
                        anchor = pos
                else:
                    outside_unplaced += 1
            cand = (anchor, outside_unplaced, keys[v])
            if best_key is None or cand < best_key:
                best = v
                best_key = cand
        visited_local = {best}
        queue = [best]
        head = 0
        while head < len(queue):
            v = queue[head]
            head += 1
            fresh = []
            for p in range(ptr[v], ptr[v + 1]):
                u = idx[p]
                if in_block[u] and u in remaining and u not in visited_local:
                    visited_local.add(u)
                    fresh.append(u)
            fresh.sort(key=lambda u: keys[u])
            queue.extend(fresh)
        out.extend(queue)
        remaining.difference_update(queue)
    return out


def _expand_level(g: AdjacencyGraph, cmap: CoarseningMap, coarse_seq: list) -> tuple:
    """Translate an ordering of coarse nodes into an ordering of the fine
    graph, keeping each coarse node's members contiguous."""
    n = g.n_nodes
    ptr = g.adj_ptr.tolist()
    idx = g.adj_idx.tolist()
    deg_all = g.degrees()
    weight = g.node_weight
    placed_pos = np.full(n, -1, dtype=np.int64)
    in_block = np.zeros(n, dtype=bool)
    fine_seq = []
    sizes = []
    for c in coarse_seq:
        members = cmap.coarse_members[c].tolist()
        sizes.append(len(members))
        in_block[members] = True
        keys = {v: (int(deg_all[v]), int(weight[v]), v) for v in members}
        ordered = _order_members(ptr, idx, members, in_block, keys, placed_pos)
        for v in ordered:
            placed_pos[v] = len(fine_seq)
            fine_seq.append(v)
        in_block[members] = False
    return fine_seq, sizes


def band_k(a: CsrMatrix, k: int, level_targets) -> BandKResult:
    """Multilevel bandwidth-limiting reordering with super-row derivation.

    Parameters
    ----------
    a : CsrMatrix
        Square matrix to reorder.
    k : int
        2 or 3; the number of hierarchy levels of the target format.
    level_targets : sequence of k-1 ints
        Mean group-size targets: rows per super-row, then (k = 3 only)
        super-rows per super-super-row.  Realized sizes are approximate.

    Returns
    -------
    BandKResult
        Permutation plus per-level group sizes, ready for packing.
    """
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    targets = list(level_targets)
    if len(targets) != k - 1:
        raise ValueError(f"expected {k - 1} level targets, got {len(targets)}")
    if a.n_rows == 0:
        raise ValueError("cannot reorder an empty matrix")
    g0 = build_graph(a)
    # bootstrap band order: matching tie-breaks read node indices, so the
    # very first round needs band-coherent labels no matter how the input
    # arrived; composed back out at the end
    base = weighted_bandwidth_order(g0)
    g0 = _relabel_graph(g0, base)
    graphs = [g0]
    maps = []
    for t in targets:
        coarse, cmap = coarsen(graphs[-1], t)
        # band-order every level as it is built; the next level's matching
        # then sees band-coherent indices, and expansion walks the final
        # level left to right
        order = weighted_bandwidth_order(coarse)
        coarse = _relabel_graph(coarse, order)
        cmap = CoarseningMap(
            order.fwd[cmap.fine_to_coarse],
            [cmap.coarse_members[c] for c in order.inv.tolist()])
        graphs.append(coarse)
        maps.append(cmap)
    seq = list(range(graphs[-1].n_nodes))
    collected = []
    for level in range(k - 1, 0, -1):
        seq, sizes = _expand_level(graphs[level - 1], maps[level - 1], seq)
        collected.append(sizes)
    fwd = np.empty(a.n_rows, dtype=np.int64)
    orig = base.inv[np.asarray(seq, dtype=np.int64)]
    fwd[orig] = np.arange(a.n_rows, dtype=np.int64)
    perm = Permutation.from_forward(fwd)
    return BandKResult(perm, list(reversed(collected)))
