"""Graph families and structural queries.

Generators cover the tree families under study (preferential attachment in
both its sequential and Poisson-clock formulations, balanced M-ary trees)
plus small baseline topologies (line, star, complete graph).  Structural
queries compute the quantities the analysis needs: unique tree paths with
degree products, diameters, descendant counts, and the census of small
subtrees hanging off high-degree parents.
"""

import hashlib
import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng as rngmod
from .errors import InvalidParameterError, ParseError, UnsupportedOperationError

_PRODUCT_SAT = 1 << 62  # degree products saturate here; beyond any tested X


class Graph:
    """Immutable undirected graph with sorted adjacency lists.

    ``kind`` is one of ``"tree"``, ``"complete"``, ``"other"``.  Tree graphs
    are validated to be connected with exactly n-1 edges.
    """

    __slots__ = ("n", "adj", "kind", "_csr", "_hash", "_diameter")

    def __init__(self, n, edges, kind="other", validate=True):
        if n < 1:
            raise InvalidParameterError("graph needs at least one node")
        adj = [[] for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise InvalidParameterError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParameterError(f"edge ({u},{v}) out of range")
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
            for a, b in zip(lst, lst[1:]):
                if a == b:
                    raise InvalidParameterError("duplicate edge")
        self.n = n
        self.adj = adj
        self.kind = kind
        self._csr = None
        self._hash = None
        self._diameter = None
        if validate and kind == "tree":
            m = sum(len(a) for a in adj) // 2
            if m != n - 1 or not self.is_connected():
                raise InvalidParameterError("tree must be connected with n-1 edges")

    @property
    def m(self):
        return sum(len(a) for a in self.adj) // 2

    def degree(self, v):
        return len(self.adj[v])

    def degrees(self):
        return np.array([len(a) for a in self.adj], dtype=np.int64)

    def edges(self):
        for u in range(self.n):
            for v in self.adj[u]:
                if u < v:
                    yield (u, v)

    def csr(self):
        """(indptr, indices) adjacency in CSR form, cached."""
        if self._csr is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            for v in range(self.n):
                indptr[v + 1] = indptr[v] + len(self.adj[v])
            indices = np.empty(indptr[-1], dtype=np.int64)
            for v in range(self.n):
                indices[indptr[v] : indptr[v + 1]] = self.adj[v]
            self._csr = (indptr, indices)
        return self._csr

    def is_connected(self):
        seen = bytearray(self.n)
        stack = [0]
        seen[0] = 1
        count = 1
        while stack:
            u = stack.pop()
            for w in self.adj[u]:
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    stack.append(w)
        return count == self.n

    def content_hash(self):
        """Short stable hash of (n, kind, edge list); used in trace headers."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(f"{self.n}:{self.kind}".encode())
            for u, v in self.edges():
                h.update(f":{u}-{v}".encode())
            self._hash = h.hexdigest()[:16]
        return self._hash

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and self.adj == other.adj
        )

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, kind={self.kind!r})"


@dataclass
class Rooting:
    """A rooting of a tree: parent pointers plus derived structure."""

    root: int
    parent: np.ndarray        # parent[v], -1 at the root
    children: list            # children[v] in index order
    depth: np.ndarray         # distance from the root
    order: np.ndarray         # nodes in BFS order from the root


@dataclass
class PathQuery:
    """The unique u-v path in a tree with its length and degree product."""

    u: int
    v: int
    vertices: list
    length: int
    degree_product: int


# ---------------------------------------------------------------------------
# generators


def gen_preferential_attachment(n, seed):
    """Preferential attachment tree with n arrivals plus the special node v_0.

    v_1 attaches to v_0; each later arrival v_{i+1} attaches to v_j
    (1 <= j <= i) with probability deg_i(v_j)/(2i-1).  v_0 never receives
    further edges, but its edge does count towards v_1's degree.  Node ids
    are arrival order, so the tree has n+1 nodes.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    gen = rngmod.stream(seed, rngmod.GRAPH)
    edges = [(0, 1)]
    # ball[i] holds a node id once per unit of degree, excluding v_0,
    # so |ball| = 2i-1 right before v_{i+1} arrives.
    ball = np.empty(2 * n, dtype=np.int64)
    ball[0] = 1
    size = 1
    picks = gen.random(max(n - 1, 1))
    for i in range(1, n):
        j = ball[int(picks[i - 1] * size)]
        new = i + 1
        edges.append((int(j), new))
        ball[size] = j
        ball[size + 1] = new
        size += 2
    return Graph(n + 1, edges, kind="tree")


def gen_pa_clock(n, seed):
    """Preferential attachment tree via the continuous-time clock process.

    Each node runs an exponential clock at rate equal to its current degree
    (rate 1 at birth, counting the v_0 edge for v_1); when a clock ticks its
    owner gains a child and restarts at the incremented rate.  Arrival order
    gives node ids, and v_0 is materialized exactly as in
    :func:`gen_preferential_attachment` so shapes are comparable.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    gen = rngmod.stream(seed, rngmod.GRAPH)
    edges = [(0, 1)]
    rate = {1: 1}
    counter = 0
    heap = [(gen.exponential(1.0), counter, 1)]
    next_id = 2
    while next_id <= n:
        tick, _, owner = heapq.heappop(heap)
        child = next_id
        next_id += 1
        edges.append((owner, child))
        rate[child] = 1
        counter += 1
        heapq.heappush(heap, (tick + gen.exponential(1.0), counter, child))
        rate[owner] += 1
        counter += 1
        heapq.heappush(
            heap, (tick + gen.exponential(1.0 / rate[owner]), counter, owner)
        )
    return Graph(n + 1, edges, kind="tree")


def gen_random_recursive(n, seed):
    """Random recursive tree: each arrival attaches uniformly to an earlier node."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    gen = rngmod.stream(seed, rngmod.GRAPH)
    edges = [(int(gen.integers(0, i)), i) for i in range(1, n)]
    return Graph(n, edges, kind="tree")


def gen_balanced_mary(M, depth, seed=None):
    """Balanced M-ary tree of the given depth, BFS-numbered with root 0."""
    if M < 1 or depth < 0:
        raise InvalidParameterError("need M >= 1 and depth >= 0")
    if M == 1:
        n = depth + 1
    else:
        n = (M ** (depth + 1) - 1) // (M - 1)
    edges = []
    # BFS numbering: children of node v are M*v+1 .. M*v+M
    for v in range(n):
        for c in range(M * v + 1, M * v + M + 1):
            if c < n:
                edges.append((v, c))
    return Graph(n, edges, kind="tree")


def gen_baseline(kind, n):
    """Line, star (center 0) or complete graph on n nodes."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if kind == "line":
        return Graph(n, [(i, i + 1) for i in range(n - 1)], kind="tree")
    if kind == "star":
        return Graph(n, [(0, i) for i in range(1, n)], kind="tree")
    if kind == "complete":
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        return Graph(n, edges, kind="complete")
    raise InvalidParameterError(f"unknown baseline kind {kind!r}")


# ---------------------------------------------------------------------------
# structural queries


def _require_tree(g):
    if g.kind != "tree":
        raise UnsupportedOperationError("operation defined on trees only")


def root_at(g, root):
    """Root the tree at ``root`` and return the :class:`Rooting`."""
    _require_tree(g)
    n = g.n
    parent = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    children = [[] for _ in range(n)]
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        u = int(order[head])
        head += 1
        for w in g.adj[u]:
            if w != parent[u]:
                parent[w] = u
                depth[w] = depth[u] + 1
                children[u].append(w)
                order[tail] = w
                tail += 1
    return Rooting(root=root, parent=parent, children=children, depth=depth, order=order)


def path(g, u, v):
    """The unique path between u and v with length and exact degree product."""
    _require_tree(g)
    n = g.n
    if not (0 <= u < n and 0 <= v < n):
        raise InvalidParameterError("node out of range")
    prev = {u: None}
    stack = [u]
    while v not in prev:
        x = stack.pop()
        for w in g.adj[x]:
            if w not in prev:
                prev[w] = x
                stack.append(w)
    vertices = [v]
    while vertices[-1] != u:
        vertices.append(prev[vertices[-1]])
    vertices.reverse()
    product = 1
    for w in vertices:
        product *= g.degree(w)
    return PathQuery(
        u=u, v=v, vertices=vertices, length=len(vertices) - 1, degree_product=product
    )


def _bfs_farthest(g, src):
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[src] = 0
    queue = [src]
    far, fard = src, 0
    for u in queue:
        for w in g.adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                if dist[w] > fard:
                    far, fard = w, dist[w]
                queue.append(w)
    return far, fard, dist


def diameter(g):
    """Exact diameter: double BFS on trees, all-sources BFS otherwise."""
    if not g.is_connected():
        raise UnsupportedOperationError("diameter of a disconnected graph")
    if g.kind == "tree":
        far, _, _ = _bfs_farthest(g, 0)
        _, d, _ = _bfs_farthest(g, far)
        return int(d)
    best = 0
    for s in range(g.n):
        _, d, _ = _bfs_farthest(g, s)
        best = max(best, int(d))
    return best


@njit(cache=True)
def _count_pairs_kernel(indptr, indices, deg, thresholds):
    """Count ordered pairs (u,v), u != v, with path degree product <= each threshold."""
    n = indptr.shape[0] - 1
    counts = np.zeros(thresholds.shape[0], dtype=np.int64)
    stack_node = np.empty(n, dtype=np.int64)
    stack_from = np.empty(n, dtype=np.int64)
    stack_prod = np.empty(n, dtype=np.int64)
    sat = _PRODUCT_SAT
    for u in range(n):
        top = 0
        stack_node[top] = u
        stack_from[top] = -1
        stack_prod[top] = deg[u]
        top += 1
        while top > 0:
            top -= 1
            x = stack_node[top]
            frm = stack_from[top]
            prod = stack_prod[top]
            if x != u:
                for i in range(thresholds.shape[0]):
                    if prod <= thresholds[i]:
                        counts[i] += 1
            for k in range(indptr[x], indptr[x + 1]):
                w = indices[k]
                if w != frm:
                    d = deg[w]
                    if prod > sat // d:
                        p2 = sat
                    else:
                        p2 = prod * d
                    stack_node[top] = w
                    stack_from[top] = x
                    stack_prod[top] = p2
                    top += 1
    return counts


def count_low_product_pairs(g, X):
    """Number of unordered pairs whose path degree product is <= X."""
    _require_tree(g)
    indptr, indices = g.csr()
    thr = np.array([min(math.floor(X), _PRODUCT_SAT - 1)], dtype=np.int64)
    if X < 1:
        return 0
    counts = _count_pairs_kernel(indptr, indices, g.degrees(), thr)
    return int(counts[0]) // 2


def count_low_product_pairs_many(g, xs):
    """Vector version of :func:`count_low_product_pairs` for several X at once."""
    _require_tree(g)
    indptr, indices = g.csr()
    thr = np.array(
        [min(math.floor(x), _PRODUCT_SAT - 1) for x in xs], dtype=np.int64
    )
    counts = _count_pairs_kernel(indptr, indices, g.degrees(), thr)
    return [int(c) // 2 if x >= 1 else 0 for c, x in zip(counts, xs)]


def subtree_stats(g, rooting):
    """Per-node (proper descendant count, max depth below) arrays."""
    n = g.n
    desc = np.zeros(n, dtype=np.int64)
    below = np.zeros(n, dtype=np.int64)
    for u in rooting.order[::-1]:
        for c in rooting.children[u]:
            desc[u] += desc[c] + 1
            below[u] = max(below[u], below[c] + 1)
    return desc, below


def classify_xy_leaf(g, rooting, v):
    """(X, Y) for node v: proper descendants and longest downward path."""
    desc, below = subtree_stats(g, rooting)
    return int(desc[v]), int(below[v])


def good_subtree_census(g, rooting, size_cap, depth_cap, parent_degree_floor):
    """Roots of small, shallow subtrees whose parent has high degree.

    Returns (roots, covered) where ``covered`` is the number of distinct
    nodes contained in the union of the returned subtrees.
    """
    _require_tree(g)
    desc, below = subtree_stats(g, rooting)
    roots = []
    for v in range(g.n):
        p = rooting.parent[v]
        if p < 0:
            continue
        if (
            desc[v] <= size_cap
            and below[v] <= depth_cap
            and g.degree(int(p)) >= parent_degree_floor
        ):
            roots.append(v)
    marked = np.zeros(g.n, dtype=bool)
    marked[roots] = True
    covered = 0
    for u in rooting.order:
        p = rooting.parent[u]
        if p >= 0 and marked[p]:
            marked[u] = True
    return roots, int(marked.sum())


# ---------------------------------------------------------------------------
# file formats


def write_edge_list(g, fileobj):
    """Edge list: one '<u> <v>' pair per line, 0-indexed."""
    fileobj.write(f"# n={g.n} kind={g.kind}\n")
    for u, v in g.edges():
        fileobj.write(f"{u} {v}\n")


def read_edge_list(fileobj):
    """Parse an edge list written by :func:`write_edge_list`.

    A bare edge list without the header is accepted too; node count is then
    inferred from the largest index.
    """
    n = None
    kind = "other"
    edges = []
    offset = 0
    for line in fileobj:
        raw = line if isinstance(line, str) else line.decode()
        stripped = raw.strip()
        if stripped.startswith("#"):
            for tok in stripped[1:].split():
                if tok.startswith("n="):
                    n = int(tok[2:])
                elif tok.startswith("kind="):
                    kind = tok[5:]
        elif stripped:
            parts = stripped.split()
            if len(parts) != 2:
                raise ParseError("expected two node indices per line", offset=offset)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError("non-integer node index", offset=offset) from None
            edges.append((u, v))
        offset += len(raw.encode() if isinstance(raw, str) else raw)
    if n is None:
        n = max((max(u, v) for u, v in edges), default=0) + 1
    try:
        return Graph(n, edges, kind=kind)
    except InvalidParameterError as exc:
        raise ParseError(str(exc), offset=0) from exc


def write_dot(g, fileobj):
    fileobj.write("graph G {\n")
    for u, v in g.edges():
        fileobj.write(f"  {u} -- {v};\n")
    fileobj.write("}\n")


def read_dot(fileobj):
    """Minimal DOT reader for the subset :func:`write_dot` emits."""
    edges = []
    maxnode = -1
    offset = 0
    for line in fileobj:
        stripped = line.strip()
        if "--" in stripped:
            left, _, right = stripped.partition("--")
            try:
                u = int(left.strip())
                v = int(right.strip().rstrip(";"))
            except ValueError:
                raise ParseError("malformed DOT edge", offset=offset) from None
            edges.append((u, v))
            maxnode = max(maxnode, u, v)
        offset += len(line.encode())
    n = maxnode + 1 if maxnode >= 0 else 1
    kind = "tree" if len(edges) == n - 1 else "other"
    try:
        return Graph(n, edges, kind=kind, validate=False)
    except InvalidParameterError as exc:
        raise ParseError(str(exc), offset=0) from exc
