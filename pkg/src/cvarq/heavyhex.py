"""Heavy-hex lattices, their 3-edge-coloring, and random higher-order spin
glass instances on them.

The lattice is bipartite with maximum degree 3, so by Koenig's line-coloring
theorem its edges split into 3 classes of non-overlapping CNOTs.  The unique
bipartition V = V2 | V3 puts every degree-3 vertex in V3 and leaves V2 with
degree <= 2; the degree-2 subset W of V2 hosts one cubic term each.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from cvarq.errors import ValidationError

Edge = tuple[int, int]


def heavy_hex_lattice(rows: int, row_len: int) -> tuple[int, list[Edge]]:
    """Heavy-hex lattice with ``rows`` qubit rows of length ``row_len``.

    Follows the 127-qubit Eagle layout: the first row drops its last column,
    the last row drops its first, and connector rows between qubit rows
    alternate column offsets 0 and 2 with spacing 4.  The preset
    heavy_hex_lattice(7, 15) has 127 vertices and 144 edges.
    """
    if rows < 2 or row_len < 3:
        raise ValidationError("lattice needs rows >= 2 and row_len >= 3")
    cols_of_row = []
    for r in range(rows):
        lo = 1 if r == rows - 1 else 0
        hi = row_len - 1 if r == 0 else row_len
        cols_of_row.append(list(range(lo, hi)))

    ids: dict[tuple[str, int, int], int] = {}
    nxt = 0
    edges: list[Edge] = []
    for r in range(rows):
        for c in cols_of_row[r]:
            ids[("q", r, c)] = nxt
            nxt += 1
        # horizontal edges
        for c in cols_of_row[r][1:]:
            edges.append((ids[("q", r, c - 1)], ids[("q", r, c)]))
        if r < rows - 1:
            offset = 0 if r % 2 == 0 else 2
            for c in range(offset, row_len, 4):
                ids[("b", r, c)] = nxt
                nxt += 1
    for r in range(rows - 1):
        offset = 0 if r % 2 == 0 else 2
        for c in range(offset, row_len, 4):
            b = ids[("b", r, c)]
            if ("q", r, c) in ids:
                edges.append((ids[("q", r, c)], b))
            if ("q", r + 1, c) in ids:
                edges.append((b, ids[("q", r + 1, c)]))
    return nxt, edges


def bipartition(n: int, edges: list[Edge]) -> tuple[set[int], set[int]]:
    """2-color the graph; V3 is the class holding the max-degree vertices."""
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    color = {}
    for start in range(n):
        if start in color:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in color:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    raise ValidationError("graph is not bipartite")
    deg = {v: len(adj[v]) for v in range(n)}
    max_deg = max(deg.values()) if deg else 0
    cls3 = {color[v] for v in range(n) if deg[v] == max_deg}
    if len(cls3) > 1:
        raise ValidationError("max-degree vertices span both classes")
    c3 = cls3.pop() if cls3 else 1
    v3 = {v for v in range(n) if color[v] == c3}
    v2 = set(range(n)) - v3
    bad = [v for v in v2 if deg[v] > 2]
    if bad:
        raise ValidationError(f"V2 vertices with degree > 2: {bad}")
    return v2, v3


def edge_coloring(n: int, edges: list[Edge]) -> dict[Edge, int]:
    """Proper edge coloring of a bipartite graph with Delta colors.

    Koenig's constructive proof: color edges one by one; when the free colors
    at the endpoints differ, flip the alternating Kempe chain starting at one
    endpoint (in a bipartite graph it can never close back on the other).
    """
    deg = defaultdict(int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    delta = max(deg.values()) if edges else 0
    colors = list(range(delta))
    # at[v][c] = neighbor joined to v by a c-colored edge
    at: dict[int, dict[int, int]] = defaultdict(dict)
    assignment: dict[Edge, int] = {}

    def free(v: int) -> int:
        for c in colors:
            if c not in at[v]:
                return c
        raise AssertionError("no free color; coloring invariant broken")

    def set_color(u: int, v: int, c: int):
        at[u][c] = v
        at[v][c] = u
        assignment[(u, v) if (u, v) in edge_set else (v, u)] = c

    def unset_color(u: int, v: int, c: int):
        del at[u][c]
        del at[v][c]

    edge_set = set(edges)
    for u, v in edges:
        a = free(u)
        b = free(v)
        if a == b:
            set_color(u, v, a)
            continue
        # flip the a/b-alternating path starting at v with an a-edge
        path = []
        cur, want = v, a
        while want in at[cur]:
            nbr = at[cur][want]
            path.append((cur, nbr, want))
            cur, want = nbr, (b if want == a else a)
        for x, y, c in path:
            unset_color(x, y, c)
        for x, y, c in path:
            set_color(x, y, b if c == a else a)
        set_color(u, v, a)
    return assignment


@dataclass(frozen=True)
class HeavyHexInstance:
    n: int
    edges: tuple[Edge, ...]
    v2: frozenset
    v3: frozenset
    w: tuple[int, ...]  # degree-2 vertices of V2, each with its two neighbors
    neighbors: dict  # l in w -> (n1, n2)
    coloring: dict  # edge -> color in {0, 1, 2}
    polynomial: "IsingPolynomial"  # noqa: F821 - defined in cvarq.problems


def heavy_hex_instance(rows: int = 7, row_len: int = 15, seed: int = 0,
                       preset: str | None = None) -> HeavyHexInstance:
    """Random +-1 spin glass with cubic terms on a heavy-hex lattice.

    preset="127" selects the 127-vertex / 144-edge lattice.  Coefficients are
    iid uniform in {+1, -1} on all vertices, all edges, and one cubic term per
    degree-2 vertex of V2 together with its two neighbors.
    """
    from cvarq.problems import IsingPolynomial

    if preset == "127":
        rows, row_len = 7, 15
    elif preset is not None:
        raise ValidationError(f"unknown preset {preset!r}")
    n, edges = heavy_hex_lattice(rows, row_len)
    v2, v3 = bipartition(n, edges)
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    w = tuple(sorted(v for v in v2 if len(adj[v]) == 2))
    neighbors = {l: tuple(sorted(adj[l])) for l in w}
    coloring = edge_coloring(n, edges)
    if max(coloring.values(), default=0) > 2:
        raise ValidationError("edge coloring used more than 3 colors")

    rng = np.random.default_rng(seed)
    pm = lambda: float(rng.choice((-1.0, 1.0)))
    linear = {v: pm() for v in range(n)}
    quadratic = {tuple(sorted(e)): pm() for e in edges}
    cubic = {tuple(sorted((l, *neighbors[l]))): pm() for l in w}
    poly = IsingPolynomial(
        n=n, linear=linear, quadratic=quadratic, cubic=cubic, sense="min"
    )
    return HeavyHexInstance(
        n=n,
        edges=tuple(edges),
        v2=frozenset(v2),
        v3=frozenset(v3),
        w=w,
        neighbors=neighbors,
        coloring=coloring,
        polynomial=poly,
    )
