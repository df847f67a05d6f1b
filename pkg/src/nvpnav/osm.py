"""Road graph ingestion, global A* planning and waypoint sequencing."""
from __future__ import annotations

import heapq
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DanglingReference, NoPath, ParseError
from .geometry import GeoPoint, PoseEstimate, geo_to_local, local_to_geo, mahalanobis_distance


def _link(a: int, b: int) -> tuple:
    return (a, b) if a < b else (b, a)


class RoadGraph:
    """Undirected road network. Node positions are cached in a local metric frame."""

    def __init__(self, nodes: dict, links: Iterable, origin: Optional[GeoPoint] = None,
                 positions: Optional[dict] = None):
        self.nodes = dict(nodes)
        if origin is None:
            if not self.nodes:
                raise ValueError("an empty graph needs an explicit origin")
            origin = self.nodes[min(self.nodes)]
        self.origin = origin
        linkset = set()
        for a, b in links:
            if a == b:
                raise ValueError(f"self-link on node {a}")
            for n in (a, b):
                if n not in self.nodes:
                    raise DanglingReference(f"link references unknown node {n}")
            linkset.add(_link(a, b))
        self.links = frozenset(linkset)
        if positions is None:
            positions = {i: geo_to_local(origin, g) for i, g in self.nodes.items()}
        self.positions = {i: np.array(positions[i], dtype=float) for i in self.nodes}
        self.adjacency = {i: [] for i in self.nodes}
        for a, b in sorted(self.links):
            self.adjacency[a].append(b)
            self.adjacency[b].append(a)

    @classmethod
    def from_local(cls, positions: dict, links: Iterable, origin: GeoPoint) -> "RoadGraph":
        nodes = {i: local_to_geo(origin, p) for i, p in positions.items()}
        return cls(nodes, links, origin, positions=positions)

    def degree(self, n: int) -> int:
        return len(self.adjacency[n])

    def length(self, a: int, b: int) -> float:
        return float(np.hypot(*(self.positions[a] - self.positions[b])))

    def nearest_node(self, p) -> int:
        best, best_d = None, math.inf
        for i in sorted(self.nodes):  # ties -> smallest id
            d = float(np.hypot(*(self.positions[i] - np.asarray(p, dtype=float))))
            if d < best_d:
                best, best_d = i, d
        return best

    def components(self) -> list:
        seen, comps = set(), []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp, stack = set(), [start]
            while stack:
                n = stack.pop()
                if n in comp:
                    continue
                comp.add(n)
                stack.extend(self.adjacency[n])
            seen |= comp
            comps.append(comp)
        return comps

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return f"RoadGraph({len(self.nodes)} nodes, {len(self.links)} links)"


@dataclass(frozen=True)
class GlobalPath:
    node_ids: tuple
    points: np.ndarray  # (n, 2) local frame

    def __len__(self):
        return len(self.node_ids)


def parse_osm(xml_text: str, origin: Optional[GeoPoint] = None) -> RoadGraph:
    """Build a RoadGraph from an OSM XML document (nodes + ways only)."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise ParseError(f"malformed OSM XML: {e}") from e
    nodes, order = {}, []
    for el in root.iter("node"):
        try:
            nid = int(el.attrib["id"])
            nodes[nid] = GeoPoint(float(el.attrib["lat"]), float(el.attrib["lon"]))
        except (KeyError, ValueError) as e:
            raise ParseError(f"bad node element {el.attrib}: {e}") from e
        order.append(nid)
    links, used = [], set()
    for way in root.iter("way"):
        refs = []
        for nd in way.iter("nd"):
            try:
                refs.append(int(nd.attrib["ref"]))
            except (KeyError, ValueError) as e:
                raise ParseError(f"bad nd element {nd.attrib}") from e
        for r in refs:
            if r not in nodes:
                raise DanglingReference(f"way {way.attrib.get('id', '?')} references unknown node {r}")
        for a, b in zip(refs[:-1], refs[1:]):
            if a != b:
                links.append((a, b))
                used.update((a, b))
    kept = {i: nodes[i] for i in order if i in used}
    if origin is None and kept:
        origin = kept[next(i for i in order if i in used)]
    return RoadGraph(kept, links, origin)


def parse_graph_text(text: str, origin: Optional[GeoPoint] = None) -> RoadGraph:
    """Parse the line format ``N <id> <lat> <lon>`` / ``L <a> <b>``."""
    nodes, order, links = {}, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "N" and len(tok) == 4:
                nid = int(tok[1])
                nodes[nid] = GeoPoint(float(tok[2]), float(tok[3]))
                order.append(nid)
            elif tok[0] == "L" and len(tok) == 3:
                links.append((int(tok[1]), int(tok[2])))
            else:
                raise ParseError(f"line {lineno}: unrecognised record {line!r}")
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"line {lineno}: {e}") from e
    for a, b in links:
        for n in (a, b):
            if n not in nodes:
                raise DanglingReference(f"link {a}-{b} references unknown node {n}")
    if origin is None and order:
        origin = nodes[order[0]]
    return RoadGraph(nodes, links, origin)


def format_graph_text(g: RoadGraph) -> str:
    lines = [f"N {i} {g.nodes[i].lat:.10f} {g.nodes[i].lon:.10f}" for i in sorted(g.nodes)]
    lines += [f"L {a} {b}" for a, b in sorted(g.links)]
    return "\n".join(lines) + "\n"


def subsample_graph(g: RoadGraph, min_spacing: float) -> RoadGraph:
    """Thin out degree-2 chains so kept chain nodes are at least ``min_spacing`` apart.

    Junctions (degree != 2) and chain endpoints are always kept. Interior nodes
    are re-added where fusing links would create a self-link or a duplicate.
    """
    if min_spacing < 0:
        raise ValueError("min_spacing must be >= 0")
    anchors = {n for n in g.nodes if g.degree(n) != 2}
    visited = set()
    direct, chains = set(), []

    def walk(start, first):
        chain, prev, cur = [], start, first
        while cur not in anchors:
            chain.append(cur)
            visited.add(cur)
            nxt = [m for m in g.adjacency[cur] if m != prev]
            prev, cur = cur, nxt[0]
        return chain, cur

    for a in sorted(anchors):
        for first in g.adjacency[a]:
            if first in anchors:
                direct.add(_link(a, first))
            elif first not in visited:
                chain, end = walk(a, first)
                chains.append((a, chain, end))
    for n in sorted(g.nodes):
        if n not in visited and n not in anchors:
            anchors.add(n)  # isolated cycle: its smallest id stands in as the endpoint
            chains.append((n, *walk(n, g.adjacency[n][0])))

    links, removed = set(direct), set()
    for start, chain, end in chains:
        kept, last = [], start
        for n in chain:
            if g.length(last, n) >= min_spacing:
                kept.append(n)
                last = n

        def fused(interior):
            seq = [start] + interior + [end]
            return [_link(a, b) for a, b in zip(seq[:-1], seq[1:])]

        candidate = fused(kept)
        if len(set(candidate)) < len(candidate) or any(a == b for a, b in candidate) \
                or links & set(candidate):
            kept = chain  # fall back to the untouched chain
            candidate = fused(kept)
        links.update(candidate)
        removed.update(n for n in chain if n not in kept)

    keep = {i: g.nodes[i] for i in g.nodes if i not in removed}
    pos = {i: g.positions[i] for i in keep}
    return RoadGraph(keep, links, g.origin, positions=pos)


def _nearest_or_raise(g: RoadGraph, p) -> int:
    if not g.nodes:
        raise NoPath("graph is empty")
    return g.nearest_node(p)


def plan_global(g: RoadGraph, vehicle, goal) -> GlobalPath:
    """A* over the road graph between the nodes nearest ``vehicle`` and ``goal``."""
    start = _nearest_or_raise(g, vehicle)
    end = _nearest_or_raise(g, goal)
    target = g.positions[end]

    def h(n):
        return float(np.hypot(*(g.positions[n] - target)))

    open_heap = [(h(start), 0.0, start)]
    cost = {start: 0.0}
    parent = {start: None}
    closed = set()
    while open_heap:
        _, c, n = heapq.heappop(open_heap)
        if n in closed:
            continue
        if n == end:
            break
        closed.add(n)
        for m in g.adjacency[n]:
            nc = c + g.length(n, m)
            if nc < cost.get(m, math.inf):
                cost[m] = nc
                parent[m] = n
                heapq.heappush(open_heap, (nc + h(m), nc, m))
    if end not in parent:
        raise NoPath(f"nodes {start} and {end} are not connected")
    ids = [end]
    while parent[ids[-1]] is not None:
        ids.append(parent[ids[-1]])
    ids.reverse()
    return GlobalPath(tuple(ids), np.array([g.positions[i] for i in ids]))


def path_cost(g: RoadGraph, ids) -> float:
    return sum(g.length(a, b) for a, b in zip(ids[:-1], ids[1:]))


@dataclass
class GoalSequencer:
    """Feeds waypoints of a global path one by one, popping them on arrival."""

    path: GlobalPath
    md_threshold: float = 1.5
    remaining: list = field(init=False)

    def __post_init__(self):
        if len(self.path) == 0:
            raise ValueError("GoalSequencer needs a nonempty path")
        if not self.md_threshold > 0:
            raise ValueError("md_threshold must be > 0")
        self.remaining = [np.array(p, dtype=float) for p in self.path.points]
        self.popped = 0

    def current_goal(self, est: PoseEstimate):
        """Front waypoint not yet reached, or ``None`` once the buffer is empty."""
        while self.remaining and mahalanobis_distance(self.remaining[0], est) < self.md_threshold:
            self.remaining.pop(0)
            self.popped += 1
        if not self.remaining:
            return None
        return self.remaining[0].copy()

    @property
    def finished(self) -> bool:
        return not self.remaining
