"""Sequence-wise engine: build the graph breakpoint by breakpoint.

Step 1 draws a plain Kingman tree for the leftmost locus. Each later stage
takes the current partial graph (every branch carries one material column
per breakpoint so far, and the branches labeled with the current stage
index form the local tree of the current locus), then:

  2. draws the next breakpoint locus from its exact conditional law
     (exponential in the integrated density, atom at 1 -> stop);
  3. picks the recombination location uniformly on the current local tree;
  4. detaches the material right of the new locus and traces it upward:
     in free mode it coalesces at rate 1 with each live branch; landing on
     a local-tree branch absorbs it; landing on an older branch makes it
     ride that edge, where it either detaches again (rate = remaining
     recombination mass of the edge's material gap) and returns to free
     mode, or follows the edge through its upper node onto the
     larger-label edge;
  5. once absorbed, splices the new branch segments into the graph,
     extends every material vector by one column, and relabels the new
     local tree by walking up from the leaves.

The finished graph converts into the same Arg event-log form the
back-in-time engine emits: nodes sorted by latitude become events, and
the states are rebuilt from the material columns and checked against an
exact replay of the events.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .arg import Arg
from .backintime import DEFAULT_EVENT_CAP, EventCapExceeded
from .rng import SALT_SPATIAL, replicate_rng
from .state import Coalesce, Lineage, Recombine, State, full_set

INF = math.inf
_BISECT_TOL = 1e-12


class Branch:
    """One graph edge spanning latitudes [lo, hi); hi is +inf for the top."""

    __slots__ = ("id", "lo", "hi", "lower_node", "upper_node", "label", "cols")

    def __init__(self, bid, lo, hi, lower_node, upper_node, label, cols):
        self.id = bid
        self.lo = lo
        self.hi = hi
        self.lower_node = lower_node
        self.upper_node = upper_node
        self.label = label
        self.cols = cols  # list of frozensets, one per breakpoint column

    def __repr__(self):
        return "Branch(%d, [%g,%g), label=%d, cols=%r)" % (
            self.id, self.lo, self.hi, self.label,
            [sorted(c) for c in self.cols],
        )


class GraphNode:
    """An internal vertex: a coalescence ('c') or recombination ('r')."""

    __slots__ = ("id", "time", "kind", "locus", "children", "parents")

    def __init__(self, nid, time, kind, locus, children, parents):
        self.id = nid
        self.time = time
        self.kind = kind
        self.locus = locus
        self.children = children  # branch ids below
        self.parents = parents  # branch ids above


class PartialGraph:
    """The mutable graph a spatial simulation grows stage by stage."""

    __slots__ = (
        "n", "branches", "nodes", "leaves", "top_id", "breakpoints",
        "top_time", "tree_length", "_next_branch", "_next_node",
    )

    def __init__(self, n):
        self.n = n
        self.branches = {}
        self.nodes = {}
        self.leaves = tuple(range(n))
        self.top_id = None
        self.breakpoints = []
        self.top_time = 0.0
        self.tree_length = 0.0
        self._next_branch = 0
        self._next_node = 0

    @property
    def stage(self):
        return len(self.breakpoints)

    def add_branch(self, lo, hi, lower_node, upper_node, label, cols):
        bid = self._next_branch
        self._next_branch += 1
        b = Branch(bid, lo, hi, lower_node, upper_node, label, cols)
        self.branches[bid] = b
        return b

    def add_node(self, time, kind, locus, children, parents):
        nid = self._next_node
        self._next_node += 1
        nd = GraphNode(nid, time, kind, locus, children, parents)
        self.nodes[nid] = nd
        return nd

    def recompute_tree_stats(self):
        self.top_time = max(nd.time for nd in self.nodes.values())
        stage = self.stage
        self.tree_length = math.fsum(
            b.hi - b.lo for b in self.branches.values() if b.label == stage and b.hi < INF
        )

    def split_branch(self, piece, t):
        """Cut a branch at latitude t; the lower part keeps the id.

        Returns the new upper part. Node links of the upper end move to the
        new piece; the caller wires both cut ends to the event node it is
        creating.
        """
        assert piece.lo <= t < piece.hi
        above = self.add_branch(t, piece.hi, None, piece.upper_node, piece.label, list(piece.cols))
        if piece.upper_node is not None:
            upper = self.nodes[piece.upper_node]
            upper.children[upper.children.index(piece.id)] = above.id
        if self.top_id == piece.id:
            self.top_id = above.id
        piece.hi = t
        piece.upper_node = None
        return above

    def check_invariants(self):
        """Structural checks: column conservation, labels, partitions."""
        n_cols = self.stage + 1
        full = full_set(self.n)
        for b in self.branches.values():
            assert len(b.cols) == n_cols, "branch %d has %d columns, want %d" % (b.id, len(b.cols), n_cols)
            nonempty = [l for l, c in enumerate(b.cols) if c]
            assert nonempty, "branch %d carries no material" % b.id
            assert b.label == nonempty[-1], (
                "branch %d label %d != last material column %d" % (b.id, b.label, nonempty[-1])
            )
        for nd in self.nodes.values():
            for col in range(n_cols):
                below = [self.branches[c].cols[col] for c in nd.children]
                above = [self.branches[p].cols[col] for p in nd.parents]
                joined = frozenset().union(*below)
                assert sum(len(c) for c in below) == len(joined), "overlap below node %d" % nd.id
                assert joined == frozenset().union(*above), "column %d not conserved at node %d" % (col, nd.id)
        for leaf in self.leaves:
            b = self.branches[leaf]
            assert b.lo == 0.0 and b.cols[-1] == frozenset({leaf + 1})
            assert b.label == self.stage
        # live columns partition the samples at a few probe latitudes
        times = sorted({nd.time for nd in self.nodes.values()})
        for t in [0.0] + times[:-1]:
            live = [b for b in self.branches.values() if b.lo <= t < b.hi]
            for col in range(n_cols):
                vals = [b.cols[col] for b in live if b.cols[col]]
                assert sum(len(v) for v in vals) == self.n
                assert frozenset().union(*vals) == full
        top = self.branches[self.top_id]
        assert top.hi == INF and top.label == self.stage
        return self


def _pick_pair(rng, k):
    """Uniform unordered pair (i, j), i < j, from k items; one draw."""
    idx = rng.index(k * (k - 1) // 2)
    i = 0
    row = k - 1
    while idx >= row:
        idx -= row
        i += 1
        row -= 1
    return i, i + 1 + idx


def kingman_tree(n, rng):
    """Step 1: the locus-0 coalescent tree as a stage-0 graph."""
    graph = PartialGraph(n)
    for j in range(n):
        graph.add_branch(0.0, INF, None, None, 0, [frozenset({j + 1})])
    live = list(range(n))
    t = 0.0
    while len(live) > 1:
        k = len(live)
        t += rng.exponential(k * (k - 1) / 2.0)
        i, j = _pick_pair(rng, k)
        a, b = graph.branches[live[i]], graph.branches[live[j]]
        merged = graph.add_branch(t, INF, None, None, 0, [a.cols[0] | b.cols[0]])
        node = graph.add_node(t, "c", None, [a.id, b.id], [merged.id])
        a.hi = b.hi = t
        a.upper_node = b.upper_node = node.id
        merged.lower_node = node.id
        live[i] = merged.id
        live.pop(j)
    graph.top_id = live[0]
    graph.recompute_tree_stats()
    return graph


def live_intervals(graph):
    """Latitude intervals with constant live-branch sets, bottom to top.

    Returns (starts, live) where starts[k] opens interval k and live[k] is
    the id-sorted tuple of branches spanning it; the last interval is
    unbounded and holds only the top branch.
    """
    times = sorted({nd.time for nd in graph.nodes.values()})
    starts = [0.0] + times
    live = []
    branches = graph.branches.values()
    for lo in starts:
        live.append(tuple(sorted(b.id for b in branches if b.lo <= lo < b.hi)))
    assert live[-1] == (graph.top_id,)
    return starts, live


def free_rise(graph, intervals, t0, rng):
    """Free mode: rise from latitude t0 until coalescing with a live branch.

    Coalescence happens at rate equal to the live-branch count; the target
    is uniform among the branches live at the coalescence latitude. Exact
    piecewise-exponential inversion over the graph's latitude intervals.
    """
    starts, live = intervals
    budget = -math.log(rng.uniform())  # integrated hazard to spend
    k = bisect_right(starts, t0) - 1
    t = t0
    while True:
        rate = len(live[k])
        end = starts[k + 1] if k + 1 < len(starts) else INF
        span = (end - t) * rate
        if budget <= span:
            t_coal = t + budget / rate
            targets = live[k]
            return t_coal, targets[rng.index(len(targets))]
        budget -= span
        t = end
        k += 1


def sample_next_breakpoint(graph, rho, density, rng):
    """Step 2: the next breakpoint locus, or 1.0 to stop.

    Survival past s is exp(-rho * L * m(s) / 2) with m the density mass
    between the current locus and s; the mass the survival never spends is
    the atom at 1.
    """
    s_cur = graph.breakpoints[-1] if graph.breakpoints else 0.0
    half_rate = 0.5 * rho * graph.tree_length
    if half_rate <= 0.0:
        return 1.0
    u = rng.uniform()
    atom = math.exp(-half_rate * density.mass(s_cur, 1.0))
    if u <= atom:
        return 1.0
    target = -math.log(u)
    lo, hi = s_cur, 1.0
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if half_rate * density.mass(s_cur, mid) < target:
            lo = mid
        else:
            hi = mid
    s_new = 0.5 * (lo + hi)
    if s_new <= s_cur:  # guard the vanishing-ulp corner
        s_new = math.nextafter(s_cur, 1.0)
    return s_new


def sample_recomb_location(graph, rng):
    """Step 3: a uniform point on the current local tree.

    Walks the tree branches (current label, finite span) in id order,
    spending a single U * L draw; returns (branch id, latitude).
    """
    assert graph.tree_length > 0.0
    stage = graph.stage
    u = rng.uniform() * graph.tree_length
    last = None
    for b in graph.branches.values():
        if b.label != stage or b.hi == INF:
            continue
        span = b.hi - b.lo
        if u < span:
            return b.id, b.lo + u
        u -= span
        last = b
    # float slack past the final branch: clamp into it
    assert last is not None and u < 1e-9
    return last.id, last.hi - (last.hi - last.lo) * 1e-12


@dataclass
class Trace:
    """Record of one detached lineage's climb (Steps 4-5)."""

    fork_id: int
    t0: float
    xi: frozenset
    steps: list = field(default_factory=list)  # ordered (kind, time, payload...)
    absorbed_at: float = None
    segments: list = field(default_factory=list)  # free-rise stretches (t_in, t_out)

    def transitions(self):
        """Debug view: the carried material's (time, mode, detail) sequence."""
        out = [{"t": self.t0, "kind": "fork", "branch": self.fork_id}]
        for step in self.steps:
            kind, t = step[0], step[1]
            entry = {"t": t, "kind": kind}
            if kind == "coal":
                entry["branch"] = step[2]
            elif kind == "detach":
                entry["locus"] = step[2]
            out.append(entry)
        return out


def trace_lineage(graph, fork_id, t0, s_new, rho, density, rng):
    """Steps 4-5: carry the material right of s_new until it rejoins the tree.

    The graph is read-only here; the returned Trace is replayed against it
    by accept_breakpoint. Step times never decrease, so the replay is a
    straight left-to-right pass.
    """
    stage = graph.stage
    bps = graph.breakpoints
    trace = Trace(fork_id=fork_id, t0=t0, xi=graph.branches[fork_id].cols[stage])
    intervals = live_intervals(graph)
    mode_free = True
    ride = None  # branch being ridden
    t = t0
    while True:
        if mode_free:
            t_coal, target_id = free_rise(graph, intervals, t, rng)
            trace.segments.append((t, t_coal))
            trace.steps.append(("coal", t_coal, target_id))
            target = graph.branches[target_id]
            t = t_coal
            if target.label == stage:
                trace.absorbed_at = t
                return trace
            mode_free = False
            ride = target
        else:
            # riding an older edge: its material gap spans from the locus
            # after its label's breakpoint to the new locus
            gap_lo = bps[ride.label]
            detach_rate = 0.5 * rho * density.mass(gap_lo, s_new)
            t_detach = t + rng.exponential(detach_rate) if detach_rate > 0.0 else INF
            if t_detach < ride.hi:
                locus = density.sample_truncated(rng, gap_lo, s_new)
                trace.steps.append(("detach", t_detach, locus))
                t = t_detach
                mode_free = True
                ride = None
            else:
                trace.steps.append(("climb", ride.hi))
                node = graph.nodes[ride.upper_node]
                t = node.time
                nxt = max((graph.branches[p] for p in node.parents), key=lambda b: b.label)
                if nxt.label == stage:
                    trace.absorbed_at = t
                    return trace
                ride = nxt


def accept_breakpoint(graph, s_new, trace):
    """Step 6 plus the material update: splice the trace into the graph."""
    stage = graph.stage
    new_label = stage + 1
    xi = trace.xi
    alias = {}  # pre-split piece id -> its upper part, chained per split

    def current_piece(bid):
        while bid in alias:
            bid = alias[bid]
        return graph.branches[bid]

    def split_at(piece, t):
        above = graph.split_branch(piece, t)
        alias[piece.id] = above.id
        return above

    on_path = set()
    # the fork: a recombination node at t0 on the fork branch
    fork_piece = current_piece(trace.fork_id)
    fork_above = split_at(fork_piece, trace.t0)
    seg = graph.add_branch(trace.t0, None, None, None, new_label, [frozenset()] * (stage + 1))
    fork_node = graph.add_node(trace.t0, "r", s_new, [fork_piece.id], [fork_above.id, seg.id])
    fork_piece.upper_node = fork_node.id
    fork_above.lower_node = fork_node.id
    seg.lower_node = fork_node.id
    on_path.add(seg.id)
    ride_piece = None
    tail_start = None
    for step in trace.steps:
        kind, t = step[0], step[1]
        if kind == "coal":
            target = current_piece(step[2])
            above = split_at(target, t)
            node = graph.add_node(t, "c", None, [target.id, seg.id], [above.id])
            target.upper_node = node.id
            seg.hi = t
            seg.upper_node = node.id
            above.lower_node = node.id
            seg = None
            if target.label == stage:
                tail_start = above
                break
            ride_piece = above
        elif kind == "detach":
            locus = step[2]
            above = split_at(ride_piece, t)
            seg = graph.add_branch(t, None, None, None, new_label, [frozenset()] * (stage + 1))
            node = graph.add_node(t, "r", locus, [ride_piece.id], [above.id, seg.id])
            on_path.add(ride_piece.id)
            ride_piece.upper_node = node.id
            above.lower_node = node.id
            seg.lower_node = node.id
            on_path.add(seg.id)
            ride_piece = None
        else:  # climb through the ridden piece's upper node
            on_path.add(ride_piece.id)
            node = graph.nodes[ride_piece.upper_node]
            nxt = max((graph.branches[p] for p in node.parents), key=lambda b: b.label)
            if nxt.label == stage:
                tail_start = nxt
                break
            ride_piece = nxt
    assert tail_start is not None and seg is None, "trace must end absorbed"
    # the tail: the old tree from the absorption point up to the top
    cur = tail_start
    while True:
        assert cur.label == stage, "tail left the local tree"
        on_path.add(cur.id)
        if cur.upper_node is None:
            break
        node = graph.nodes[cur.upper_node]
        parents = node.parents
        if len(parents) == 1:
            cur = graph.branches[parents[0]]
        else:
            cur = max((graph.branches[p] for p in parents), key=lambda b: b.label)
    # extend every material vector by the new column
    for b in graph.branches.values():
        if b.id in on_path:
            b.cols.append(b.cols[stage] | xi)
        elif b.lo >= trace.t0:
            b.cols.append(b.cols[stage] - xi)
        else:
            b.cols.append(b.cols[stage])
    # rebuild the local tree: walk up from each leaf, larger label at forks
    visited = set()
    for leaf in graph.leaves:
        cur = graph.branches[leaf]
        while True:
            if cur.id in visited:
                break
            visited.add(cur.id)
            if cur.upper_node is None:
                assert cur.id == graph.top_id
                break
            node = graph.nodes[cur.upper_node]
            parents = node.parents
            if len(parents) == 1:
                cur = graph.branches[parents[0]]
            else:
                cur = max((graph.branches[p] for p in parents), key=lambda b: b.label)
    carriers = {b.id for b in graph.branches.values() if b.cols[new_label]}
    assert visited == carriers, "tree walk disagrees with the new material column"
    for bid in visited:
        graph.branches[bid].label = new_label
    graph.breakpoints.append(s_new)
    graph.recompute_tree_stats()


def graph_to_arg(graph, config):
    """Convert the finished graph to the event-log form, cross-checked.

    States are rebuilt from the material columns (the breakpoint order
    statistics pin down every lineage function) and compared against an
    exact replay of the emitted events — the two derivations must agree.
    """
    bounds = [0.0] + list(graph.breakpoints) + [1.0]
    funcs = {}
    for b in graph.branches.values():
        funcs[b.id] = Lineage.from_segments(
            (bounds[l], bounds[l + 1], col) for l, col in enumerate(b.cols)
        )
    live = set(graph.leaves)
    state = State.initial(graph.n)
    assert state == State(graph.n, [funcs[i] for i in live])
    times, events, states = [], [], []
    for node in sorted(graph.nodes.values(), key=lambda nd: (nd.time, nd.id)):
        ranked = state.lineages
        if node.kind == "c":
            c1, c2 = node.children
            i, j = sorted((ranked.index(funcs[c1]), ranked.index(funcs[c2])))
            event = Coalesce(i, j)
        else:
            (child,) = node.children
            event = Recombine(ranked.index(funcs[child]), node.locus)
        state = state.apply(event)
        live.difference_update(node.children)
        live.update(node.parents)
        assert state == State(graph.n, [funcs[i] for i in live]), (
            "event replay diverges from the material reconstruction at node %d" % node.id
        )
        times.append(node.time)
        events.append(event)
        states.append(state)
    assert state.is_absorbed
    return Arg(config, times, events, states)


def simulate_spatial(config, rng=None, max_events=DEFAULT_EVENT_CAP, trace_log=None):
    """Run one spatial simulation and return its Arg."""
    if rng is None:
        rng = replicate_rng(config.seed, config.replicate_index, SALT_SPATIAL)
    rho, density = config.rho, config.density
    graph = kingman_tree(config.n_samples, rng)
    while True:
        s_new = sample_next_breakpoint(graph, rho, density, rng)
        if s_new >= 1.0:
            break
        fork_id, t0 = sample_recomb_location(graph, rng)
        trace = trace_lineage(graph, fork_id, t0, s_new, rho, density, rng)
        accept_breakpoint(graph, s_new, trace)
        if trace_log is not None:
            trace_log.append(
                {
                    "stage": graph.stage,
                    "locus": s_new,
                    "xi": sorted(trace.xi),
                    "transitions": trace.transitions(),
                }
            )
        if len(graph.nodes) > max_events:
            raise EventCapExceeded(
                "exceeded %d events (n=%d rho=%g)" % (max_events, config.n_samples, rho)
            )
    return graph_to_arg(graph, config)
