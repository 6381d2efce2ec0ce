"""Brute-force explorer over integer time: the zone engine's oracle.

States carry concrete integer clock values; time advances in unit
steps.  All guards and invariants in the shipped models are non-strict
integer comparisons (closed timed automata), so integral-point
reachability coincides with dense reachability and this explorer is a
sound and complete oracle for discrete-state reachability on reduced
constants.  Any strict clock atom encountered aborts the run.

A horizon bounds the time dimension.  It must exceed every query
constant and every deadline threshold: past the last threshold all
guards are time-independent, so no new discrete configuration needs a
later clock.
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple, Optional

from . import queries as Q
from .kernel import (
    ModelError,
    TIME,
    _expand_binds,
    urgency_blocks_delay,
)


class OracleResult(NamedTuple):
    verdict: str                # 'SATISFIED' | 'VIOLATED' | 'LIMIT'
    states: int                 # distinct (locations, data) configurations
    reachable: frozenset        # (locations, data) set
    limit_reason: Optional[str] = None


def default_horizon(net, query_asts=()):
    """Max of deadline thresholds and query constants, plus latency slack."""
    consts = [d.threshold for d in net.deadlines]
    for q in query_asts:
        consts.extend(_clock_constants(q.root))
    # the blockchain agent bound is the only other clock constant
    return (max(consts) if consts else 0) + _latency_bound(net) + 2


def _latency_bound(net):
    model = net.meta.get("model")
    return model.constants.max_latency if model else 1


def _clock_constants(node):
    if isinstance(node, Q.ClockAtom):
        return [node.const]
    if isinstance(node, (Q.And, Q.Or, Q.Imply)):
        return _clock_constants(node.left) + _clock_constants(node.right)
    if isinstance(node, Q.Not):
        return _clock_constants(node.arg)
    return []


def _holds(op, lhs, rhs):
    if op == "<=":
        return lhs <= rhs
    if op == "==":
        return lhs == rhs
    if op == ">=":
        return lhs >= rhs
    if op == "<":
        # strict upper bounds (the latency windows) digitize exactly:
        # over the integers, value < k is value <= k - 1
        return lhs < rhs
    raise ModelError(
        "strict lower clock bound %r: the discrete oracle requires "
        "non-strict lower bounds" % (op,)
    )


class _Concrete(NamedTuple):
    locs: tuple
    data: object
    time: int
    clocks: tuple      # values aligned with net.clock_owners(data)


def _clock_value(state, owners, key):
    if key == TIME:
        return state.time
    return state.clocks[owners.index(key[1])]


def _atoms_hold(atoms, state, owners, offset=0):
    for (key, op, k) in atoms:
        if not _holds(op, _clock_value(state, owners, key) + offset, k):
            return False
    return True


def _invariants_hold(net, state, owners, offset=0):
    for ai, a in enumerate(net.automata):
        inv = a.locations[state.locs[ai]].invariant
        if inv is not None and not _atoms_hold(inv(state.data), state, owners, offset):
            return False
    return True


def _discrete_successors(net, state):
    """Enabled transitions at this concrete valuation, plus unit delay."""
    owners = tuple(net.clock_owners(state.data))
    out = []

    # unit delay: blocked by urgency, pending thresholds, invariants
    if not urgency_blocks_delay((state.locs, state.data, None), net):
        pending_ok = all(
            state.time + 1 <= d.threshold
            for d in net.deadlines
            if not d.is_set(state.data)
        )
        if pending_ok and _invariants_hold(net, state, owners, offset=1):
            out.append(
                _Concrete(
                    state.locs, state.data, state.time + 1,
                    tuple(c + 1 for c in state.clocks),
                )
            )

    senders, receivers = {}, {}
    for ai, a in enumerate(net.automata):
        for _ei, e in a.edges_from(state.locs[ai]):
            for binds in _expand_binds(e.select):
                if e.guard is not None and not e.guard(state.data, binds):
                    continue
                if e.clock_guard and not _atoms_hold(
                    e.clock_guard, state, owners
                ):
                    continue
                if e.sync is None:
                    nxt = _apply(net, state, owners, (ai, e, binds), None)
                    if nxt is not None:
                        out.append(nxt)
                else:
                    kind, chan = e.sync
                    side = senders if kind == "!" else receivers
                    side.setdefault(chan, []).append((ai, e, binds))
    for chan in sorted(set(senders) & set(receivers)):
        for s in senders[chan]:
            for r in receivers[chan]:
                if s[0] == r[0]:
                    continue
                nxt = _apply(net, state, owners, s, r)
                if nxt is not None:
                    out.append(nxt)
    return out


def _apply(net, state, owners, sender, receiver):
    ai, edge, binds = sender
    data = edge.update(state.data, dict(binds)) if edge.update else state.data
    locs = list(state.locs)
    locs[ai] = edge.target
    if receiver is not None:
        ra, redge, rbinds = receiver
        if redge.update:
            data = redge.update(data, dict(rbinds))
        locs[ra] = redge.target
    locs = tuple(locs)
    new_owners = tuple(net.clock_owners(data))
    old = dict(zip(owners, state.clocks))
    clocks = tuple(old.get(o, 0) for o in new_owners)
    nxt = _Concrete(locs, data, state.time, clocks)
    if not _invariants_hold(net, nxt, new_owners):
        return None
    return nxt


def explore_discrete(net, query=None, horizon=None, max_states=None,
                     queries=None):
    """BFS over unit-delay and discrete steps up to the horizon.

    `query` is a parsed property; it is evaluated pointwise at every
    reachable concrete state and the first violation stops the run.
    `queries` instead evaluates several properties in one full pass:
    the result carries a per-property verdict list and exploration only
    stops early once every property is violated.  Returns the verdict
    and the projected reachable (locations, data) set.
    """
    multi = list(queries) if queries is not None else None
    all_queries = multi if multi is not None else ([query] if query else [])
    if horizon is None:
        horizon = default_horizon(net, all_queries)
    for q in all_queries:
        for c in _clock_constants(q.root):
            if c >= horizon:
                raise ModelError(
                    "horizon %d must exceed the query constant %d" % (horizon, c)
                )

    init = _Concrete(
        tuple(a.initial for a in net.automata),
        net.initial_data,
        0,
        (0,) * len(net.clock_owners(net.initial_data)),
    )

    def violates(q, state):
        # negated query atoms may be strict; pointwise evaluation is exact
        for conj in Q.violation_region(q, state):
            if all(Q._cmp(state.time, a.op, a.const) for a in conj):
                return True
        return False

    live = dict(enumerate(all_queries))

    def check(state):
        for idx in [i for i, q in live.items() if violates(q, state)]:
            verdicts[idx] = "VIOLATED"
            del live[idx]
        return not live and all_queries

    verdicts = ["SATISFIED"] * len(all_queries)
    seen = {init}
    keys = {(init.locs, init.data)}
    frontier = deque([init])

    def result(verdict, reason=None):
        res = OracleResult(verdict, len(keys), frozenset(keys), reason)
        if multi is not None:
            return res, tuple(verdicts)
        return res

    if all_queries and check(init):
        return result("VIOLATED")
    while frontier:
        cur = frontier.popleft()
        for nxt in _discrete_successors(net, cur):
            if nxt.time > horizon or nxt in seen:
                continue
            seen.add(nxt)
            keys.add((nxt.locs, nxt.data))
            if all_queries and check(nxt):
                return result("VIOLATED")
            if max_states is not None and len(seen) > max_states:
                return result("LIMIT", "state budget exhausted")
            frontier.append(nxt)
    overall = "VIOLATED" if "VIOLATED" in verdicts else "SATISFIED"
    return result(overall if all_queries else "SATISFIED")
