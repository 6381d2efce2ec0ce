"""Bounded adversary synthesis.

The adversary is one automaton with a single location: one loop tries
to broadcast any transaction whose input scripts it can satisfy, and
one urgent loop per protocol-specific message action (signature
deliveries).  Its transaction set is the protocol set doubled: for
every spendable protocol output there is one sweep transaction paying
that output to a key the adversary controls.  Sweeps reveal nothing;
their output scripts are irrelevant to the honest parties, and carrying
a secret would only shrink the adversary's options.

Message deliveries synchronize on the urgent channel, so an enabled
delivery happens before time passes; the per-action flag makes each
fire at most once.  Nondeterministic interleaving at a single time
point still covers delivery before or after any same-instant event.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from .kernel import AutomatonTemplate, Edge, Location
from .world import URG_CHAN, Output, TxRecord, can_send, try_to_send


class MessageAction(NamedTuple):
    name: str
    guard: Callable      # (world) -> bool, clock-free
    update: Callable     # (world) -> world


class AdversaryConfig(NamedTuple):
    controlled_party: int      # honest slot whose knowledge is cloned
    adv_key: int               # sweep recipient key
    message_actions: tuple = ()


def derive_adversary_txset(protocol_txs, adv_key):
    """Protocol transactions plus one sweep per spendable output.

    Sweep identifiers continue the protocol block in (transaction,
    output) order; each sweep spends one output to `adv_key` with the
    same value, no timelock, and no reveals.
    """
    txs = list(protocol_txs)
    next_id = len(txs)
    for tx in protocol_txs:
        for oi, out in enumerate(tx.outputs):
            txs.append(
                TxRecord(
                    num=next_id,
                    inputs=((tx.num, oi),),
                    outputs=(Output("key", adv_key, out.value),),
                    timelock=0,
                    timelock_passed=True,
                )
            )
            next_id += 1
    return tuple(txs)


def build_adversary_automaton(cfg, adv_slot, tx_count, nss_table, capacity,
                              sendable=None):
    """Single-state adversary: try-send loop plus urgent message loops.

    `sendable` restricts the try-send select; None means every
    transaction identifier (the generic automaton).
    """
    domain = tuple(sendable) if sendable is not None else tuple(range(tx_count))

    def send_guard(w, binds, slot=adv_slot, nss=nss_table):
        return can_send(w, slot, binds["i"], nss)

    def send_update(w, binds, slot=adv_slot, nss=nss_table):
        return try_to_send(w, slot, binds["i"], nss)

    edges = [
        Edge(
            0, 0, "try_send",
            select=(("i", domain),),
            guard=send_guard,
            update=send_update,
        )
    ]
    for k, action in enumerate(cfg.message_actions):
        def mguard(w, binds, k=k, action=action):
            return (not w.msgs[k]) and action.guard(w)

        def mupdate(w, binds, k=k, action=action):
            return action.update(w).set_msg(k)

        edges.append(
            Edge(
                0, 0, action.name,
                guard=mguard,
                sync=("?", URG_CHAN),
                update=mupdate,
            )
        )
    return AutomatonTemplate("AdversaryTA", [Location("idle", None)], edges)
