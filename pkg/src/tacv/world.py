"""Symbolic block-chain world shared by all contract models.

Transactions live in a fixed table; parties are knowledge records in
the Dolev-Yao style (key and secret possession is binary, signatures
are unforgeable records).  All operations are pure: they take a World
and return a new one.

Transactions generalize the single-input record to multiple inputs and
outputs: spending is tracked per output, and a transaction's status
moves to SPENT once every output is spent.  Signatures carry the
malleability nonce of the signed transaction's input observed at
signing time and are valid only while it matches the input's current
nonce.

Broadcasting a transaction that reveals secrets discloses them to every
party immediately (network eavesdropping happens before confirmation),
and signatures sent between parties are likewise visible to everyone.
"""

from __future__ import annotations

from typing import NamedTuple

from .kernel import (
    AutomatonTemplate,
    DeadlineFlag,
    Edge,
    Location,
    ModelError,
    ModelInvariantError,
)

UNSENT, SENT, CONFIRMED, SPENT, CANCELED = range(5)
STATUS_NAMES = ("UNSENT", "SENT", "CONFIRMED", "SPENT", "CANCELED")

URG_CHAN = "urg_chan"


class WorldConstants(NamedTuple):
    max_latency: int
    prot_timelock: int

    def validate(self):
        if self.max_latency < 1:
            raise ModelError("MAX_LATENCY must be at least 1")
        if self.prot_timelock <= self.max_latency:
            raise ModelError("PROT_TIMELOCK must exceed MAX_LATENCY")
        return self


class SignatureRec(NamedTuple):
    key: int
    tx_num: int
    input_nonce: int


class Output(NamedTuple):
    script_kind: str   # 'key' (standard) or 'nss'
    script_ref: int    # key id or non-standard-script id
    value: int
    spent: bool = False


class NssClause(NamedTuple):
    keys: tuple        # key ids that must all sign
    secrets: tuple     # secret ids that must be known and revealed


class TxRecord(NamedTuple):
    num: int
    inputs: tuple      # ((tx id, output index), ...)
    outputs: tuple     # (Output, ...)
    status: int = UNSENT
    timelock: int = 0
    timelock_passed: bool = False
    nonce: int = 0
    reveals: tuple = ()


class PartyKnowledge(NamedTuple):
    know_key: tuple
    know_secret: tuple
    sigs: tuple = ()   # sorted SignatureRec tuple


class World:
    """Complete discrete state: transaction table, parties, boolean flags.

    Hash and the pending-transaction view are computed lazily and cached:
    intermediate worlds inside compound updates are never hashed.
    """

    __slots__ = ("txs", "parties", "timers", "msgs", "marks", "_hash", "_owners")

    def __init__(self, txs, parties, timers=(), msgs=(), marks=()):
        self.txs = txs
        self.parties = parties
        self.timers = timers
        self.msgs = msgs
        self.marks = marks
        self._hash = None
        self._owners = None

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash(
                (self.txs, self.parties, self.timers, self.msgs, self.marks)
            )
        return h

    def __eq__(self, other):
        return (
            isinstance(other, World)
            and self.txs == other.txs
            and self.parties == other.parties
            and self.timers == other.timers
            and self.msgs == other.msgs
            and self.marks == other.marks
        )

    def __repr__(self):
        live = [
            "%d:%s" % (t.num, STATUS_NAMES[t.status])
            for t in self.txs
            if t.status != UNSENT
        ]
        return "World(%s)" % ", ".join(live)

    def replace_tx(self, idx, tx):
        txs = self.txs[:idx] + (tx,) + self.txs[idx + 1:]
        return World(txs, self.parties, self.timers, self.msgs, self.marks)

    def replace_party(self, idx, p):
        parties = self.parties[:idx] + (p,) + self.parties[idx + 1:]
        return World(self.txs, parties, self.timers, self.msgs, self.marks)

    def set_timer(self, idx):
        timers = self.timers[:idx] + (True,) + self.timers[idx + 1:]
        return World(self.txs, self.parties, timers, self.msgs, self.marks)

    def set_msg(self, idx):
        msgs = self.msgs[:idx] + (True,) + self.msgs[idx + 1:]
        return World(self.txs, self.parties, self.timers, msgs, self.marks)

    def set_mark(self, idx):
        marks = self.marks[:idx] + (True,) + self.marks[idx + 1:]
        return World(self.txs, self.parties, self.timers, self.msgs, marks)


def pending_clock_owners(world):
    """Transactions awaiting confirmation, ascending: the live clock set."""
    owners = world._owners
    if owners is None:
        owners = world._owners = tuple(
            t.num for t in world.txs if t.status == SENT
        )
    return owners


# -- signatures and scripts ---------------------------------------------


def know_signature(world, party, tx, input_index, key):
    """Can `party` produce key's signature for spending input `input_index` of tx?

    True with direct key knowledge, or with a stored signature for this
    transaction and key whose recorded nonce still matches the current
    nonce of the referenced input transaction (malleability check).
    """
    p = world.parties[party]
    if p.know_key[key]:
        return True
    in_tx, _out = tx.inputs[input_index]
    current = world.txs[in_tx].nonce
    for s in p.sigs:
        if s.tx_num == tx.num and s.key == key and s.input_nonce == current:
            return True
    return False


def can_create_input_script(world, party, tx, nss_table):
    """Can `party` satisfy the spending conditions of every input of tx?

    Standard outputs need a signature for the output's key.  A
    non-standard script is satisfied when some clause has all its keys
    signed and all its secrets both known to the party and revealed by
    the spending transaction itself.
    """
    for idx, (in_tx, out_idx) in enumerate(tx.inputs):
        out = world.txs[in_tx].outputs[out_idx]
        if out.script_kind == "key":
            if not know_signature(world, party, tx, idx, out.script_ref):
                return False
        else:
            p = world.parties[party]
            clause_ok = False
            for clause in nss_table[out.script_ref]:
                if all(
                    know_signature(world, party, tx, idx, k)
                    for k in clause.keys
                ) and all(
                    p.know_secret[s] and s in tx.reveals
                    for s in clause.secrets
                ):
                    clause_ok = True
                    break
            if not clause_ok:
                return False
    return True


def ever_confirmed(world, txid):
    """Has the transaction appeared on the chain?  Persistent observation:
    a confirmed transaction that was later redeemed still counts."""
    return world.txs[txid].status in (CONFIRMED, SPENT)


def _inputs_spendable(world, tx):
    # every input must be confirmed with the referenced output unredeemed
    for (in_tx, out_idx) in tx.inputs:
        src = world.txs[in_tx]
        if src.status != CONFIRMED or src.outputs[out_idx].spent:
            return False
    return True


def can_send(world, party, txid, nss_table):
    tx = world.txs[txid]
    return (
        tx.status == UNSENT
        and tx.timelock_passed
        and _inputs_spendable(world, tx)
        and can_create_input_script(world, party, tx, nss_table)
    )


def try_to_send(world, party, txid, nss_table):
    """Broadcast txid if legal; silently a no-op otherwise.

    Broadcasting discloses every secret in the transaction's input
    script to all parties at once: peers see transactions before they
    are confirmed.
    """
    if not can_send(world, party, txid, nss_table):
        return world
    tx = world.txs[txid]
    world = world.replace_tx(txid, tx._replace(status=SENT))
    for sec in tx.reveals:
        world = _disclose_secret(world, sec)
    return world


def _disclose_secret(world, sec):
    for i, p in enumerate(world.parties):
        if not p.know_secret[sec]:
            ks = p.know_secret[:sec] + (True,) + p.know_secret[sec + 1:]
            world = world.replace_party(i, p._replace(know_secret=ks))
    return world


def try_to_confirm(world, txid, nonce):
    """Resolve a waiting transaction: confirm it with the given
    malleability nonce if it is still valid, cancel it otherwise.

    Confirmation marks the referenced input outputs spent; an input
    transaction whose outputs are all spent moves to SPENT.
    """
    tx = world.txs[txid]
    if tx.status != SENT:
        raise ModelError("try_to_confirm on a transaction that is not SENT")
    if tx.timelock_passed and _inputs_spendable(world, tx):
        world = world.replace_tx(txid, tx._replace(status=CONFIRMED, nonce=nonce))
        for (in_tx, out_idx) in tx.inputs:
            src = world.txs[in_tx]
            outs = list(src.outputs)
            outs[out_idx] = outs[out_idx]._replace(spent=True)
            status = SPENT if all(o.spent for o in outs) else src.status
            world = world.replace_tx(
                in_tx, src._replace(outputs=tuple(outs), status=status)
            )
        return world
    return world.replace_tx(txid, tx._replace(status=CANCELED))


# -- holdings ------------------------------------------------------------


def _owns_output(world, party, out):
    return (
        out.script_kind == "key"
        and not out.spent
        and world.parties[party].know_key[out.script_ref]
    )


def count_owners(world, txid, out_idx):
    out = world.txs[txid].outputs[out_idx]
    return sum(
        1 for p in range(len(world.parties)) if _owns_output(world, p, out)
    )


def hold_bitcoins(world, party):
    """Value confirmed on-chain that `party` alone can redeem.

    Counts unspent standard outputs of CONFIRMED transactions whose key
    the party knows and which have exactly one owner; outputs whose key
    leaked to another party protect nobody and count for no one.
    """
    total = 0
    for tx in world.txs:
        if tx.status != CONFIRMED:
            continue
        for oi, out in enumerate(tx.outputs):
            if _owns_output(world, party, out) and count_owners(world, tx.num, oi) == 1:
                total += out.value
    return total


# -- signatures as messages ----------------------------------------------


def make_signature(world, key, txid):
    """Sign txid's first input with `key`, recording the input's current nonce."""
    tx = world.txs[txid]
    in_tx, _ = tx.inputs[0]
    return SignatureRec(key, txid, world.txs[in_tx].nonce)


def add_signature(world, party, sig, capacity):
    p = world.parties[party]
    if sig in p.sigs:
        return world
    if len(p.sigs) >= capacity:
        raise ModelError(
            "signature store overflow for party %d (capacity %d)"
            % (party, capacity)
        )
    sigs = tuple(sorted(p.sigs + (sig,)))
    return world.replace_party(party, p._replace(sigs=sigs))


def broadcast_signature(world, sig, capacity):
    """Deliver a signature to every party: messages travel on an open network."""
    for i in range(len(world.parties)):
        world = add_signature(world, i, sig, capacity)
    return world


# -- invariant checkers (used as exploration assertions) -----------------


def check_value_conservation(world):
    for tx in world.txs:
        if tx.status in (CONFIRMED, SPENT):
            in_val = sum(
                world.txs[i].outputs[oi].value for (i, oi) in tx.inputs
            )
            out_val = sum(o.value for o in tx.outputs)
            if in_val != out_val:
                raise ModelInvariantError(
                    "value not conserved by tx %d" % tx.num
                )


def check_nonce_consistency(world):
    for tx in world.txs:
        if tx.nonce != 0 and tx.status not in (CONFIRMED, SPENT):
            raise ModelInvariantError(
                "tx %d carries a nonce without being confirmed" % tx.num
            )


def check_eavesdropping(world):
    for tx in world.txs:
        if tx.status in (SENT, CONFIRMED, SPENT):
            for sec in tx.reveals:
                for i, p in enumerate(world.parties):
                    if not p.know_secret[sec]:
                        raise ModelInvariantError(
                            "secret %d revealed by tx %d but unknown to party %d"
                            % (sec, tx.num, i)
                        )


_STATUS_STEPS = {
    (UNSENT, SENT),
    (SENT, CONFIRMED),
    (SENT, CANCELED),
    (CONFIRMED, SPENT),
}


def check_status_machine(before, after):
    for old, new in zip(before.txs, after.txs):
        if old.status != new.status and (old.status, new.status) not in _STATUS_STEPS:
            raise ModelInvariantError(
                "illegal status transition %s -> %s on tx %d"
                % (STATUS_NAMES[old.status], STATUS_NAMES[new.status], old.num)
            )
        for oo, no in zip(old.outputs, new.outputs):
            if oo.spent and not no.spent:
                raise ModelInvariantError(
                    "output of tx %d became unspent" % old.num
                )


# -- deadline flags -------------------------------------------------------


def timer_flag(name, index, threshold):
    return DeadlineFlag(
        name,
        threshold,
        lambda w, i=index: w.timers[i],
        lambda w, i=index: w.set_timer(i),
    )


def timelock_flag(txid, threshold):
    def _set(w, t=txid):
        tx = w.txs[t]
        return w.replace_tx(t, tx._replace(timelock_passed=True))

    return DeadlineFlag(
        "timelock[%d]" % txid,
        threshold,
        lambda w, t=txid: w.txs[t].timelock_passed,
        _set,
    )


# -- shared automata -------------------------------------------------------


def build_blockchain_agent(constants, tx_count, nonce_count, nonce_relevant=None):
    """The agent that maintains the chain: confirmation with nonce choice.

    A waiting transaction resolves (confirms or cancels) strictly within
    MAX_LATENCY of its broadcast, encoded as the closed invariant
    clock <= MAX_LATENCY - 1.  Keeping every constraint non-strict makes
    integral-time reachability exact (closed timed automata), which the
    discrete oracle relies on; the boundary point MAX_LATENCY itself
    must stay excluded or pending transactions could straddle protocol
    deadlines the paper's guarantees assume they cannot.  The nonce is
    chosen nondeterministically at confirmation time, which is how
    transaction malleability enters the model.

    A transaction's nonce is only ever read through stored signatures
    that name it as an input, so for transactions no signature covers
    the nonce is a dead field and choosing it would just double
    bisimilar states.  `nonce_relevant` lists the transactions whose
    confirmation keeps the full nonce choice; the rest confirm with
    nonce zero.  None keeps the choice everywhere.
    """
    bound = constants.max_latency - 1
    if nonce_relevant is None:
        relevant = tuple(range(tx_count))
    else:
        relevant = tuple(sorted(nonce_relevant))
    plain = tuple(i for i in range(tx_count) if i not in set(relevant))

    def invariant(w, bound=bound):
        return [(("tx", t), "<=", bound) for t in pending_clock_owners(w)]

    def guard(w, binds):
        return w.txs[binds["i"]].status == SENT

    def update(w, binds):
        return try_to_confirm(w, binds["i"], binds.get("n", 0))

    edges = []
    if relevant:
        edges.append(Edge(
            source=0, target=0, label="confirm",
            select=(("i", relevant), ("n", tuple(range(nonce_count)))),
            guard=guard, update=update,
        ))
    if plain:
        edges.append(Edge(
            source=0, target=0, label="confirm_plain",
            select=(("i", plain),),
            guard=guard, update=update,
        ))
    return AutomatonTemplate(
        "BlockChainAgentTA", [Location("chain", invariant)], edges
    )


def build_helper(deadlines):
    """One-state helper: the perpetual urgent-channel source plus the
    deadline-flip edges, one per distinct threshold.

    Thresholds must be strictly increasing per flag list; several flags
    sharing a threshold flip together.
    """
    by_threshold = {}
    for d in deadlines:
        by_threshold.setdefault(d.threshold, []).append(d)
    edges = [Edge(0, 0, "urg", sync=("!", URG_CHAN))]
    for theta in sorted(by_threshold):
        group = by_threshold[theta]

        def guard(w, group=group):
            return any(not d.is_set(w) for d in group)

        def update(w, group=group):
            for d in group:
                if not d.is_set(w):
                    w = d.set(w)
            return w

        edges.append(
            Edge(
                0,
                0,
                "tick@%d" % theta,
                guard=lambda w, binds, g=guard: g(w),
                clock_guard=((("time"), "==", theta),),
                update=lambda w, binds, u=update: u(w),
            )
        )
    return AutomatonTemplate("HelperTA", [Location("idle", None)], edges)
