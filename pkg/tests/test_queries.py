"""Query parsing, pretty-printing round trips, and symbolic evaluation."""

import random

import pytest

from tacv import queries as Q
from tacv import world as w
from tacv.kernel import SymbolicState
from tacv.zones import Zone


CTX = Q.QueryContext(
    constants={"MAX_LATENCY": 10, "PROT_TIMELOCK": 100},
    parties={"ALICE": 0, "BOB": 1, "ADVERSARY": 2},
    secrets={"C_SEC": 0},
    automata={"BobTA": (0, {"failure": 2, "accepted": 3}),
              "AliceTA": (1, {"opened": 3})},
)

BOB_PROPERTY = (
    "A[] (time >= PROT_TIMELOCK+MAX_LATENCY) imply "
    "(hold_bitcoins(parties[BOB]) == 1 or parties[BOB].know_secret[0] "
    "or BobTA.failure)"
)


def state(zone_atoms, holdings_world=None, locs=(0, 0)):
    zone = Zone.origin(2).up().constrained(zone_atoms)
    data = holdings_world or _world(bob_holds=0, bob_knows=False)
    return SymbolicState(locs, data, zone)


def _world(bob_holds=0, bob_knows=False):
    outs = (w.Output("key", 1, bob_holds or 1),)
    tx = w.TxRecord(0, ((0, 0),), outs,
                    status=w.CONFIRMED if bob_holds else w.UNSENT)
    parties = (
        w.PartyKnowledge((True, False), (True,)),
        w.PartyKnowledge((False, True), (bob_knows,)),
        w.PartyKnowledge((False, False), (False,)),
    )
    return w.World((tx,), parties)


class TestParsing:
    def test_full_bob_property_parses(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        assert isinstance(q.root, Q.Imply)
        assert isinstance(q.root.left, Q.ClockAtom)
        assert q.root.left.const == 110
        rhs = q.root.right
        assert isinstance(rhs, Q.Or)
        assert isinstance(rhs.right, Q.LocAtom)
        assert rhs.right.loc_name == "failure"

    def test_trivial_true(self):
        q = Q.parse_query("A[] true", CTX)
        assert q.root == Q.BoolLit(True)

    def test_constant_folding_with_multiplication(self):
        q = Q.parse_query(
            "A[] (time >= PROT_TIMELOCK+2*MAX_LATENCY) imply true", CTX)
        assert q.root.left.const == 120

    def test_imply_right_associative(self):
        q = Q.parse_query("A[] time >= 1 imply time >= 2 imply time >= 3", CTX)
        assert isinstance(q.root.right, Q.Imply)

    def test_not_binds_tightest(self):
        q = Q.parse_query("A[] !parties[BOB].know_secret[0] and BobTA.failure", CTX)
        assert isinstance(q.root, Q.And)
        assert isinstance(q.root.left, Q.Not)

    def test_unknown_party_lists_candidates(self):
        with pytest.raises(Q.QueryError, match="ALICE"):
            Q.parse_query("A[] hold_bitcoins(parties[ALICA]) == 1", CTX)

    def test_unknown_location_lists_candidates(self):
        with pytest.raises(Q.QueryError, match="failure"):
            Q.parse_query("A[] BobTA.failur", CTX)

    def test_syntax_error_has_position(self):
        with pytest.raises(Q.QueryError, match="line 1, column"):
            Q.parse_query("A[] time >= ", CTX)

    def test_missing_abox_rejected(self):
        with pytest.raises(Q.QueryError, match="A\\[\\]"):
            Q.parse_query("time >= 1", CTX)

    def test_per_transaction_clocks_rejected(self):
        with pytest.raises(Q.QueryError, match="global clock"):
            Q.parse_query("A[] bc_clock[0] >= 1", CTX)

    def test_query_file_lines_and_comments(self):
        text = "// header\nA[] true\n\nA[] time >= 1 imply true // tail\n"
        qs = Q.parse_query_file(text, CTX)
        assert len(qs) == 2


class TestRoundTrip:
    PROPS = [
        BOB_PROPERTY,
        "A[] true",
        "A[] (time >= PROT_TIMELOCK) imply (parties[BOB].know_secret[0])",
        "A[] (time >= PROT_TIMELOCK) imply (hold_bitcoins(parties[ALICE]) == 1)",
        "A[] not BobTA.failure",
        "A[] (time >= PROT_TIMELOCK+2*MAX_LATENCY) imply "
        "((parties[BOB].know_secret[C_SEC] and !parties[ALICE].know_secret[0])"
        " imply hold_bitcoins(parties[BOB]) >= 3)",
    ]

    def test_pretty_reparses_identically(self):
        for prop in self.PROPS:
            ast = Q.parse_query(prop, CTX)
            again = Q.parse_query(Q.pretty(ast), CTX)
            assert again.root == ast.root, prop


class TestEvaluation:
    def test_data_short_circuit_holdings(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        s = state([], holdings_world=_world(bob_holds=1))
        assert Q.evaluate(s, q) is None

    def test_violation_on_late_zone(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        s = state([(1, 0, ">=", 50)])  # time in [50, inf)
        witness = Q.evaluate(s, q)
        assert witness is not None
        assert witness.min_value(1) == 110

    def test_no_violation_when_zone_stays_early(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        s = state([(1, 0, "<=", 109)])
        assert Q.evaluate(s, q) is None

    def test_knowledge_satisfies(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        s = state([(1, 0, ">=", 200)], holdings_world=_world(bob_knows=True))
        assert Q.evaluate(s, q) is None

    def test_location_predicate_satisfies(self):
        q = Q.parse_query(BOB_PROPERTY, CTX)
        s = state([(1, 0, ">=", 200)], locs=(2, 0))  # BobTA in failure
        assert Q.evaluate(s, q) is None

    def test_true_never_violated(self):
        q = Q.parse_query("A[] true", CTX)
        assert Q.evaluate(state([(1, 0, ">=", 0)]), q) is None

    def test_false_violated_with_whole_zone(self):
        q = Q.parse_query("A[] false", CTX)
        s = state([(1, 0, "<=", 4)])
        witness = Q.evaluate(s, q)
        assert witness == s.zone


class TestDnfSemantics:
    """Random formulas over clock atoms agree with pointwise truth tables."""

    def test_against_truth_tables(self):
        rng = random.Random(2026)
        consts = [3, 7, 11, 15]
        for _ in range(300):
            atoms = [
                Q.ClockAtom(rng.choice(["<", "<=", "==", ">=", ">"]),
                            rng.choice(consts), "k")
                for _ in range(rng.randint(1, 4))
            ]

            def rand_formula(depth=0):
                r = rng.random()
                if depth > 2 or r < 0.4:
                    return rng.choice(atoms)
                if r < 0.55:
                    return Q.Not(rand_formula(depth + 1))
                ctor = rng.choice([Q.And, Q.Or, Q.Imply])
                return ctor(rand_formula(depth + 1), rand_formula(depth + 1))

            f = rand_formula()
            region = Q._dnf(Q._nnf(_strip_imply(f), False))

            def direct(t, node):
                if isinstance(node, Q.ClockAtom):
                    return Q._cmp(t, node.op, node.const)
                if isinstance(node, Q.Not):
                    return not direct(t, node.arg)
                if isinstance(node, Q.And):
                    return direct(t, node.left) and direct(t, node.right)
                if isinstance(node, Q.Or):
                    return direct(t, node.left) or direct(t, node.right)
                if isinstance(node, Q.Imply):
                    return (not direct(t, node.left)) or direct(t, node.right)
                raise TypeError(node)

            for t in range(0, 20):
                in_region = any(
                    all(Q._cmp(t, a.op, a.const) for a in conj)
                    for conj in region
                )
                assert in_region == direct(t, f)


def _strip_imply(node):
    if isinstance(node, Q.Imply):
        return Q.Or(Q.Not(_strip_imply(node.left)), _strip_imply(node.right))
    if isinstance(node, Q.Not):
        return Q.Not(_strip_imply(node.arg))
    if isinstance(node, (Q.And, Q.Or)):
        return type(node)(_strip_imply(node.left), _strip_imply(node.right))
    return node
