from fractions import Fraction
from importlib import resources

import networkx as nx
import pytest
import sympy
from hypothesis import given, strategies as st

import oracles
from scmadec import dfg as D


def shipped(name):
    return D.parse((resources.files("scmadec") / "data" / name).read_text())


@pytest.fixture(scope="module")
def branch():
    return shipped("resource_branch.dfg")


class TestFolding:
    def test_documented_delays(self, branch):
        g, spec = branch
        got = [f.delays for f in D.fold(g, spec)]
        assert got == [0, 7, 7, 3, 7, 7, 4, 8, 4, 2, 6]

    def test_delays_match_oracle(self, branch):
        g, spec = branch
        for f in D.fold(g, spec):
            e = f.edge
            assert f.delays == oracles.folded_delay(spec.factor, e.w, spec.depth(e.src), spec.slot(e.src),
                                                    spec.slot(e.dst))

    def test_trivial_cases(self):
        assert D.folded_delay(5, 1, 0, 2, 2) == 5  # self-loop with one delay on an unpipelined unit
        assert D.folded_delay(5, 0, 0, 3, 3) == 0

    @given(st.integers(1, 16), st.integers(0, 6), st.integers(0, 4), st.data())
    def test_slot_shift(self, N, w, P, data):
        u = data.draw(st.integers(0, N - 1))
        v = data.draw(st.integers(0, N - 1))
        base = D.folded_delay(N, w, P, u, v)
        assert D.folded_delay(N, w + 1, P, u, v) == base + N
        assert D.folded_delay(N, w, P + 1, u, v) == base - 1
        if v + 1 < N:
            assert D.folded_delay(N, w, P, u, v + 1) == base + 1

    def test_negative_needs_retiming(self):
        g, spec = D.parse("node a add\nnode b add\nedge a b\nfold 3\nunit X P=1: b a -\n")
        (f,) = D.fold(g, spec)
        assert f.delays == -2
        assert D.retiming_required([f]) == [f]
        with pytest.raises(D.DfgError, match="negative"):
            D.lifetime_analysis(g, spec)


class TestLifetimes:
    def test_branch_registers(self, branch):
        g, spec = branch
        table = D.lifetime_analysis(g, spec)
        assert table.live == (8, 8, 8, 8, 7, 8, 8)
        assert table.min_registers == 8

    def test_matches_sweep_oracle(self, branch):
        g, spec = branch
        table = D.lifetime_analysis(g, spec)
        assert table.min_registers == oracles.max_live_sweep([(lt.birth, lt.death) for lt in table.lifetimes],
                                                              spec.factor)

    @given(st.integers(2, 9), st.lists(st.tuples(st.integers(0, 12), st.integers(0, 20)), max_size=10))
    def test_live_counts_vs_sweep(self, N, raw):
        lts = [D.Lifetime(f"v{i}", b, b + n) for i, (b, n) in enumerate(raw)]
        counts = D.live_counts(lts, N)
        assert sum(counts) == sum(lt.length for lt in lts)
        assert max(counts, default=0) == oracles.max_live_sweep([(lt.birth, lt.death) for lt in lts], N)

    def test_empty(self):
        table = D.LifetimeTable(4, (), (0, 0, 0, 0))
        assert table.min_registers == 0
        alloc = D.allocate_registers(table)
        assert alloc.paths == {} and D.replay(alloc) == []


class TestAllocation:
    def test_branch_replays_cleanly(self, branch):
        g, spec = branch
        alloc = D.allocate_registers(D.lifetime_analysis(g, spec))
        assert alloc.registers == 8
        assert D.replay(alloc, periods=5) == []
        assert "R8" in alloc.to_text()

    def test_three_step_path(self):
        table = D.LifetimeTable(4, (D.Lifetime("x", 0, 3),), (0, 1, 1, 1))
        alloc = D.allocate_registers(table)
        # with a single register the value moves back onto R1 every step
        assert [t for t, _ in alloc.paths["x"]] == [1, 2, 3]
        assert D.replay(alloc) == []

    def test_forward_motion(self):
        lts = (D.Lifetime("a", 0, 3), D.Lifetime("b", 1, 2))
        table = D.LifetimeTable(4, lts, tuple(D.live_counts(lts, 4)))
        alloc = D.allocate_registers(table, registers=3)
        assert alloc.paths["a"] == ((1, 0), (2, 1), (3, 2))
        assert D.replay(alloc) == []

    def test_too_few_registers(self, branch):
        g, spec = branch
        with pytest.raises(D.AllocationError):
            D.allocate_registers(D.lifetime_analysis(g, spec), registers=7)

    def test_death_before_birth(self):
        table = D.LifetimeTable(3, (D.Lifetime("x", 2, 1),), (0, 0, 0))
        with pytest.raises(D.AllocationError, match="dies before"):
            D.allocate_registers(table)

    @given(st.integers(2, 7), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 12)), min_size=1, max_size=8))
    def test_random_tables_replay(self, N, raw):
        lts = tuple(D.Lifetime(f"v{i}", b, b + n) for i, (b, n) in enumerate(raw))
        table = D.LifetimeTable(N, lts, tuple(D.live_counts(lts, N)))
        alloc = D.allocate_registers(table)
        assert alloc.registers == table.min_registers
        assert D.replay(alloc, periods=4) == []


class TestIterationBound:
    def test_symbolic_loops(self):
        g, _ = shipped("maxlog_loops.dfg")
        exprs = sorted(lb.expression() for lb in D.loop_bounds(g))
        assert exprs == sorted(["(T_A + T_C)/3", "(2*T_A + T_C)/4", "(T_A + T_C + T_S)/4", "(2*T_A + T_C + T_S)/5"])
        ib = D.iteration_bound(g, {"T_A": 2, "T_C": 1, "T_S": 1})
        assert ib.bound == Fraction(5, 4)
        assert ib.critical.expression() == "(2*T_A + T_C)/4"

    def test_sympy_max_agrees(self):
        g, _ = shipped("maxlog_loops.dfg")
        syms = sympy.symbols("T_A T_C T_S", positive=True)
        env = dict(zip(("T_A", "T_C", "T_S"), syms))
        exprs = [sympy.sympify(lb.expression(), locals=env) for lb in D.loop_bounds(g)]
        big = sympy.Max(*exprs)
        for vals in [(2, 1, 1), (1, 5, 3), (7, 1, 9), (1, 1, 1)]:
            sub = dict(zip(syms, vals))
            times = dict(zip(("T_A", "T_C", "T_S"), vals))
            assert sympy.Rational(big.subs(sub)) == sympy.Rational(str(D.iteration_bound(g, times).bound))

    def test_missing_symbol(self):
        g, _ = shipped("maxlog_loops.dfg")
        with pytest.raises(D.DfgError, match="T_S"):
            D.iteration_bound(g, {"T_A": 1, "T_C": 1})

    def test_zero_delay_cycle(self):
        g, _ = D.parse("node a x T=1\nnode b x T=1\nedge a b\nedge b a\n")
        with pytest.raises(D.DeadlockError):
            D.iteration_bound(g)

    def test_acyclic(self):
        g, _ = D.parse("node a x T=1\nnode b x T=1\nedge a b w=2\n")
        ib = D.iteration_bound(g)
        assert ib.bound == 0 and ib.critical is None and "acyclic" in ib.note

    def test_self_loop(self):
        g, _ = D.parse("node a x T=3\nedge a a w=2\n")
        assert D.iteration_bound(g).bound == Fraction(3, 2)

    @given(st.integers(1, 12), st.data())
    def test_brute_force_vs_networkx(self, n, data):
        g = D.Dfg()
        for i in range(n):
            g.add_node(i, "op", data.draw(st.integers(1, 5)))
        pairs = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n,
                                   unique=True))
        for s, d in pairs:
            g.add_edge(s, d, data.draw(st.integers(1, 3)))
        G = nx.DiGraph()
        G.add_nodes_from(g.nodes)
        w = {}
        for e in g.edges:
            G.add_edge(e.src, e.dst)
            w[(e.src, e.dst)] = e.w
        want = Fraction(0)
        count = 0
        for cyc in nx.simple_cycles(G):
            count += 1
            t = sum(g.nodes[v].time for v in cyc)
            dl = sum(w[(cyc[i], cyc[(i + 1) % len(cyc)])] for i in range(len(cyc)))
            want = max(want, Fraction(t, dl))
        assert len(D.simple_cycles(g)) == count
        assert D.iteration_bound(g).bound == want


class TestParser:
    @pytest.mark.parametrize("text,match", [
        ("node a x\nnode a y\n", "duplicate"),
        ("node a x\nedge a b\n", "unknown node"),
        ("node a x\nnode b x\nedge a b w=-1\n", "line 3"),
        ("loop a b\n", "unknown statement"),
        ("node a x\nunit U: a\n", "fold"),
        ("node a x\nfold 2\nunit U: a - -\n", "3 slots"),
        ("node a x\nnode b x\nfold 2\nunit U: a\nunit V: a b\n", "appears in units"),
        ("node a x\nfold 2\nunit U Q=1: a\n", "unknown unit attribute"),
        ("edge\n", "line 1"),
    ])
    def test_errors(self, text, match):
        with pytest.raises(D.DfgError, match=match):
            D.parse(text)

    def test_unknown_folding_node(self):
        g, spec = D.parse("node a x\nnode b x\nedge a b\nfold 2\nunit U: a\n")
        with pytest.raises(D.DfgError, match="not in any folding set"):
            D.fold(g, spec)

    def test_split_files(self, tmp_path):
        (tmp_path / "g.dfg").write_text("node a x T=1/2\nedge a a w=1\n")
        (tmp_path / "f.txt").write_text("fold 3   # comment\nunit U P=1: - a phi\n")
        g, spec = D.load(tmp_path / "g.dfg", tmp_path / "f.txt")
        assert g.nodes["a"].time == Fraction(1, 2)
        assert spec.slot("a") == 1 and spec.depth("a") == 1
        assert [f.delays for f in D.fold(g, spec)] == [2]


class TestReport:
    def test_all_sections(self, branch):
        g, spec = branch
        text, table = D.report(g, spec, "all")
        for word in ("fold", "lifetime", "register"):
            assert word in text.lower()
        assert table.splitlines()[0] == "section,item,key,value"

    def test_bound_without_folding(self):
        g, spec = shipped("maxlog_loops.dfg")
        text, _ = D.report(g, spec, "bound", {"T_A": 2, "T_C": 1, "T_S": 1})
        assert "5/4" in text
