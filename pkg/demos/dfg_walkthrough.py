"""From a dataflow graph to a folded datapath with its register file.

1. Fold one resource-node branch onto one adder and one multiplier with
   folding factor 7, and print the delay each edge needs in the folded circuit.
2. Turn those delays into value lifetimes; the busiest control step gives the
   minimum register count.
3. Allocate the values to registers with forward-backward moves and replay
   the allocation as a register file over several iterations.
4. Compute the iteration bound of the recursive Max-Log loops, symbolically
   and for concrete unit delays.

    python demos/dfg_walkthrough.py
"""

from importlib import resources

from scmadec import dfg

data = resources.files("scmadec") / "data"
graph, spec = dfg.parse((data / "resource_branch.dfg").read_text())

print("folded delays  D_F(U->V) = N w - P_U + v - u")
for f in dfg.fold(graph, spec):
    e = f.edge
    print(f"  {e.src:>2} -> {e.dst:<2}  w={e.w}  P={spec.depth(e.src)}  u={spec.slot(e.src)}  v={spec.slot(e.dst)}"
          f"  D_F={f.delays}")

table = dfg.lifetime_analysis(graph, spec)
print("\nlifetimes (value lives on (birth, death])")
for lt in table.lifetimes:
    print(f"  {lt.var:>2}: {lt.birth:>2} -> {lt.death:>2}")
print("live values per control step:", list(table.live))
print("minimum registers:", table.min_registers)

alloc = dfg.allocate_registers(table)
print("\nregister allocation, one row per control step (mod N)")
print(alloc.to_text())
problems = dfg.replay(alloc, periods=6)
print("replay over 6 iterations:", "clean" if not problems else problems)

loops, _ = dfg.parse((data / "maxlog_loops.dfg").read_text())
times = {"T_A": 2, "T_C": 1, "T_S": 1}
ib = dfg.iteration_bound(loops, times)
print("\nloop bounds")
for lb in ib.loops:
    print(f"  {' -> '.join(lb.nodes):<20} {lb.expression():<24} = {lb.value(times)}")
print(f"iteration bound T_inf = {ib.bound} (critical loop {' -> '.join(ib.critical.nodes)})")
