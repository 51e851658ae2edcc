"""Flag-route statistics and the nonlinear inequality family.

Runs the one-way remote-preparation route on the built-in random-access
protocol: Alice's preparation attempt succeeds with probability exactly
1/d (announced by a flag), and conditioned on the flag Bob answers with
the source success cos^2(pi/8).  For a grid of confidence parameters the
script evaluates the rigorous bit-count inequality (which always holds)
and the naive single-shot variant (which the route genuinely breaks),
showing why the flag probability has to enter through a log of a log.
"""

import sys
import time

from bellforge import builtin_qrac, nonlinear_bell_check, one_way_correlations


def main() -> None:
    start = time.monotonic()
    table, stats = one_way_correlations(builtin_qrac())
    print(f"flag rate p_a        {stats.p_a:.15f}")
    print(f"hit success p_b      {stats.p_b:.15f}")
    print(f"{'delta':>10}  {'lhs':>4} {'rhs':>4} rigorous   "
          f"{'h-lhs':>6} {'h-rhs':>5} heuristic")
    for delta in (0.5, 0.25, 1.0 / 16.0, 1.0 / 256.0):
        chk = nonlinear_bell_check(stats, delta)
        rig = "holds" if chk.holds else "FAILS"
        heu = "violated" if chk.heuristic_violated else "holds"
        print(f"{delta:>10.6f}  {chk.lhs_bits:>4.0f} {chk.rhs_bits:>4.0f} "
              f"{rig:<9}  {chk.heuristic_lhs:>6.2f} "
              f"{chk.heuristic_rhs:>5.0f} {heu}")
    print(f"[{time.monotonic() - start:.1f}s] done", file=sys.stderr)


if __name__ == "__main__":
    main()
