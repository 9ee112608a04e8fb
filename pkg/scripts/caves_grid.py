"""chi^2, xi^2 and F_Q of phase-locked Caves states against their closed forms."""
import argparse
import math

from twomode_metro import criteria as cr
from twomode_metro import fockspace as fs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha2", type=float, nargs="+", default=[1.0, 4.0, 10.0])
    ap.add_argument("--r", type=float, nargs="+", default=[0.25, 0.5, 1.0, 1.5])
    args = ap.parse_args()

    frame = fs.mach_zehnder_frame()
    print("alpha2,r,cutoff_a,cutoff_b,fq,chi2,chi2_exact,xi2,xi2_exact")
    for a2 in args.alpha2:
        for r in args.r:
            p = fs.CavesParams(math.sqrt(a2), 0.0, r)
            state = fs.caves_state(p)
            fq = cr.fisher_information(state, frame.n2)
            print(
                f"{a2},{r},{state.basis.cutoff_a},{state.basis.cutoff_b},{fq:.10g},"
                f"{cr.chi_squared(state, frame.n2, fq=fq):.10g},{cr.caves_chi2_analytic(p):.10g},"
                f"{cr.xi_squared(state, frame):.10g},{cr.caves_xi2_analytic(p):.10g}"
            )


if __name__ == "__main__":
    main()
