"""QCR sensitivity of Caves states along |alpha|^2 = sinh^2 r versus total particle number."""
import argparse
import math

import numpy as np

from twomode_metro import criteria as cr
from twomode_metro import fockspace as fs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-min", type=float, default=4.0)
    ap.add_argument("--n-max", type=float, default=100.0)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--m", type=int, default=1)
    args = ap.parse_args()

    totals = np.geomspace(args.n_min, args.n_max, args.points)
    rows = []
    print("n_tot,mean_N,fq,dtheta_qcr,sn_limit,hl")
    for n_tot in totals:
        # N_tot = m <N> with <N> = |alpha|^2 + sinh^2 r = 2 sinh^2 r
        s2 = n_tot / (2 * args.m)
        state = fs.caves_state(fs.CavesParams(math.sqrt(s2), 0.0, math.asinh(math.sqrt(s2))))
        fq = cr.fisher_information(state, (0, 1, 0))
        d = cr.qcr_bound(fq, args.m)
        rows.append(d)
        print(f"{n_tot:.6g},{state.mean_N():.6g},{fq:.8g},{d:.6g},"
              f"{cr.shot_noise_limit(state.mean_N(), args.m):.6g},{1 / n_tot:.6g}")
    slope = np.polyfit(np.log(totals), np.log(rows), 1)[0]
    print(f"# log-log slope of dtheta_qcr vs n_tot: {slope:.4f}")


if __name__ == "__main__":
    main()
