"""Monte Carlo ML phase estimation with a Caves state, compared with QCR and shot noise."""
import argparse
import math

from twomode_metro import criteria as cr
from twomode_metro import estimation as est
from twomode_metro import fockspace as fs

POVMS = {
    "number_difference": est.povm_number_difference,
    "photon_counting": est.povm_photon_counting,
    "parity": est.povm_parity,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha2", type=float, default=2.0)
    ap.add_argument("--r", type=float, default=0.7)
    ap.add_argument("--povm", choices=sorted(POVMS), default="number_difference")
    ap.add_argument("--m", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--n-trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--theta", type=float, default=None,
                    help="true phase; default is the classical-Fisher working point")
    args = ap.parse_args()

    y = (0.0, 1.0, 0.0)
    state = fs.caves_state(fs.CavesParams(math.sqrt(args.alpha2), 0.0, args.r))
    povm = POVMS[args.povm](state.basis)
    fq = cr.fisher_information(state, y)
    if args.theta is None:
        theta, fe = est.find_working_point(state, y, povm)
    else:
        theta, fe = args.theta, est.fisher_along(state, y, povm, args.theta)
    print(f"# <N>={state.mean_N():.6g} F_Q={fq:.6g} theta0={theta:.4f} F_E/F_Q={fe / fq:.4f}")
    print("m,rms,qcr,sn,rms_over_qcr,rms_over_sn,bias_ok")
    for m in args.m:
        run = est.run_estimation(state, theta, y, povm, m, args.n_trials, args.seed)
        qcr = cr.qcr_bound(fq, m)
        sn = cr.shot_noise_limit(state.mean_N(), m)
        print(f"{m},{run.rms_error:.6g},{qcr:.6g},{sn:.6g},{run.rms_error / qcr:.4f},"
              f"{run.rms_error / sn:.4f},{run.bias_ok}")


if __name__ == "__main__":
    main()
