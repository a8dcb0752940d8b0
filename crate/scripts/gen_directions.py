"""Generate an antipodal equal-weight spherical design on S^2.

Nodes come in +/- pairs, so odd harmonics integrate to zero exactly. The even
harmonics up to `--degree` are driven to zero by least squares over the free
half of the nodes. Output format: "wx wy wz weight" per line.
"""
import argparse

import numpy as np
from scipy.optimize import least_squares
from scipy.special import sph_harm_y


def to_xyz(ang):
    th, ph = ang[0::2], ang[1::2]
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)


def residuals(ang, degree):
    th, ph = ang[0::2], ang[1::2]
    out = []
    for l in range(2, degree + 1, 2):
        for m in range(0, l + 1):
            y = sph_harm_y(l, m, th, ph).sum()
            out.append(y.real)
            if m > 0:
                out.append(y.imag)
    return np.array(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=37)
    ap.add_argument("--degree", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--tries", type=int, default=40)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    best = None
    for _ in range(args.tries):
        # Fibonacci start on the upper hemisphere, jittered
        k = np.arange(args.pairs) + 0.5
        z = 1.0 - k / args.pairs
        th = np.arccos(z) + rng.normal(0, 0.05, args.pairs)
        ph = np.pi * (1 + 5 ** 0.5) * k + rng.normal(0, 0.05, args.pairs)
        x0 = np.empty(2 * args.pairs)
        x0[0::2], x0[1::2] = th, ph
        sol = least_squares(residuals, x0, args=(args.degree,), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        cost = np.abs(sol.fun).max()
        if best is None or cost < best[0]:
            best = (cost, sol.x)
        if cost < 1e-13:
            break
    cost, ang = best
    half = to_xyz(ang)
    pts = np.concatenate([half, -half])
    w = 4 * np.pi / len(pts)
    print(f"# antipodal spherical design, {len(pts)} nodes, even harmonics to degree {args.degree}")
    print(f"# max residual {cost:.3e}; equal weights sum to 4*pi")
    print("# wx wy wz weight")
    for p in pts:
        p = p / np.linalg.norm(p)
        print(f"{p[0]:+.17e} {p[1]:+.17e} {p[2]:+.17e} {w:.17e}")


if __name__ == "__main__":
    main()
