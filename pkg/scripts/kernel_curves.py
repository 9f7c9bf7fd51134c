"""Plot-ready CSV of the truncation kernels and a printout of their moments."""

import argparse
from pathlib import Path

import numpy as np

from jumpcontrast.kernels import TruncationKernel, kernel_moment, kernel_plot_data

KERNELS = [TruncationKernel(), TruncationKernel(1, 2.0), TruncationKernel(2, 1.4), TruncationKernel(4, 1.2)]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results")
    p.add_argument("--points", type=int, default=801)
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in KERNELS:
        np.savetxt(out / f"kernel_{k.label()}.csv", kernel_plot_data(k, args.points), delimiter=",",
                   header="x,phi", comments="", fmt="%.17g")
        moments = ", ".join(f"m{j}={kernel_moment(k, j):+.4g}" for j in range(0, 7, 2))
        print(f"{k.label():>10}  support={k.support_radius:g}  {moments}")


if __name__ == "__main__":
    main()
