"""Bound battery over JC, phase, fn-family, multimode and Raman models; writes CSV."""
import argparse
import sys

from cqlbench import experiments as ex


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--models", default="jc,phase,fnfamily,multimode,raman")
    p.add_argument("--nbar-grid", default="1,4,16,64")
    p.add_argument("--fock-levels", default="0,1,5")
    p.add_argument("--out", default="-")
    args = p.parse_args()
    cfg = ex.SweepConfig(models=tuple(args.models.split(",")),
                         nbar_grid=tuple(float(x) for x in args.nbar_grid.split(",")),
                         fock_levels=tuple(int(x) for x in args.fock_levels.split(",")))
    text = ex.rows_to_csv(ex.run_bound_battery(cfg))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
