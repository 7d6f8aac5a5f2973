"""JC vs phase-model error variance against mean photon number (coherent drive)."""
import argparse

from cqlbench import experiments as ex


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--nbar-grid", default="1,4,16,50,100,400")
    p.add_argument("--out", default="saturation.csv")
    args = p.parse_args()
    cfg = ex.SweepConfig(models=("jc", "phase"), nbar_grid=tuple(float(x) for x in args.nbar_grid.split(",")))
    rows = ex.run_saturation_sweep(cfg)
    with open(args.out, "w", newline="") as fh:
        fh.write(ex.rows_to_csv(rows))
    print(f"{'model':<6} {'nbar':>7} {'sigma_D^2':>12} {'bound':>12} {'ratio':>8}")
    for r in rows:
        print(f"{r.model:<6} {r.nbar:7.1f} {r.sigma_D2:12.4e} {r.bound:12.4e} {r.saturation_ratio:8.4f}")
    for desc, ok in ex.saturation_checks(rows):
        print(("ok   " if ok else "FAIL ") + desc)


if __name__ == "__main__":
    main()
