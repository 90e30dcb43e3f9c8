"""Wave front estimate of the mollified delta sheet on the 256^2 grid.

Writes the per point, per sector CSV and prints the projections.

    python3 scripts/sheet_wavefront.py [--out sheet_wf.csv] [--axis 0]
"""

import argparse
import sys

from ultraregular import suite
from ultraregular.microlocal import ConePartition, wavefront
from ultraregular.weights import make_gevrey


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="sheet_wf.csv")
    ap.add_argument("--axis", type=int, choices=(0, 1), default=0, help="0: delta(x) (x) 1, 1: 1 (x) delta(y)")
    args = ap.parse_args(argv)

    part = ConePartition.default(2)
    wf = wavefront(suite.delta_sheet_2d(args.axis), make_gevrey(2.0, 512), part, cfg=suite.config_2d())
    with open(args.out, "w") as fh:
        fh.write(wf.to_csv())
    pts = wf.point_projection()
    print(f"window radius {wf.radius:g}, {len(wf.points)} base points, {len(pts)} singular")
    if pts.size:
        print(f"singular x range [{pts[:, 0].min():.3f}, {pts[:, 0].max():.3f}], "
              f"y range [{pts[:, 1].min():.3f}, {pts[:, 1].max():.3f}]")
    print("sectors:", [part.label(s) for s in sorted(wf.sector_projection())])
    print("wrote", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
