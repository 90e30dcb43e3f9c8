"""Classify every canned 1-D net and print one row per net.

    python3 scripts/canned_table.py [--sigma 2.0] [--csv out.csv]
"""

import argparse
import csv
import sys

from ultraregular import suite
from ultraregular.classify import classify_net
from ultraregular.microlocal import ConePartition, sigma_set
from ultraregular.weights import make_gevrey


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=2.0, help="Gevrey order of the weight sequence")
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args(argv)

    W = make_gevrey(args.sigma, 512)
    part = ConePartition.default(1)
    rows = []
    for c in suite.canned_suite_1d():
        rep = classify_net(c.net, W)
        S = sigma_set(c.net, W, part).sectors
        rows.append({
            "net": c.name,
            "class": str(rep.regular_class),
            "slopes": " ".join(f"{s:.3f}" for s in rep.fit.slopes),
            "class_M": rep.ultra.passed,
            "sigma": "".join(part.label(s) for s in sorted(S)) or "-",
            "sigma_expected": "".join(part.label(s) for s in sorted(c.sigma_expected)) or "-",
        })

    w = max(len(r["net"]) for r in rows)
    for r in rows:
        print(f"{r['net']:<{w}}  {r['class']:<28} class_M={str(r['class_M']):<5}  "
              f"sigma={r['sigma']:<3} (expected {r['sigma_expected']})  N=[{r['slopes']}]")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
            wr.writeheader()
            wr.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
