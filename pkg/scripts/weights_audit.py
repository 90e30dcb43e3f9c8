"""Audit Gevrey weight sequences: (H1), (H2) constants, the Komatsu form of
(H2) on the associated function, moment roundtrip and M~ at a few points.

    python3 scripts/weights_audit.py [--sigmas 1.5 2 3] [--P 5000]
"""

import argparse
import sys

import numpy as np

from ultraregular.errors import CertificateError
from ultraregular.weights import (associated_function, check_h1, check_h2, check_h3prime, check_komatsu_h2,
                                  make_gevrey, recover_moments)


def audit(sigma: float, P: int) -> dict:
    W = make_gevrey(sigma, P)
    T = associated_function(W)
    h1, _ = check_h1(W)
    c = check_h2(W)
    out = {"sigma": sigma, "H1": h1, "A": None if c is None else c.A, "H": None if c is None else c.H,
           "H3'": check_h3prime(W).verdict}
    if c is not None:
        try:
            out["komatsu"] = check_komatsu_h2(T, c.A, c.H, np.geomspace(1.0, 1e4, 512)).worst_margin
        except CertificateError as e:
            out["komatsu"] = f"uncertified ({e})"
    out["roundtrip"] = max(abs(recover_moments(T, p).ln_value - W.ln_values[p]) / max(abs(W.ln_values[p]), 1e-300)
                           for p in range(1, 31))
    t = np.array([1e2, 1e4, 1e6])
    ev = T.evaluate(t)
    out["M~"] = {f"{v:g}": (float(m) if ok else None) for v, m, ok in zip(t, ev.value, ev.certified)}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigmas", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    ap.add_argument("--P", type=int, default=5000, help="sequence length")
    args = ap.parse_args(argv)
    for s in args.sigmas:
        r = audit(s, args.P)
        print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
