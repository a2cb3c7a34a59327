"""Admittance counts of the standard architectures, with the optimal-class closed form."""

import argparse
import csv
import sys

from bdris.topology import complexity_count, make_architecture, theorem1_complexity


def rows(n):
    yield "single", complexity_count(make_architecture("single", n))
    yield "tree (tridiagonal)", complexity_count(make_architecture("tridiagonal", n))
    for size in (2, 4, 8):
        if n % size == 0 and size < n:
            yield f"group(Gs={size})", complexity_count(make_architecture("group", n, group_size=size))
    for L in (1, 2, 3, 4):
        if 2 * L <= n:
            band = complexity_count(make_architecture("band", n, q=2 * L - 1))
            assert band == theorem1_complexity(n, L)
            yield f"band/stem(L={L})", band
    yield "fully", complexity_count(make_architecture("fully", n))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,16,32,64")
    args = ap.parse_args()
    out = csv.writer(sys.stdout)
    out.writerow(["n_ris", "architecture", "admittances"])
    for n in (int(v) for v in args.sizes.split(",")):
        for name, count in rows(n):
            out.writerow([n, name, count])


if __name__ == "__main__":
    main()
