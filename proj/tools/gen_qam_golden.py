#!/usr/bin/env python3
"""Writes data/golden/qam{4,16,64}.txt from the 3GPP Gray QAM closed form.

One line per label: the bits b0..b_{q-1}, then Re and Im of the point.
Independent of the C++ mapper; the tests compare against these files.
"""
import itertools
import math
import pathlib


def point(bits):
    s = [1 - 2 * b for b in bits]
    q = len(bits)
    if q == 2:
        return s[0] / math.sqrt(2), s[1] / math.sqrt(2)
    if q == 4:
        n = math.sqrt(10)
        return s[0] * (2 - s[2]) / n, s[1] * (2 - s[3]) / n
    if q == 6:
        n = math.sqrt(42)
        return s[0] * (4 - s[2] * (2 - s[4])) / n, s[1] * (4 - s[3] * (2 - s[5])) / n
    raise ValueError(q)


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "golden"
    out.mkdir(parents=True, exist_ok=True)
    for order, q in ((4, 2), (16, 4), (64, 6)):
        lines = []
        for bits in itertools.product((0, 1), repeat=q):
            re, im = point(bits)
            lines.append("%s %.17g %.17g" % ("".join(map(str, bits)), re, im))
        (out / ("qam%d.txt" % order)).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
