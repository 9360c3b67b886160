#!/usr/bin/env python3
"""Fetch the IBM common stock daily closing prices (Box & Jenkins Series B:
369 observations, 1961-05-17 to 1962-11-02) and write them to data/ibm.txt,
one price per line.

The dataset is not redistributed with this package; this script downloads it
from a public mirror, validates its shape, and prints the SHA-256 of the
downloaded text so the provenance of a given copy can be recorded. If every
mirror is unreachable, obtain the series manually (it is printed in Box,
Jenkins, Reinsel & Ljung, "Time Series Analysis", as Series B, and shipped
as `ibmclose` in the R package `fma`) and save it as data/ibm.txt.

Usage: python3 scripts/fetch_ibm.py [--out data/ibm.txt] [--url URL]
"""

import argparse
import csv
import hashlib
import io
import os
import sys
import urllib.request

MIRRORS = [
    "https://raw.githubusercontent.com/robjhyndman/fma/master/data-raw/ibmclose.csv",
    "https://pkg.yangzhuoranyang.com/tsdl/extdata/ibmclose.csv",
]

EXPECTED_N = 369


def parse_values(text: str) -> list:
    """Extract one numeric column from plain or CSV text, skipping headers."""
    values = []
    for row in csv.reader(io.StringIO(text)):
        for field in reversed(row):  # last column holds the price
            field = field.strip()
            if not field:
                continue
            try:
                values.append(float(field))
            except ValueError:
                pass  # header or index column
            break
    return values


def validate(values: list) -> None:
    if len(values) != EXPECTED_N:
        raise ValueError(f"expected {EXPECTED_N} observations, got {len(values)}")
    if not all(200.0 < v < 700.0 for v in values):
        raise ValueError("values outside the plausible price range for this series")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/ibm.txt")
    parser.add_argument("--url", default=None, help="override the mirror list")
    args = parser.parse_args()

    urls = [args.url] if args.url else MIRRORS
    last_error = None
    for url in urls:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                text = resp.read().decode("utf-8")
            values = parse_values(text)
            validate(values)
        except Exception as exc:  # try the next mirror
            print(f"failed {url}: {exc}", file=sys.stderr)
            last_error = exc
            continue
        body = "".join("%.17g\n" % v for v in values)
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(body)
        digest = hashlib.sha256(body.encode()).hexdigest()
        print(f"wrote {args.out} ({len(values)} values)")
        print(f"sha256 {digest}")
        return 0
    print(f"all mirrors failed; last error: {last_error}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
