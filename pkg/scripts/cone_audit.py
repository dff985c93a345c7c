#!/usr/bin/env python3
"""Audit the cone-interior LP against direction sampling on random cones.

    python scripts/cone_audit.py [n_cones] [dimension] [n_directions]

Prints one line per cone with the LP margin and the best sampled margin;
any sound-ness violation (false nonempty, or empty with a clearly interior
sampled direction) is flagged.
"""

import sys

import numpy as np

from sipcert.geometry import Polyhedron, cone_interior_nonempty
from sipcert.options import resolve_seed


def main(argv):
    n_cones = int(argv[1]) if len(argv) > 1 else 25
    dim = int(argv[2]) if len(argv) > 2 else 3
    n_dirs = int(argv[3]) if len(argv) > 3 else 10_000
    rng = np.random.default_rng(resolve_seed())
    tol = 1e-9
    violations = 0
    for i in range(n_cones):
        m = int(rng.integers(2, dim * 2 + 1))
        normals = rng.standard_normal((m, dim))
        poly = Polyhedron(normals, np.zeros(m))
        result = cone_interior_nonempty(poly, tol)
        unit = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        directions = rng.standard_normal((n_dirs, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        sampled = float((directions @ unit.T).min(axis=1).max())
        flag = ""
        if result.nonempty and float((unit @ result.witness).min()) <= 0:
            flag = "  <-- FALSE NONEMPTY"
            violations += 1
        elif not result.nonempty and sampled >= 10 * tol:
            flag = "  <-- FALSE EMPTY"
            violations += 1
        print(
            f"cone {i:>3} (m={m}): lp_margin={result.margin:< .3e} "
            f"sampled={sampled:< .3e} nonempty={result.nonempty}{flag}"
        )
    print(f"{violations} violations over {n_cones} cones")
    return 0 if violations == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
