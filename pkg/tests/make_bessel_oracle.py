"""Regenerate the frozen Bessel-derivative oracle values in tests/data/.

Run from the repository root:

    python tests/make_bessel_oracle.py

The acceptance grid covers (nu, x) in [0.05, 2.5] x [0.001, 60].  The nu
levels are chosen off every integer and half-integer so no point falls in
the finite-difference bands excluded by the accuracy contract (1e-4 around
integers for x < 8.5 and around half-integers for x >= 30).  Spot values
back individual unit tests.  Reference values come from quadrature plus
Richardson differencing (see oracles.py), never from the library.
"""

import json
from pathlib import Path

import numpy as np

from oracles import bessel_k_quadrature, dnu_xnu_knu_reference

DATA_DIR = Path(__file__).parent / "data"

GRID_NU = np.linspace(0.06, 2.47, 10)
GRID_X = np.geomspace(0.001, 60.0, 20)

SPOT_DNU = [
    (0.5, 1.0),
    (0.3, 2.0),
    (1.4, 0.01),
    (0.5, 10.0),
    (1.3, 20.0),
    (0.3, 35.0),
    (0.5, 8.4999),
    (0.5, 8.5001),
    (0.8, 14.9999),
    (0.8, 15.0001),
]

SPOT_K = [
    (1.3, 0.7),
]


def main():
    DATA_DIR.mkdir(exist_ok=True)
    grid = []
    for nu in GRID_NU:
        for x in GRID_X:
            if x < 8.5 and abs(nu - round(nu)) <= 1e-4:
                raise AssertionError(f"grid point ({nu}, {x}) falls in an excluded band")
            if x >= 30 and abs((nu + 0.5) - round(nu + 0.5)) <= 1e-4:
                raise AssertionError(f"grid point ({nu}, {x}) falls in an excluded band")
            grid.append(
                {"nu": float(nu), "x": float(x), "dnu": float(dnu_xnu_knu_reference(nu, x))}
            )
    payload = {
        "description": "Richardson/quadrature reference values for d/dnu [x^nu K_nu(x)]",
        "grid": grid,
        "spots_dnu": [
            {"nu": nu, "x": x, "dnu": float(dnu_xnu_knu_reference(nu, x))}
            for nu, x in SPOT_DNU
        ],
        "spots_k": [
            {"nu": nu, "x": x, "k": float(bessel_k_quadrature(nu, x))} for nu, x in SPOT_K
        ],
    }
    out = DATA_DIR / "bessel_oracle.json"
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1)
        handle.write("\n")
    print(f"wrote {out} with {len(grid)} grid points")


if __name__ == "__main__":
    main()
