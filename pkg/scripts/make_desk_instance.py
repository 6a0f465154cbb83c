"""Write the bundled 6-bus / 8-generator / 8-line desk instance and its 24 h scenario."""

import argparse
from pathlib import Path

import numpy as np

from fcuc.grid import Bus, Generator, GridModel, Line, Scenario, save_grid, save_scenario, validate_grid

DATA = Path(__file__).resolve().parents[1] / "src" / "fcuc" / "data"

# id, bus, p_max, p_min, cost, no-load, startup, H, min up/down, init status, init output
# H includes coupled rotating mass (flywheels, condensers) so a single trip is survivable
UNITS = [
    (1, 1, 150, 50, 12.0, 60, 300, 14.0, 8, 1, 120),
    (2, 1, 100, 30, 16.0, 40, 160, 16.0, 6, 1, 80),
    (3, 2, 90, 25, 20.0, 36, 120, 18.0, 4, 1, 60),
    (4, 3, 80, 20, 24.0, 30, 80, 20.0, 3, 0, 0),
    (5, 3, 60, 15, 28.0, 24, 60, 18.0, 2, 0, 0),
    (6, 6, 70, 20, 30.0, 30, 70, 22.0, 2, 0, 0),
    (7, 6, 50, 10, 35.0, 20, 40, 20.0, 1, 0, 0),
    (8, 2, 40, 10, 45.0, 12, 20, 24.0, 1, 0, 0),
]

# id, from, to, susceptance (pu), limit (MW); short, stiff lines keep bus
# frequencies close to the centre of inertia within a 0.1 s window
LINES = [
    (1, 1, 2, 200.0, 220),
    (2, 1, 4, 160.0, 200),
    (3, 2, 3, 120.0, 150),
    (4, 2, 4, 140.0, 150),
    (5, 3, 5, 180.0, 150),
    (6, 4, 5, 100.0, 120),
    (7, 5, 6, 160.0, 150),
    (8, 3, 6, 80.0, 120),
]

DEMAND_SHAPE = [0.62, 0.58, 0.56, 0.55, 0.56, 0.60, 0.68, 0.77, 0.85, 0.90, 0.94, 0.96,
                0.97, 0.96, 0.94, 0.92, 0.90, 0.90, 0.92, 0.90, 0.85, 0.78, 0.70, 0.65]
DEMAND_SHARE = [0.0, 0.15, 0.2, 0.3, 0.25, 0.1]
# midday-peaking renewable output, fraction of installed RES
RES_SHAPE = [0.10, 0.10, 0.08, 0.08, 0.10, 0.15, 0.25, 0.45, 0.65, 0.80, 0.90, 0.92,
             0.90, 0.80, 0.65, 0.45, 0.30, 0.20, 0.15, 0.12, 0.10, 0.10, 0.10, 0.10]
RES_SHARE = [0.0, 0.0, 0.0, 0.0, 0.6, 0.4]


def desk_grid() -> GridModel:
    buses = [Bus(i) for i in range(1, 7)]
    gens = []
    for gid, bus, pmax, pmin, c, nl, su, h, updn, u0, p0 in UNITS:
        gens.append(Generator(
            id=gid, bus=bus, cost=c, no_load_cost=nl, startup_cost=su, reserve_cost=2.0 + 0.1 * c,
            p_min=pmin, p_max=pmax, ramp=0.6 * pmax, reserve_ramp=0.5 * pmax,
            min_up=updn, min_down=updn, inertia_h=h, rating_mva=1.2 * pmax,
            initial_status=u0, initial_output=p0))
    lines = [Line(lid, f, t, b, lim) for lid, f, t, b, lim in LINES]
    return GridModel(buses, lines, gens, s_base_mva=100.0, f_nom_hz=60.0)


def desk_scenario(peak_mw: float = 500.0, res_mw: float = 220.0) -> Scenario:
    d = np.outer(DEMAND_SHARE, DEMAND_SHAPE) * peak_mw
    e = np.outer(RES_SHARE, RES_SHAPE) * res_mw
    return Scenario(d, e)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DATA)
    ap.add_argument("--peak", type=float, default=500.0)
    ap.add_argument("--res", type=float, default=220.0)
    args = ap.parse_args()
    g = desk_grid()
    assert not validate_grid(g), validate_grid(g)
    args.out.mkdir(parents=True, exist_ok=True)
    save_grid(g, args.out / "desk_grid.json")
    save_scenario(desk_scenario(args.peak, args.res), g, args.out / "desk_scenario.csv")
    print(f"wrote {args.out / 'desk_grid.json'} and {args.out / 'desk_scenario.csv'}")


if __name__ == "__main__":
    main()
