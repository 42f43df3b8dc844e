#!/usr/bin/env python3
"""Generate a synthetic smart-office occupancy CSV with the expected schema.

The six sensor columns mimic realistic ranges (lux, percent blinds/lamps,
relative humidity, CO2 ppm, temperature C) and correlate with the occupancy
label, so the full pipeline can be exercised end to end without the real data.
"""

import argparse

import numpy as np
import pandas as pd


def synthesize(n_rows: int, seed: int, positive_fraction: float = 0.43) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    occupied = rng.random(n_rows) < positive_fraction
    illuminance = np.where(
        occupied,
        rng.normal(120, 60, n_rows),
        rng.normal(25, 30, n_rows),
    ).clip(0, 814.5)
    blinds = np.where(rng.random(n_rows) < 0.8, 100.0, 0.0)
    lamps = np.where(
        occupied, np.where(rng.random(n_rows) < 0.85, 100.0, 0.0),
        np.where(rng.random(n_rows) < 0.15, 100.0, 0.0),
    )
    rh = rng.normal(np.where(occupied, 49.5, 45.5), 4.5, n_rows).clip(24.33, 63.33)
    co2 = rng.normal(np.where(occupied, 610, 455), 70, n_rows).clip(394.4, 924.2)
    temp = rng.normal(np.where(occupied, 23.0, 21.4), 1.3, n_rows).clip(18.78, 27.36)
    return pd.DataFrame(
        {
            "illuminance": illuminance.round(2),
            "blinds": blinds,
            "lamps": lamps,
            "rh": rh.round(2),
            "co2": co2.round(1),
            "temp": temp.round(2),
            "occupancy": occupied.astype(int),
        }
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=600)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="data/synthetic_occupancy.csv")
    args = parser.parse_args()
    frame = synthesize(args.rows, args.seed)
    import pathlib

    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False)
    counts = frame["occupancy"].value_counts().to_dict()
    print(f"wrote {len(frame)} rows to {args.out} (label counts {counts})")


if __name__ == "__main__":
    main()
