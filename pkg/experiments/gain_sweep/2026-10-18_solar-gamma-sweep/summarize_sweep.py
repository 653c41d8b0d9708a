"""
Collect the solar gain-sweep traces into one table.

Run after the sweep itself (see experiment_plan.md).
"""

import csv
import re
from pathlib import Path

import numpy as np

from dremkit.sim.trace import load_csv

output_dir = Path("output")
SETTLED = 1e-3


def first_below(values: np.ndarray, threshold: float) -> int:
    hits = np.flatnonzero(values < threshold)
    return int(hits[0]) if hits.size else -1


def main() -> None:
    rows = []
    for path in sorted(output_dir.glob("solar-gamma-*.csv")):
        match = re.search(r"gamma-([0-9.]+)\.csv$", path.name)
        if match is None:
            continue
        header, data = load_csv(path)
        eta_error = data[:, header.index("eta_error")]
        S_error = data[:, header.index("S_error")]
        rows.append(
            {
                "gamma": float(match.group(1)),
                "final_eta_error": eta_error[-1],
                "final_S_error": S_error[-1],
                "settled_at": first_below(eta_error, SETTLED),
                "monotone": bool(np.all(np.diff(eta_error) <= 1e-12 * (1.0 + eta_error[:-1]))),
            }
        )

    rows.sort(key=lambda row: row["gamma"])
    with open(output_dir / "sweep.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]) if rows else ["gamma"])
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(row)


if __name__ == "__main__":
    main()
