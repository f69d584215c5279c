"""Regenerate data/credit_standin.csv, a small synthetic stand-in with the
same schema as the public credit-card default dataset. Used by tests and
docs when the real file is not available; values are fabricated."""

import csv
import os

import numpy as np

N_ROWS = 1_000
OUT = os.path.join(os.path.dirname(__file__), "..", "data", "credit_standin.csv")

COLUMNS = (
    ["ID", "LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE"]
    + ["PAY_0"] + [f"PAY_{i}" for i in range(2, 7)]
    + [f"BILL_AMT{i}" for i in range(1, 7)]
    + [f"PAY_AMT{i}" for i in range(1, 7)]
    + ["default.payment.next.month"]
)


def main() -> None:
    rng = np.random.Generator(np.random.PCG64(20260819))
    rows = []
    for i in range(N_ROWS):
        limit = int(rng.choice([10, 20, 50, 80, 120, 200, 360, 500]) * 1000)
        person = [i + 1, limit, int(rng.integers(1, 3)), int(rng.integers(1, 5)),
                  int(rng.integers(1, 4)), int(rng.integers(21, 61))]
        pay_status = [int(rng.integers(-2, 4)) for _ in range(6)]
        # Common factor ties bills and payments so the columns correlate.
        habit = rng.lognormal(mean=0.0, sigma=0.6)
        bills = []
        for _ in range(6):
            if rng.random() < 0.03:
                bills.append(-int(rng.integers(1, 3000)))
            elif rng.random() < 0.08:
                bills.append(0)
            else:
                bills.append(int(habit * rng.lognormal(mean=8.2, sigma=0.9)))
        pays = []
        for _ in range(6):
            if rng.random() < 0.18:
                pays.append(0)
            else:
                pays.append(int(habit * rng.lognormal(mean=6.8, sigma=1.0)) + 1)
        label = int(rng.random() < 0.22)
        rows.append(person + pay_status + bills + pays + [label])

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
