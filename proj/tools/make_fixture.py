"""Generate the bundled synthetic price fixture (data/SYNTH.csv).

Log price = gentle linear trend + mean-reverting (Ornstein-Uhlenbeck)
deviation with slowly varying volatility, over the weekdays of 2010-2020,
written in the Yahoo! Finance daily CSV layout. Mean reversion keeps the
final 20% of the series within a few standard deviations of the first 80%.
The prices are synthetic; no market data is redistributed.
"""

import argparse

import numpy as np
import pandas as pd


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/SYNTH.csv")
    ap.add_argument("--seed", type=int, default=20100104)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    dates = pd.bdate_range("2010-01-04", "2020-12-31")
    n = len(dates)
    vol = 0.013 + 0.005 * np.abs(np.sin(np.arange(n) / 300.0))
    theta = 1.0 / 180.0
    eps = rng.standard_normal(n)
    dev = np.zeros(n)
    for t in range(1, n):
        dev[t] = dev[t - 1] * (1.0 - theta) + vol[t] * eps[t]
    close = 40.0 * np.exp(0.00012 * np.arange(n) + dev) / 0.97
    open_ = close * np.exp(0.004 * rng.standard_normal(n))
    high = np.maximum(open_, close) * (1 + np.abs(0.006 * rng.standard_normal(n)))
    low = np.minimum(open_, close) * (1 - np.abs(0.006 * rng.standard_normal(n)))
    adj = close * 0.97
    volume = rng.integers(5_000_000, 50_000_000, size=n)

    df = pd.DataFrame(
        {
            "Date": dates.strftime("%Y-%m-%d"),
            "Open": open_.round(6),
            "High": high.round(6),
            "Low": low.round(6),
            "Close": close.round(6),
            "Adj Close": adj.round(6),
            "Volume": volume,
        }
    )
    df.to_csv(args.out, index=False, lineterminator="\n")


if __name__ == "__main__":
    main()
