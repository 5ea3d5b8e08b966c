"""Writes germany_cpi_style.csv: a synthetic monthly price index shaped like
FRED's CPALTT01DEM661S export (header, date format, 2015 = 100 scaling).

It is not the real series. Monthly inflation follows an AR(1) around a slowly
drifting mean, plus a seasonal pattern and heteroskedastic noise, so the
index has the trend, seasonality and volatility clustering of consumer
prices. Run with `python3 make_cpi_style.py` from this directory.
"""

import math
import random

rng = random.Random(19600101)
start_year, years = 1960, 64
months = 12 * years

level = 0.0
infl = 0.003
var = 1e-6
log_index = []
for t in range(months):
    year = start_year + t // 12
    # Higher inflation in the 1970s and early 1990s, subdued after 2000.
    target = 0.0045 if 1970 <= year < 1982 else 0.0030 if 1990 <= year < 1994 else 0.0015
    if year >= 2021:
        target = 0.0045
    shock = rng.gauss(0.0, 1.0) * math.sqrt(var)
    var = 2e-8 + 0.10 * shock * shock + 0.85 * var
    infl = target + 0.8 * (infl - target) + shock
    seasonal = 0.0015 * math.sin(2 * math.pi * (t % 12) / 12 - 1.0)
    level += infl + seasonal
    log_index.append(level)

base = [math.exp(v) for i, v in enumerate(log_index) if start_year + i // 12 == 2015]
scale = 100.0 / (sum(base) / len(base))

with open("germany_cpi_style.csv", "w", newline="\n") as f:
    f.write("DATE,CPALTT01DEM661S\n")
    for t, v in enumerate(log_index):
        year, month = start_year + t // 12, t % 12 + 1
        f.write(f"{year:04d}-{month:02d}-01,{math.exp(v) * scale:.5f}\n")
