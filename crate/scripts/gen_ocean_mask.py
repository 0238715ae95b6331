"""Builds the bundled 1-degree ocean mask from the global-land-mask package.

A cell is ocean when any point of a 5x5 sample lattice inside it is ocean, so
coastal cells count as ocean and only clearly inland cells are land.
"""
import numpy as np
from global_land_mask import globe

OUT = "crates/core/data/ocean_mask_1deg.txt"

offsets = (np.arange(5) + 0.5) / 5.0
lines = ["OCEANMASK v1 res=1deg rows=180 cols=360 row0=90N col0=180W ocean=1 land=0"]
for r in range(180):
    lat_top = 90.0 - r
    lats = lat_top - offsets
    row = []
    for c in range(360):
        lon_left = -180.0 + c
        lons = lon_left + offsets
        la, lo = np.meshgrid(lats, lons)
        ocean = globe.is_ocean(la.ravel(), lo.ravel()).any()
        row.append("1" if ocean else "0")
    lines.append("".join(row))
with open(OUT, "w") as f:
    f.write("\n".join(lines) + "\n")
