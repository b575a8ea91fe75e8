#!/usr/bin/env python3
"""Regenerates the road fixtures in this directory."""
import math
import pathlib

HERE = pathlib.Path(__file__).resolve().parent


def pieces_to_road(pieces, ds, half_width, kappa0=0.0):
    """pieces: (length, kappa_end); curvature ramps linearly across each piece."""
    rows = [(0.0, kappa0)]
    s, k = 0.0, kappa0
    for length, k_end in pieces:
        n = round(length / ds)
        for i in range(1, n + 1):
            rows.append((s + i * ds, k + (k_end - k) * i / n))
        s += n * ds
        k = k_end
    return [(round(si, 9), ki, half_width, half_width) for si, ki in rows]


def write(name, rows):
    with open(HERE / name, "w", newline="\n") as f:
        f.write("s,kappa,w_left,w_right\n")
        for s, k, wl, wr in rows:
            f.write(f"{s:.6f},{k:.12g},{wl:g},{wr:g}\n")


def main():
    ds = 0.5
    write("ring_r20.csv", pieces_to_road([(300.0, 1 / 20)], ds, 5.0, kappa0=1 / 20))

    r = 12.0
    write("uturn.csv", pieces_to_road(
        [(40.0, 0.0), (15.0, 1 / r), (math.pi * r - 15.0, 1 / r), (15.0, 0.0), (160.0, 0.0)], ds, 5.0))

    # Shaped like recorded road data: straights, clothoids, arcs of both
    # signs and an S-bend, long enough for a 100 m horizon plus driving.
    write("road_data.csv", pieces_to_road(
        [(30.0, 0.0), (20.0, 1 / 40), (40.0, 1 / 40), (20.0, 0.0), (25.0, 0.0),
         (15.0, -1 / 30), (30.0, -1 / 30), (20.0, 1 / 25), (30.0, 1 / 25), (15.0, 0.0),
         (40.0, 0.0), (25.0, -1 / 60), (40.0, -1 / 60), (25.0, 0.0), (120.0, 0.0)], ds, 4.0))


if __name__ == "__main__":
    main()
