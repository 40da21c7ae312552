"""Build the bundled 63-channel 10-10 montage asset.

Positions are constructed on an idealized unit sphere with the classic
proportional-arc scheme: the vertex (Cz) on the polar axis, midline and
ear-to-ear chains stepped in 18-degree (10%) increments, a circumferential
ring at 72 degrees colatitude stepped in 36-degree increments, and interior
rows interpolated along the sphere circle through (left endpoint, midline
point, right endpoint). The inferior *9/*10 electrodes sit on the 90-degree
circle beneath their *7/*8 counterparts.

Convention: elevation = colatitude from the vertex axis (degrees), azimuth =
counterclockwise from the nasion axis (degrees), left hemisphere positive.
Run from the repository root:  python scripts/make_montage_asset.py
"""

import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "wmfc" / "assets" / "montage_1010_63.csv"


def sph_to_xyz(colat_deg, azim_deg):
    t, p = math.radians(colat_deg), math.radians(azim_deg)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def xyz_to_sph(v):
    v = v / np.linalg.norm(v)
    colat = math.degrees(math.acos(np.clip(v[2], -1, 1)))
    azim = math.degrees(math.atan2(v[1], v[0])) % 360.0
    return colat, azim


def arc_point(m, a, frac):
    """Point at `frac` of the sphere-circle arc from m toward a (third point = mirror of a)."""
    b = np.array([a[0], -a[1], a[2]])  # right-hemisphere mirror closes the circle
    # circumcenter of the circle through a, m, b
    n = np.cross(m - a, b - a)
    n = n / np.linalg.norm(n)
    mid_am, mid_bm = (a + m) / 2, (b + m) / 2
    # solve center = mid_am + s*(dir_am) constrained to the plane; use least squares
    rows = [n, m - a, m - b]
    rhs = [n @ m, (m - a) @ mid_am, (m - b) @ mid_bm]
    center = np.linalg.solve(np.array(rows), np.array(rhs))
    u = m - center
    w = a - center
    gamma = math.atan2(np.linalg.norm(np.cross(u, w)), float(u @ w))
    axis = np.cross(u, w)
    axis = axis / np.linalg.norm(axis)
    # Rodrigues rotation of u about axis by frac * gamma
    th = frac * gamma
    rotated = (
        u * math.cos(th)
        + np.cross(axis, u) * math.sin(th)
        + axis * float(axis @ u) * (1 - math.cos(th))
    )
    return center + rotated


def main():
    positions: dict[str, tuple[float, float]] = {}

    midline = {
        "Fpz": (72, 0), "AFz": (54, 0), "Fz": (36, 0), "FCz": (18, 0), "Cz": (0, 0),
        "CPz": (18, 180), "Pz": (36, 180), "POz": (54, 180), "Oz": (72, 180),
    }
    ring_left = {
        "Fp1": 18, "AF7": 36, "F7": 54, "FT7": 72, "T7": 90,
        "TP7": 108, "P7": 126, "PO7": 144, "O1": 162,
    }
    positions.update(midline)
    for name, az in ring_left.items():
        positions[name] = (72, az)
        right = name.replace("7", "8").replace("1", "2")
        positions[right] = (72, (360 - az) % 360)
    for name, az in {"FT9": 72, "TP9": 108, "PO9": 144}.items():
        positions[name] = (90, az)
        positions[name.replace("9", "10")] = (90, (360 - az) % 360)

    rows = {
        # row: (midline label, left endpoint, [(label, fraction from midline), ...])
        "AF": ("AFz", "AF7", [("AF3", 0.5)]),
        "F": ("Fz", "F7", [("F1", 0.25), ("F3", 0.5), ("F5", 0.75)]),
        "FC": ("FCz", "FT7", [("FC1", 0.25), ("FC3", 0.5), ("FC5", 0.75)]),
        "C": ("Cz", "T7", [("C1", 0.25), ("C3", 0.5), ("C5", 0.75)]),
        "CP": ("CPz", "TP7", [("CP1", 0.25), ("CP3", 0.5), ("CP5", 0.75)]),
        "P": ("Pz", "P7", [("P1", 0.25), ("P3", 0.5), ("P5", 0.75)]),
        "PO": ("POz", "PO7", [("PO3", 0.5)]),
    }
    swap = str.maketrans("13579", "24680")
    for mid_label, left_label, members in rows.values():
        m = sph_to_xyz(*positions[mid_label])
        a = sph_to_xyz(*positions[left_label])
        for label, frac in members:
            left_pt = arc_point(m, a, frac)
            positions[label] = xyz_to_sph(left_pt)
            mirrored = left_pt.copy()
            mirrored[1] = -mirrored[1]
            positions[label.translate(swap)] = xyz_to_sph(mirrored)

    # The 63 recorded channels: a standard 64-site active cap minus the Fz
    # reference (Fpz/AFz/FCz are construction anchors only, not cap sites).
    order = [
        "Fp1", "Fp2",
        "AF7", "AF3", "AF4", "AF8",
        "F7", "F5", "F3", "F1", "F2", "F4", "F6", "F8",
        "FT9", "FT7", "FC5", "FC3", "FC1", "FC2", "FC4", "FC6", "FT8", "FT10",
        "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8",
        "TP9", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "TP10",
        "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8",
        "PO9", "PO7", "PO3", "POz", "PO4", "PO8", "PO10", "O1", "Oz", "O2",
    ]
    assert len(order) == 63 and len(set(order)) == 63

    lines = [
        "# 63-channel 10-10 montage on an idealized sphere (64-site cap minus the Fz reference).",
        "# Columns: label, elevation_deg (colatitude from the vertex axis),",
        "# azimuth_deg (counterclockwise from the nasion axis; left hemisphere 0-180).",
    ]
    for label in order:
        colat, azim = positions[label]
        lines.append(f"{label},{colat:.4f},{azim:.4f}")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT} with {len(order)} electrodes")


if __name__ == "__main__":
    main()
