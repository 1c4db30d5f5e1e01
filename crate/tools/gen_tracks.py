#!/usr/bin/env python3
"""Generate the scene files under tracks/.

Deterministic: re-running overwrites the same files with identical bytes.
"""
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
TRACKS = os.path.join(HERE, "..", "tracks")

ARC_STEPS = 8  # segments per 90-degree corner arc


def fmt(x: float) -> str:
    return f"{x:.12g}"


def rounded_rect(cx0, cy0, cx1, cy1, radius):
    """Closed CCW polyline around four corner centers with a given radius."""
    pts = []

    def arc(cx, cy, a0, a1):
        for i in range(ARC_STEPS + 1):
            a = a0 + (a1 - a0) * i / ARC_STEPS
            pts.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))

    # Bottom straight runs left to right, then CCW through the corners.
    arc(cx1, cy0, -math.pi / 2, 0.0)
    arc(cx1, cy1, 0.0, math.pi / 2)
    arc(cx0, cy1, math.pi / 2, math.pi)
    arc(cx0, cy0, math.pi, 1.5 * math.pi)
    pts.append(pts[0])  # close the loop
    return pts


def offset_walls(spine, radii, half_width):
    """Offset a filleted closed CCW polygon centerline by +-half_width.

    spine: polygon vertices; radii: fillet radius per vertex. Returns the
    (left, right) wall polylines. Fillets keep walls tangent-continuous, so
    each offset is itself a closed polyline.
    """
    n = len(spine)
    left, right = [], []

    def unit(dx, dy):
        d = math.hypot(dx, dy)
        return dx / d, dy / d

    for i in range(n):
        p_prev = spine[(i - 1) % n]
        p = spine[i]
        p_next = spine[(i + 1) % n]
        ux_in, uy_in = unit(p[0] - p_prev[0], p[1] - p_prev[1])
        ux_out, uy_out = unit(p_next[0] - p[0], p_next[1] - p[1])
        cross = ux_in * uy_out - uy_in * ux_out
        turn = math.atan2(cross, ux_in * ux_out + uy_in * uy_out)
        r = radii[i]
        # Fillet arc center sits off the vertex along the angle bisector.
        t = r * math.tan(abs(turn) / 2.0)
        side = 1.0 if turn > 0 else -1.0  # left turn: center on the left
        cx = p[0] - ux_in * t + side * -uy_in * r
        cy = p[1] - uy_in * t + side * ux_in * r
        a_in = math.atan2(p[1] - t * uy_in - cy, p[0] - t * ux_in - cx)
        steps = max(2, round(ARC_STEPS * abs(turn) / (math.pi / 2)))
        for k in range(steps + 1):
            a = a_in + turn * k / steps
            for pts, off in ((left, half_width), (right, -half_width)):
                rr = r - side * off
                pts.append((cx + rr * math.cos(a), cy + rr * math.sin(a)))
    left.append(left[0])
    right.append(right[0])
    return left, right


def polyline_segments(pts):
    lines = []
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if abs(x0 - x1) < 1e-12 and abs(y0 - y1) < 1e-12:
            continue
        lines.append(f"segment {fmt(x0)} {fmt(y0)} {fmt(x1)} {fmt(y1)}")
    return lines


def corridor_oval():
    # Centerline: rounded rectangle with corner centers spanning 9 x 2 m
    # and a 2.5 m corner radius; corridor width 2.6 m. Three static cones
    # sit on the straights, offset toward the inner wall so the PID line
    # (0.8 m off the outer wall) stays clear.
    cx0, cy0, cx1, cy1 = 2.5, 2.5, 11.5, 4.5
    half_width = 1.3
    outer = rounded_rect(cx0, cy0, cx1, cy1, 2.5 + half_width)
    inner = rounded_rect(cx0, cy0, cx1, cy1, 2.5 - half_width)
    lines = [
        "# Closed-loop racetrack: rounded-rectangle corridor, 2.6 m wide,",
        "# furnished with three static cones on the straights. Race",
        "# direction is counterclockwise; the finish line crosses the",
        "# bottom straight with its forward normal pointing along +x.",
        "name corridor_oval",
        "bounds -2 -2 16 9",
        "start 4.3 0 0",
        "finish 4 1.3 4 -1.3",
        "circle 6.5 0.45 0.3",
        "circle 9 6.35 0.3",
        "circle 7 6.7 0.3",
    ]
    lines += polyline_segments(outer)
    lines += polyline_segments(inner)
    return lines


def training():
    # Closed circuit with mixed left/right corners of varying radii: a
    # rounded rectangle with a slot cut into the top edge. Counterclockwise
    # travel takes six left corners and two right corners.
    spine = [
        (0.0, 0.0),
        (14.0, 0.0),
        (14.0, 8.0),
        (9.0, 8.0),
        (9.0, 4.0),
        (5.0, 4.0),
        (5.0, 8.0),
        (0.0, 8.0),
    ]
    radii = [2.0, 2.2, 1.8, 1.6, 1.6, 1.6, 1.6, 2.0]
    left, right = offset_walls(spine, radii, 1.3)
    lines = [
        "# Closed-loop training circuit: 2.6 m corridor around a slotted",
        "# rectangle centerline, mixing six left and two right corners with",
        "# radii from 1.6 to 2.2 m. Counterclockwise; the finish line",
        "# crosses the bottom straight with its forward normal along +x.",
        "name training",
        "bounds -2 -2 16 10",
        "start 3 0 0",
        "finish 2.7 1.3 2.7 -1.3",
    ]
    lines += polyline_segments(left)
    lines += polyline_segments(right)
    return lines


def corridor_dynamic():
    return [
        "# Open-ended corridor with one crossing pedestrian-like obstacle:",
        "# a 0.3 m circle moving +y at 1 m/s, wrapping across the corridor.",
        "name corridor_dynamic",
        "bounds 0 -1.5 24 1.5",
        "open_bounds",
        "wrap_circles",
        "start 1.5 0 0",
        "finish 20 1.5 20 -1.5",
        "circle 10 -1 0.3 0 1",
        "segment 0 -1.5 24 -1.5",
        "segment 0 1.5 24 1.5",
    ]


def write(name, lines):
    path = os.path.join(TRACKS, name)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(lines)} lines)")


def main():
    os.makedirs(TRACKS, exist_ok=True)
    write("corridor_oval.scene", corridor_oval())
    write("training.scene", training())
    write("corridor_dynamic.scene", corridor_dynamic())


if __name__ == "__main__":
    main()
