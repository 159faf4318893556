#!/usr/bin/env python3
"""Generate the synthetic reference timelines under data/timelines/.

exp1/exp2/exp3 last 180 s, 60 s and 15 s. Each mixes a periodic SLAM-like
camera stream, bursty sign frames, sporadic speech and an IMU whose
movement phases take a larger fraction of the longer runs. poc is a short
still/moving/still scenario for inspecting the speech weight.

Output is deterministic: every run writes identical files.
"""

import argparse
import json
import math
import random
from pathlib import Path

WORDS = ["yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"]


def movement_segments(rng, duration_ms, moving_fraction):
    """Alternating (start, end, moving) segments covering [0, duration)."""
    segs = []
    t = 0
    moving = False
    while t < duration_ms:
        still_len = rng.uniform(4000, 6000)
        if moving:
            length = still_len * moving_fraction / (1.0 - moving_fraction)
        else:
            length = still_len
        end = min(duration_ms, t + int(round(length / 100.0)) * 100)
        if end <= t:
            end = t + 100
        segs.append((t, end, moving))
        t = end
        moving = not moving
    return segs


def is_moving(segs, t):
    for start, end, moving in segs:
        if start <= t < end:
            return moving
    return False


def imu_payload(rng, moving):
    if moving:
        a = rng.uniform(1.0, 2.5)
        phi = rng.uniform(0, 2 * math.pi)
        accel = [a * math.cos(phi), a * math.sin(phi), rng.uniform(-0.1, 0.1)]
    else:
        accel = [rng.uniform(-0.1, 0.1) for _ in range(3)]
    return {"accel": [round(x, 3) for x in accel]}


def build(name, duration_ms, moving_fraction, seed, segments=None):
    rng = random.Random(seed)
    segs = segments or movement_segments(rng, duration_ms, moving_fraction)
    entries = []

    def add(t, stream, payload, work_us=None, truth=None):
        e = {"t_ms": int(t), "stream": stream, "payload": payload}
        if work_us is not None:
            e["work_us"] = int(work_us)
        if truth is not None:
            e["ground_truth"] = truth
        entries.append(e)

    add(0, "slam/tracking_lost", {"lost": False})

    for t in range(0, duration_ms, 100):
        moving = is_moving(segs, t)
        add(t, "imu", imu_payload(rng, moving), truth={"moving": moving})
        add(t, "camera", {"frame": t // 100}, work_us=rng.randint(120000, 150000))
    for t in range(0, duration_ms, 200):
        add(t, "lidar", {"ranges": [round(rng.uniform(0.2, 8.0), 2) for _ in range(4)]})

    # Movement can make the tracker lose its map for a moment.
    for start, end, moving in segs:
        if moving and rng.random() < 0.4 and end - start > 1500:
            lost_at = start + rng.randint(2, (end - start) // 100 - 10) * 100
            add(lost_at, "slam/tracking_lost", {"lost": True})
            add(min(end, lost_at + rng.randint(5, 15) * 100), "slam/tracking_lost", {"lost": False})

    # Side camera: 1 Hz idle frames plus bursts while passing signs.
    burst_times = set()
    t = rng.uniform(2000, 6000)
    while t < duration_ms:
        for k in range(rng.randint(3, 8)):
            bt = int(t) // 100 * 100 + 200 * k
            if bt < duration_ms:
                burst_times.add(bt)
        t += rng.uniform(3000, 8000)
    for t in range(0, duration_ms, 100):
        if t in burst_times:
            add(t, "side_camera", {"signs": rng.randint(1, 2)}, work_us=rng.randint(60000, 90000))
        elif t % 1000 == 500:
            add(t, "side_camera", {"signs": 0}, work_us=rng.randint(60000, 90000))

    # Speech arrives sporadically whether or not the robot moves.
    t = rng.uniform(300, 1000)
    while t < duration_ms:
        word = rng.choice(WORDS)
        add(int(t), "mic", {"samples": 16000}, work_us=rng.randint(700000, 900000),
            truth={"word": word})
        t += rng.uniform(400, 933)

    order = {"slam/tracking_lost": 0, "imu": 1, "lidar": 2, "camera": 3, "side_camera": 4, "mic": 5}
    entries.sort(key=lambda e: (e["t_ms"], order[e["stream"]]))
    return {"name": name, "duration_ms": duration_ms, "entries": entries}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parent.parent / "data" / "timelines")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    timelines = [
        build("exp1", 180_000, 0.45, seed=11),
        build("exp2", 60_000, 0.30, seed=22),
        build("exp3", 15_000, 0.10, seed=33),
        build("poc", 20_000, 0.0, seed=44,
              segments=[(0, 5300, False), (5300, 12300, True), (12300, 20000, False)]),
    ]
    for tl in timelines:
        path = args.out / f"{tl['name']}.json"
        with path.open("w") as f:
            json.dump(tl, f, separators=(",", ":"))
            f.write("\n")
        print(f"{path}: {len(tl['entries'])} entries")


if __name__ == "__main__":
    main()
