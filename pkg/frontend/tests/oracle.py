"""Offline reference for the round-trip suite.

Reads {"stroke": [{"t","u","v"}...], "config": {...}} from stdin, replays the
stroke through the reconstruction pipeline, and prints the wire lines the
service is expected to produce plus sampled smooth-curve values for checking
the client-side curve evaluation.
"""
import json
import sys

import numpy as np

from airtrace.service import Session, config_from_message, encode_message, replay_session
from airtrace.smoothing import FourierCurve


def main() -> None:
    payload = json.load(sys.stdin)
    config = config_from_message({"type": "config", **payload.get("config", {})})
    stroke = [(p["t"], p["u"], p["v"]) for p in payload["stroke"]]

    replay = replay_session(stroke, config)
    skipped = {int(s) for s in replay.skipped}
    by_step = {int(s): i for i, s in enumerate(replay.steps)}
    lines = []
    for step in range(1, len(stroke) + 1):
        t = step * config.dt  # replies carry the exact grid time
        if step in skipped:
            msg = {"type": "skip", "t": t, "reason": "uninformative step"}
        else:
            i = by_step[step]
            msg = {
                "type": "recon_point",
                "t": t,
                "x1": float(replay.points[i, 0]),
                "x2": float(replay.points[i, 1]),
                "x3": float(replay.points[i, 2]),
                "indicator": float(replay.indicators[i]),
            }
        lines.append(encode_message(msg).decode().rstrip("\n"))

    # finalize through the session machinery; sample each smoothed curve so
    # the client's evaluator can be compared against this implementation
    session = Session(config)
    for t, u, v in stroke:
        session.ingest(t, u, v)
    final_msgs = session.finalize()
    final_lines = [encode_message(m).decode().rstrip("\n") for m in final_msgs]

    curves = []
    for msg in final_msgs:
        if msg["type"] != "smooth":
            continue
        c = msg["coeffs"]
        curve = FourierCurve(
            a0=np.asarray(c["a0"], dtype=np.float64),
            a=np.asarray(c["a"], dtype=np.float64).reshape(c["order"], 3),
            b=np.asarray(c["b"], dtype=np.float64).reshape(c["order"], 3),
            duration=c["duration"],
            t_offset=c["t_offset"],
            t_scale=c["t_scale"],
        )
        n = 16
        times = [c["t_offset"] + c["duration"] * j / (n * c["t_scale"]) for j in range(1, n + 1)]
        curves.append(
            {
                "segment": msg["segment"],
                "times": times,
                "values": curve.evaluate(np.asarray(times)).tolist(),
            }
        )

    json.dump({"lines": lines, "final_lines": final_lines, "curves": curves}, sys.stdout)


if __name__ == "__main__":
    main()
