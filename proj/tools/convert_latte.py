#!/usr/bin/env python3
"""Convert LaTTe-style records into ovita dataset samples.

A LaTTe record looks like

    {"input_traj": [[x, y, z, v], ...], "output_traj": [...], "text": "...",
     "obj_names": ["cup", ...], "obj_poses": [[x, y, z], ...], ...}

LaTTe objects are points, so every object becomes a cuboid with the
dimensions given by --dimensions (or per-object "obj_dims" when present).
The input file may hold one record or a list of them.
"""

import argparse
import json
import math
import pathlib
import re
import sys


class ConversionError(Exception):
    pass


def _vec(value, n, what):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConversionError(f"{what}: expected {n} values")
    out = []
    for k, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConversionError(f"{what}[{k}]: expected a finite number")
        out.append(float(x))
    return out


def convert_record(rec, dimensions, profile=None):
    if not isinstance(rec, dict):
        raise ConversionError("record: expected an object")
    for key in ("input_traj", "text"):
        if key not in rec:
            raise ConversionError(f"record: missing {key}")
    traj = rec["input_traj"]
    if not isinstance(traj, list) or len(traj) < 2:
        raise ConversionError("input_traj: expected at least 2 waypoints")
    waypoints = []
    for i, w in enumerate(traj):
        w = _vec(w, 4, f"input_traj[{i}]")
        if w[3] < 0:
            # LaTTe stores signed velocity magnitudes in a few records.
            w[3] = abs(w[3])
        waypoints.append(w)

    names = rec.get("obj_names", [])
    poses = rec.get("obj_poses", [])
    dims = rec.get("obj_dims")
    if len(names) != len(poses):
        raise ConversionError("obj_names and obj_poses differ in length")
    objects = []
    seen = {}
    for k, (name, pose) in enumerate(zip(names, poses)):
        if not isinstance(name, str) or not name.strip():
            raise ConversionError(f"obj_names[{k}]: expected a non-empty string")
        label = name.strip()
        # Labels must be unique; repeated names get a numeric suffix.
        if label in seen:
            seen[label] += 1
            label = f"{label}_{seen[label]}"
        else:
            seen[label] = 1
        d = _vec(dims[k], 3, f"obj_dims[{k}]") if dims else list(dimensions)
        if min(d) <= 0:
            raise ConversionError(f"object {label}: dimensions must be positive")
        obj = {"label": label, "center": _vec(pose, 3, f"obj_poses[{k}]"), "dimensions": d}
        if "obj_classes" in rec and k < len(rec["obj_classes"]):
            obj["properties"] = {"class": str(rec["obj_classes"][k])}
        objects.append(obj)

    text = rec["text"]
    if not isinstance(text, str) or not text.strip():
        raise ConversionError("text: expected a non-empty string")
    sample = {
        "instruction": text.strip(),
        "trajectory": {"frame": "world", "waypoints": waypoints},
        "scene": {"description": rec.get("description"), "objects": objects},
    }
    if profile is not None:
        sample["profile"] = profile
    return sample


def sample_name(rec, index):
    raw = rec.get("id", rec.get("text", "sample")) if isinstance(rec, dict) else "sample"
    slug = re.sub(r"[^A-Za-z0-9]+", "_", str(raw)).strip("_").lower()[:40] or "sample"
    return f"latte_{index:03d}_{slug}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("input", type=pathlib.Path, help="LaTTe JSON file (one record or a list)")
    ap.add_argument("--out", type=pathlib.Path, required=True, help="output directory")
    ap.add_argument("--dimensions", type=float, nargs=3, default=[0.1, 0.1, 0.1], metavar=("DX", "DY", "DZ"),
                    help="cuboid size for point objects (default 0.1 m cube)")
    ap.add_argument("--profile", type=pathlib.Path, help="robot profile JSON to embed in every sample")
    args = ap.parse_args(argv)

    try:
        data = json.loads(args.input.read_text())
        profile = json.loads(args.profile.read_text()) if args.profile else None
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    records = data if isinstance(data, list) else [data]
    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for i, rec in enumerate(records):
        try:
            sample = convert_record(rec, args.dimensions, profile)
        except ConversionError as e:
            print(f"record {i}: {e}", file=sys.stderr)
            failed += 1
            continue
        path = args.out / f"{sample_name(rec, i)}.json"
        path.write_text(json.dumps(sample, indent=2) + "\n")
        print(path)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
