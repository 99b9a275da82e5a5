"""
Field and trajectory files.

Binary fields: a 16-byte header (magic ``b"CHCF"``, little-endian uint32
format version, little-endian uint64 value count) followed by the values as
little-endian float64.  CSV fields: one row per node with the node index, its
coordinates and the value.
"""
import csv
import os
import struct

import numpy as np

MAGIC = b"CHCF"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def write_field_binary(path, values):
    values = np.ascontiguousarray(values, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, values.size))
        fh.write(values.tobytes())


def read_field_binary(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, length = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != length:
        raise ValueError(f"{path}: header announces {length} values, found {data.size}")
    return data.astype(float)


def _coords(geom, boundary):
    return geom.bnd_coords if boundary else geom.coords


def write_field_csv(path, geom, values, boundary=False):
    values = np.asarray(values, dtype=float).ravel()
    coords = _coords(geom, boundary)
    if values.size != coords.shape[0]:
        raise ValueError("field size does not match the geometry")
    names = ["x", "y"][: coords.shape[1]]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["node", *names, "value"])
        for k, (c, v) in enumerate(zip(coords, values)):
            wr.writerow([k, *(repr(float(a)) for a in c), repr(float(v))])


def read_field_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "node" or rows[0][-1] != "value":
        raise ValueError(f"{path}: expected a 'node, ..., value' header")
    body = sorted(rows[1:], key=lambda r: int(r[0]))
    return np.array([float(r[-1]) for r in body])


def load_field(path, geom=None, boundary=False):
    """Read a ``.csv`` or binary field and check its size against ``geom``."""
    if str(path).endswith(".csv"):
        v = read_field_csv(path)
    else:
        v = read_field_binary(path)
    if geom is not None:
        expected = geom.nb if boundary else geom.n
        if v.size != expected:
            raise ValueError(f"{path}: {v.size} values, geometry expects {expected}")
    return v


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_trajectory(out_dir, traj, snapshots=True):
    """Per-level scalars as ``trajectory.csv`` and each ``y^n`` as a binary field."""
    os.makedirs(out_dir, exist_ok=True)
    write_table(os.path.join(out_dir, "trajectory.csv"),
                ["t", "mass", "energy", "min_y", "max_y"], traj.scalar_table())
    if snapshots:
        sdir = os.path.join(out_dir, "snapshots")
        os.makedirs(sdir, exist_ok=True)
        for n, y in enumerate(traj.y):
            write_field_binary(os.path.join(sdir, f"y_{n:05d}.bin"), y)
    write_field_csv(os.path.join(out_dir, "final_state.csv"), traj.geom, traj.y[-1])


def write_control(out_dir, geom, times, values, stem="control"):
    """Control time series: flat binary plus CSV rows (level, t, node, coords, value)."""
    values = np.asarray(values, dtype=float)
    write_field_binary(os.path.join(out_dir, stem + ".bin"), values)
    coords = geom.bnd_coords
    names = ["x", "y"][: coords.shape[1]]
    with open(os.path.join(out_dir, stem + ".csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["level", "t", "node", *names, "value"])
        for n, (t, row) in enumerate(zip(times, values)):
            for k, (c, v) in enumerate(zip(coords, row)):
                wr.writerow([n, repr(float(t)), k, *(repr(float(a)) for a in c), repr(float(v))])
