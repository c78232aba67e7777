"""Binary ball segment format and the optional ball cache.

Layout (little-endian):
    header:    magic "WLKB", version u16, N u64, R u32, |S| u16
    adjacency: N x |S| u64, row-major, BOUNDARY stored as 2**64 - 1
    radii:     N u32

Files carry adjacency and radii only; generator columns follow the group's
declared generator order, which the caller must supply when loading.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .groups import BOUNDARY, CayleyBall, GroupSpec, enumerate_ball

MAGIC = b"WLKB"
VERSION = 1
_BOUNDARY_U64 = np.uint64(2**64 - 1)
_HEADER = struct.Struct("<4sHQIH")


def save_ball(ball: CayleyBall, path: str) -> None:
    n, ns = ball.adjacency.shape
    adj = ball.adjacency.astype(np.int64).copy()
    u = adj.view(np.uint64)
    u[adj == BOUNDARY] = _BOUNDARY_U64
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, ball.radius, ns))
        fh.write(u.astype("<u8").tobytes())
        fh.write(ball.radii.astype("<u4").tobytes())


def load_ball(path: str, group: GroupSpec | None = None) -> CayleyBall:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n, radius, ns = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"not a WLKB file: {path}")
        if version != VERSION:
            raise ValueError(f"unsupported WLKB version {version}")
        if group is not None and len(group.generators) != ns:
            raise ValueError("generator count mismatch between file and group")
        adj_u = np.frombuffer(fh.read(n * ns * 8), dtype="<u8").reshape(n, ns)
        adj = adj_u.astype(np.int64)
        adj[adj_u == _BOUNDARY_U64] = BOUNDARY
        radii = np.frombuffer(fh.read(n * 4), dtype="<u4").astype(np.uint32)
    return CayleyBall(
        group=group,
        radius=radius,
        size=n,
        key_to_index={},
        radii=radii,
        adjacency=adj,
        elements=None,
    )


def cached_ball(group: GroupSpec, radius: int, cache_dir: str | None = None, **kw) -> CayleyBall:
    """Enumerate a ball, or reload adjacency/radii from WALKLAB_CACHE_DIR.

    Cached reloads drop element representations, so callers that need group
    arithmetic (Monte Carlo membership, wall metrics) enumerate directly.
    """
    cache_dir = cache_dir or os.environ.get("WALKLAB_CACHE_DIR")
    if not cache_dir:
        return enumerate_ball(group, radius, **kw)
    os.makedirs(cache_dir, exist_ok=True)
    fname = os.path.join(cache_dir, f"{group.name.replace(':', '_')}_r{radius}.wlkb")
    if os.path.exists(fname):
        return load_ball(fname, group)
    ball = enumerate_ball(group, radius, **kw)
    save_ball(ball, fname)
    return ball
