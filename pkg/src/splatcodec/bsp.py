"""Hierarchical BSP partition of Gaussian centres and the shell-restricted renderer.

Leaves are axis-aligned blocks ``(x1, y1, x2, y2)`` tiling ``[0, 1]^2``. Each
block owns a *shell*: the block grown by a quarter of its own extent on every
side, clipped to the domain. Pixels in a block are rendered from the
Gaussians whose centres fall inside its shell.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .gaussian import GaussianSet
from .render import DEFAULT_K, EPS_NORM, EmptySetError, pixel_centers

logger = logging.getLogger(__name__)

SHELL_GROWTH = 0.25


class StalePartitionError(ValueError):
    """The partition was built for a different Gaussian set."""


@dataclass
class BspPartition:
    blocks: np.ndarray
    members: list
    shells: np.ndarray
    shell_offsets: np.ndarray
    shell_members: np.ndarray
    n_max: int
    n_gaussians: int
    node_axis: np.ndarray
    node_cut: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_leaf: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    def shell(self, k: int) -> np.ndarray:
        return self.shell_members[self.shell_offsets[k]:self.shell_offsets[k + 1]]

    def candidate_counts(self) -> np.ndarray:
        return np.diff(self.shell_offsets)


def shell_rects(blocks: np.ndarray) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=np.float64).reshape(-1, 4)
    ext = SHELL_GROWTH * (blocks[:, 2:4] - blocks[:, 0:2])
    lo = np.clip(blocks[:, 0:2] - ext, 0.0, 1.0)
    hi = np.clip(blocks[:, 2:4] + ext, 0.0, 1.0)
    return np.concatenate([lo, hi], axis=1)


def _shell_membership(shells: np.ndarray, means: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # CSR lists of Gaussian indices (ascending) whose centre lies in each closed shell
    order = np.argsort(means[:, 0], kind="stable")
    su = means[order, 0]
    counts = np.empty(shells.shape[0], dtype=np.int64)
    chunks = []
    for k, (x1, y1, x2, y2) in enumerate(shells):
        lo = np.searchsorted(su, x1, side="left")
        hi = np.searchsorted(su, x2, side="right")
        cand = order[lo:hi]
        v = means[cand, 1]
        sel = np.sort(cand[(v >= y1) & (v <= y2)])
        counts[k] = sel.size
        chunks.append(sel)
    offsets = np.zeros(shells.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    members = np.concatenate(chunks).astype(np.int64) if chunks else np.zeros(0, dtype=np.int64)
    return offsets, members


def _locate_tree(blocks: np.ndarray):
    """Flattened guillotine tree over the positive-area blocks.

    Zero-area blocks (from coincident centres) contain no point under the
    half-open rule and are left out of the lookup structure.
    """
    area_ok = (blocks[:, 2] > blocks[:, 0]) & (blocks[:, 3] > blocks[:, 1])
    axis, cut, left, right, leaf = [], [], [], [], []

    def new_node():
        axis.append(-1)
        cut.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf.append(-1)
        return len(axis) - 1

    root = new_node()
    stack = [(root, np.flatnonzero(area_ok), 0)]
    while stack:
        node, ids, depth = stack.pop()
        if ids.size == 1:
            leaf[node] = int(ids[0])
            continue
        found = None
        for ax in (depth % 2, 1 - depth % 2):
            lo_c = blocks[ids, ax]
            hi_c = blocks[ids, ax + 2]
            order = np.argsort(lo_c, kind="stable")
            lo_s, hi_s = lo_c[order], hi_c[order]
            prefmax = np.maximum.accumulate(hi_s)
            j = np.arange(1, ids.size)
            ok = (lo_s[j] > lo_s[j - 1]) & (prefmax[j - 1] <= lo_s[j])
            if ok.any():
                valid = j[ok]
                best = valid[np.argmin(np.abs(valid - ids.size / 2))]
                found = (ax, lo_s[best], ids[order[:best]], ids[order[best:]])
                break
        if found is None:
            raise ValueError("blocks do not form a guillotine partition")
        ax, c, lids, rids = found
        axis[node] = ax
        cut[node] = c
        ln, rn = new_node(), new_node()
        left[node], right[node] = ln, rn
        stack.append((ln, lids, depth + 1))
        stack.append((rn, rids, depth + 1))
    return (
        np.asarray(axis, dtype=np.int64),
        np.asarray(cut, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(leaf, dtype=np.int64),
    )


def _assemble(blocks, members, means, n_max) -> BspPartition:
    blocks = np.asarray(blocks, dtype=np.float64).reshape(-1, 4)
    shells = shell_rects(blocks)
    offsets, smembers = _shell_membership(shells, means)
    axis, cut, left, right, leaf = _locate_tree(blocks)
    return BspPartition(
        blocks=blocks,
        members=members,
        shells=shells,
        shell_offsets=offsets,
        shell_members=smembers,
        n_max=n_max,
        n_gaussians=means.shape[0],
        node_axis=axis,
        node_cut=cut,
        node_left=left,
        node_right=right,
        node_leaf=leaf,
    )


def build_partition(gs: GaussianSet, n_max: int) -> BspPartition:
    """Split ``[0, 1]^2`` until no leaf holds more than ``n_max`` centres.

    Splits alternate by depth, vertical line first. Members are ordered by
    (coordinate, index) and divided into halves differing by at most one;
    the split line sits midway between the two middle coordinates, so
    coincident centres are still separated by position in that order.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if len(gs) == 0:
        raise EmptySetError("cannot partition an empty Gaussian set")
    means = gs.means
    blocks, members = [], []
    stack = [((0.0, 0.0, 1.0, 1.0), np.arange(len(gs)), 0)]
    while stack:
        rect, ids, depth = stack.pop()
        if ids.size <= n_max:
            blocks.append(rect)
            members.append(ids)
            continue
        ax = depth % 2
        coords = means[ids, ax]
        order = np.lexsort((ids, coords))
        m = (ids.size + 1) // 2
        c = 0.5 * (coords[order[m - 1]] + coords[order[m]])
        x1, y1, x2, y2 = rect
        if ax == 0:
            lo_rect, hi_rect = (x1, y1, c, y2), (c, y1, x2, y2)
        else:
            lo_rect, hi_rect = (x1, y1, x2, c), (x1, c, x2, y2)
        # push the upper half first so leaves come out lower-first
        stack.append((hi_rect, np.sort(ids[order[m:]]), depth + 1))
        stack.append((lo_rect, np.sort(ids[order[:m]]), depth + 1))
    return _assemble(blocks, members, means, n_max)


def partition_from_blocks(blocks, gs: GaussianSet) -> BspPartition:
    """Rebuild a partition from stored block corners and the decoded centres."""
    blocks = np.asarray(blocks, dtype=np.float64).reshape(-1, 4)
    if blocks.shape[0] == 0:
        raise ValueError("no blocks given")
    axis, cut, left, right, leaf = _locate_tree(blocks)
    owner = _kernels.locate_points(
        np.ascontiguousarray(gs.means[:, 0]), np.ascontiguousarray(gs.means[:, 1]),
        axis, cut, left, right, leaf,
    )
    members = [np.flatnonzero(owner == k) for k in range(blocks.shape[0])]
    n_max = max((m.size for m in members), default=0)
    return _assemble(blocks, members, gs.means, n_max)


def locate_block(p: BspPartition, x) -> int | np.ndarray:
    """Index of the block whose half-open rectangle contains ``x`` (or each row of ``x``)."""
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    out = _kernels.locate_points(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        p.node_axis, p.node_cut, p.node_left, p.node_right, p.node_leaf,
    )
    return int(out[0]) if single else out


def _check(gs: GaussianSet, p: BspPartition) -> None:
    if len(gs) == 0:
        raise EmptySetError("cannot render an empty Gaussian set")
    if p.n_gaussians != len(gs) or (p.shell_members.size and p.shell_members.max() >= len(gs)):
        raise StalePartitionError(
            f"partition built for {p.n_gaussians} Gaussians, set has {len(gs)}"
        )


def render_points_blocked(gs: GaussianSet, p: BspPartition, points, k: int = DEFAULT_K) -> np.ndarray:
    _check(gs, p)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return _kernels.render_points_blocked(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        p.node_axis, p.node_cut, p.node_left, p.node_right, p.node_leaf,
        p.shell_offsets, p.shell_members,
        gs.means, *gs.kernel_params(), gs.colors, k, EPS_NORM,
    )


def render_topk_blocked(gs: GaussianSet, p: BspPartition, x, k: int = DEFAULT_K) -> np.ndarray:
    return render_points_blocked(gs, p, x, k)[0]


def render_image_blocked(gs: GaussianSet, p: BspPartition, width: int, height: int,
                         k: int = DEFAULT_K) -> np.ndarray:
    xs, ys = pixel_centers(width, height)
    rgb = render_points_blocked(gs, p, np.stack([xs, ys], axis=1), k)
    return np.clip(rgb, 0.0, 1.0).reshape(height, width, 3)


@dataclass
class BenchRow:
    n_max: int | None
    n_blocks: int
    mean_ms: float
    std_ms: float
    mean_candidates: float


def _time(fn, trials: int, warmup: int) -> np.ndarray:
    for _ in range(warmup):
        fn()
    out = np.empty(trials)
    for t in range(trials):
        t0 = time.perf_counter()
        fn()
        out[t] = time.perf_counter() - t0
    return out


def bench_render(gs: GaussianSet, pixels: int, n_max_values, k: int = DEFAULT_K, trials: int = 20,
                 warmup: int = 3, seed: int = 0) -> list[BenchRow]:
    """Time the blocked renderer per ``n_max``; the first row is the unpartitioned baseline.

    Times are reported in ms per 10k pixels.
    """
    if len(gs) == 0:
        raise EmptySetError("cannot benchmark an empty Gaussian set")
    rng = np.random.default_rng(seed)
    pts = rng.random((pixels, 2))
    xs, ys = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
    params = gs.kernel_params()
    per10k = 1e3 * 1e4 / pixels

    base = _time(lambda: _kernels.render_points(xs, ys, gs.means, *params, gs.colors, k, EPS_NORM),
                 trials, warmup) * per10k
    rows = [BenchRow(None, 1, float(base.mean()), float(base.std()), float(len(gs)))]
    for n_max in n_max_values:
        p = build_partition(gs, int(n_max))
        blk = locate_block(p, pts)
        cand = float(p.candidate_counts()[blk].mean())

        def run(p=p):
            _kernels.render_points_blocked(
                xs, ys, p.node_axis, p.node_cut, p.node_left, p.node_right, p.node_leaf,
                p.shell_offsets, p.shell_members, gs.means, *params, gs.colors, k, EPS_NORM)

        t = _time(run, trials, warmup) * per10k
        rows.append(BenchRow(int(n_max), p.n_blocks, float(t.mean()), float(t.std()), cand))
        logger.debug("n_max=%d N_b=%d %.3f ms", n_max, p.n_blocks, t.mean())
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    base = rows[0].mean_ms
    lines = [f"{'n_max':>7} {'N_b':>6} {'mean_ms':>10} {'std_ms':>9} {'cand/px':>9} {'speedup':>8}"]
    for r in rows:
        label = "global" if r.n_max is None else str(r.n_max)
        lines.append(
            f"{label:>7} {r.n_blocks:>6d} {r.mean_ms:>10.3f} {r.std_ms:>9.3f} "
            f"{r.mean_candidates:>9.1f} {base / r.mean_ms:>7.2f}x"
        )
    return "\n".join(lines)
