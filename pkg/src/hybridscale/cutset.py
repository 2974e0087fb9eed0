"""Numeric cut-set upper bounds on finite network instances.

Two vertical cuts at the midline x = sqrt(n)/2 bound the aggregate rate
from above.  Under L1 the left-half nodes transmit to everything else:
the right-half nodes, every BS antenna, and the central processor.
Under L2 the whole left half (nodes and BS antennas) transmits to the
right-half nodes and antennas, and each left-half BS additionally ships
at most R_BS bits/slot over its wired link.

Every wireless term is the single-destination MISO bound

    log2(1 + (sum_i sqrt(P_i) * r_i^(-alpha/2))^2)

summed over destinations, where P_i is the transmitter's power budget
(P for nodes, nP/m split evenly across a BS's antennas).  Phases drop
out of the magnitude sum, so the bound depends on geometry alone.
Destinations are partitioned into diagnostic groups: D1 is the width-1
slab just right of the midline (the central processor sits on the
midline and lands here), D2 holds antennas of left-half BSs within the
width-1 ring inside their footprint boundary, and D3 is the remainder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, _check_distances
from .protocols import SimConfig
from .topology import Topology

__all__ = ["CutBound", "bound_l1", "bound_l2", "min_cut"]

_GROUPS = ("D1", "D2", "D3")


@dataclass(frozen=True)
class CutBound:
    """One evaluated cut: per-group wireless terms plus any wired term."""

    cut: str
    wireless_terms: dict[str, float]
    wired_term: float
    total: float

    def __post_init__(self) -> None:
        if self.cut not in ("L1", "L2"):
            raise ValueError(f"unknown cut {self.cut!r}")
        if set(self.wireless_terms) != set(_GROUPS):
            raise ValueError("wireless_terms must cover exactly D1, D2, D3")
        if any(v < 0.0 for v in self.wireless_terms.values()) or self.wired_term < 0.0:
            raise ValueError("cut-set terms cannot be negative")
        expect = sum(self.wireless_terms.values()) + self.wired_term
        if not (self.total == expect or abs(self.total - expect) <= 1e-9):
            raise ValueError("total does not match the sum of its terms")

    def to_dict(self) -> dict:
        return {
            "cut": self.cut,
            "wireless_terms": dict(self.wireless_terms),
            "wired_term": self.wired_term,
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _miso_bits(
    dest_pos: np.ndarray, src_pos: np.ndarray, src_amp: np.ndarray, alpha: float
) -> np.ndarray:
    """Per-destination log2(1 + (sum_i amp_i * r_i^(-alpha/2))^2)."""
    if len(dest_pos) == 0 or len(src_pos) == 0:
        return np.zeros(len(dest_pos))
    diff = dest_pos[:, None, :] - src_pos[None, :, :]
    r = _check_distances(np.linalg.norm(diff, axis=-1))
    amp = (src_amp[None, :] * r ** (-alpha / 2.0)).sum(axis=1)
    return np.log2(1.0 + amp * amp)


def _group_masks(
    topo: Topology, dest_pos: np.ndarray, dest_owner: np.ndarray
) -> dict[str, np.ndarray]:
    """Partition destinations into D1/D2/D3 (priority order, disjoint).

    dest_owner holds the owning BS index for antenna entries and -1 for
    nodes and the central processor.
    """
    mid = topo.config.side / 2.0
    x = dest_pos[:, 0]
    d1 = (x >= mid) & (x < mid + 1.0)

    is_antenna = dest_owner >= 0
    ring = np.zeros(len(dest_pos), dtype=bool)
    if is_antenna.any():
        owners = dest_owner[is_antenna]
        centers = topo.bs_centers[owners]
        left_bs = centers[:, 0] < mid
        cheb = np.abs(dest_pos[is_antenna] - centers).max(axis=1)
        inside = topo.footprint_side / 2.0 - cheb
        ring[is_antenna] = left_bs & (inside <= 1.0)
    d2 = ring & ~d1
    d3 = ~(d1 | d2)
    return {"D1": d1, "D2": d2, "D3": d3}


def _grouped_terms(
    topo: Topology,
    dest_pos: np.ndarray,
    dest_owner: np.ndarray,
    src_pos: np.ndarray,
    src_amp: np.ndarray,
    alpha: float,
) -> dict[str, float]:
    bits = _miso_bits(dest_pos, src_pos, src_amp, alpha)
    masks = _group_masks(topo, dest_pos, dest_owner)
    return {g: float(bits[masks[g]].sum()) for g in _GROUPS}


def bound_l1(topo: Topology, ch: ChannelRealization, cfg: SimConfig) -> CutBound:
    """Left-half nodes against the rest of the world (wireless only)."""
    mid = topo.config.side / 2.0
    left = topo.node_positions[:, 0] < mid
    src_pos = topo.node_positions[left]
    src_amp = np.full(len(src_pos), math.sqrt(cfg.p))

    ants = topo.antenna_positions.reshape(-1, 2)
    owner = np.repeat(np.arange(topo.m), topo.l)
    dest_pos = np.vstack(
        [topo.node_positions[~left], ants, topo.rcp_position[None, :]]
    )
    dest_owner = np.concatenate(
        [np.full((~left).sum(), -1), owner, np.array([-1])]
    )

    terms = _grouped_terms(topo, dest_pos, dest_owner, src_pos, src_amp, ch.alpha)
    return CutBound("L1", terms, 0.0, sum(terms.values()))


def bound_l2(
    topo: Topology,
    ch: ChannelRealization,
    cfg: SimConfig,
    r_bs: float | None = None,
) -> CutBound:
    """Entire left half against the right half, plus the wired links."""
    r = cfg.r_bs if r_bs is None else r_bs
    if math.isnan(r) or r < 0.0:
        raise ValueError(f"backhaul rate must be non-negative, got {r}")

    mid = topo.config.side / 2.0
    left = topo.node_positions[:, 0] < mid
    left_bs = topo.bs_centers[:, 0] < mid

    per_antenna = (topo.n * cfg.p / topo.m) / topo.l
    src_pos = np.vstack(
        [topo.node_positions[left], topo.antenna_positions[left_bs].reshape(-1, 2)]
    )
    src_amp = np.concatenate(
        [
            np.full(int(left.sum()), math.sqrt(cfg.p)),
            np.full(int(left_bs.sum()) * topo.l, math.sqrt(per_antenna)),
        ]
    )

    right_bs_idx = np.nonzero(~left_bs)[0]
    dest_pos = np.vstack(
        [
            topo.node_positions[~left],
            topo.antenna_positions[right_bs_idx].reshape(-1, 2),
        ]
    )
    dest_owner = np.concatenate(
        [np.full((~left).sum(), -1), np.repeat(right_bs_idx, topo.l)]
    )

    terms = _grouped_terms(topo, dest_pos, dest_owner, src_pos, src_amp, ch.alpha)
    n_left = int(left_bs.sum())
    wired = n_left * r if n_left else 0.0
    return CutBound("L2", terms, wired, sum(terms.values()) + wired)


def min_cut(
    topo: Topology,
    ch: ChannelRealization,
    cfg: SimConfig,
    r_bs: float | None = None,
) -> float:
    """Tighter of the two cuts; upper-bounds every scheme's aggregate."""
    return min(bound_l1(topo, ch, cfg).total, bound_l2(topo, ch, cfg, r_bs).total)
