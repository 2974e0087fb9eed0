"""Phase-only path-loss channel: h = exp(j*theta) / r^(alpha/2).

Gains are never stored; each coefficient is recomputed on demand from the
endpoint positions and a counter-based hash of (seed, link kind, endpoint
indices), so any slice of the channel can be evaluated independently and
reproducibly.  Uplink (node -> BS antenna) and downlink (BS antenna -> node)
phases are drawn independently; node-to-node links are keyed by the ordered
(tx, rx) pair, so the two directions of a node pair are also independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Topology

_U = np.uint64

# link-kind keys folded into the seed
_KIND_UPLINK = _U(1)
_KIND_DOWNLINK = _U(2)
_KIND_NODE = _U(3)

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0 ** -53


class ZeroDistanceError(ValueError):
    """Two endpoints coincide; the path-loss law r^(-alpha/2) diverges."""


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; a bijective avalanche on uint64."""
    with np.errstate(over="ignore"):  # modular arithmetic is intended
        z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def _phase(seed: int, kind: np.uint64, a, b, t=None) -> np.ndarray:
    """Uniform [0, 2pi) phase keyed by (seed, kind, a, b[, t])."""
    h = _mix64(_U(seed & 0xFFFFFFFFFFFFFFFF) ^ kind)
    h = _mix64(h + np.asarray(a, dtype=_U))
    h = _mix64(h + np.asarray(b, dtype=_U))
    if t is not None:
        h = _mix64(h + np.asarray(t, dtype=_U))
    return (h >> _U(11)).astype(float) * (_INV_2_53 * _TWO_PI)


def _check_distances(r: np.ndarray) -> np.ndarray:
    if np.any(r == 0.0):
        raise ZeroDistanceError("coincident endpoints give an infinite gain")
    return r


@dataclass(frozen=True)
class ChannelRealization:
    """Quasi-static channel over one topology: fixed phases, pure lookups."""

    topology: Topology
    alpha: float
    phase_seed: int = 0

    def __post_init__(self) -> None:
        # the scaling layer wants alpha > 2; the sampling law itself only
        # needs a positive exponent
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    # -- node-to-node -------------------------------------------------------

    def node_gain(self, i: int, k: int) -> complex:
        """Gain of the link from node i to node k."""
        if i == k:
            raise ZeroDistanceError("a node has no channel to itself")
        pos = self.topology.node_positions
        r = float(np.linalg.norm(pos[k] - pos[i]))
        if r == 0.0:
            raise ZeroDistanceError("coincident endpoints give an infinite gain")
        theta = float(_phase(self.phase_seed, _KIND_NODE, i, k))
        return complex(np.exp(1j * theta) * r ** (-self.alpha / 2.0))

    def node_gain_matrix(self, tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
        """Dense (len(rx), len(tx)) matrix of node-to-node gains."""
        tx = np.asarray(tx, dtype=np.int64)
        rx = np.asarray(rx, dtype=np.int64)
        pos = self.topology.node_positions
        diff = pos[rx][:, None, :] - pos[tx][None, :, :]
        r = _check_distances(np.linalg.norm(diff, axis=-1))
        theta = _phase(self.phase_seed, _KIND_NODE, tx[None, :], rx[:, None])
        return np.exp(1j * theta) * r ** (-self.alpha / 2.0)

    # -- node-to-BS and BS-to-node -----------------------------------------

    def _antenna_distances(self, bs: int, nodes: np.ndarray) -> np.ndarray:
        ant = self.topology.antenna_positions[bs]          # (l, 2)
        pos = self.topology.node_positions[nodes]          # (N, 2)
        diff = pos[:, None, :] - ant[None, :, :]
        return _check_distances(np.linalg.norm(diff, axis=-1))  # (N, l)

    def uplink_vector(self, i: int, bs: int) -> np.ndarray:
        """Length-l uplink vector from node i to the antennas of BS ``bs``."""
        return self.uplink_matrix(bs, np.array([i]))[:, 0]

    def uplink_matrix(self, bs: int, nodes: np.ndarray) -> np.ndarray:
        """(l, N) matrix; column j is the uplink vector of nodes[j]."""
        nodes = np.asarray(nodes, dtype=np.int64)
        r = self._antenna_distances(bs, nodes)             # (N, l)
        t = np.arange(self.topology.l, dtype=np.int64)
        theta = _phase(self.phase_seed, _KIND_UPLINK, nodes[:, None], bs, t[None, :])
        return (np.exp(1j * theta) * r ** (-self.alpha / 2.0)).T

    def downlink_vector(self, bs: int, i: int) -> np.ndarray:
        """Length-l downlink row vector from BS ``bs`` to node i."""
        return self.downlink_matrix(bs, np.array([i]))[0]

    def downlink_matrix(self, bs: int, nodes: np.ndarray) -> np.ndarray:
        """(N, l) matrix; row j is the downlink row vector to nodes[j]."""
        nodes = np.asarray(nodes, dtype=np.int64)
        r = self._antenna_distances(bs, nodes)
        t = np.arange(self.topology.l, dtype=np.int64)
        theta = _phase(
            self.phase_seed, _KIND_DOWNLINK, nodes[:, None], bs, t[None, :]
        )
        return np.exp(1j * theta) * r ** (-self.alpha / 2.0)

    # -- distance/magnitude helpers (no phases) -----------------------------

    def antenna_distances(self, bs: int, nodes: np.ndarray) -> np.ndarray:
        """(N, l) distances from each node to each antenna of BS ``bs``."""
        return self._antenna_distances(bs, np.asarray(nodes, dtype=np.int64))
