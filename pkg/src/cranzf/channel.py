"""Cluster configuration, MS placement and block-fading channel draws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import db_to_linear

__all__ = [
    "ClusterConfig",
    "ChannelSet",
    "HexGeometry",
    "Placement",
    "MIN_DISTANCE_KM",
    "pathloss_db",
    "pathloss_alpha",
    "symmetric_alpha",
    "generate_channels",
    "draw_channel_array",
    "place_random",
]

MIN_DISTANCE_KM = 0.010


@dataclass(frozen=True)
class ClusterConfig:
    """Dimensions, powers and long-term attenuation of one cluster.

    ``alpha`` has shape ``(M, Q)``: ``alpha[m, q]`` is the linear gain
    between S-RRH ``m`` and MS ``q``.
    """

    M: int
    Q: int
    Nt: int
    P_max: float
    noise_power: float
    alpha: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.M < 1 or self.Q < 1 or self.Nt < 1:
            raise ValueError("M, Q and Nt must be >= 1")
        if not self.P_max > 0:
            raise ValueError("P_max must be positive")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (self.M, self.Q):
            raise ValueError(f"alpha must have shape ({self.M}, {self.Q}), got {alpha.shape}")
        if not np.all(alpha > 0):
            raise ValueError("attenuation factors must be positive")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def symmetric(cls, M, Q, Nt, P_max, noise_power=1.0):
        return cls(M, Q, Nt, P_max, noise_power, symmetric_alpha(M, Q))

    def with_nt(self, Nt: int) -> "ClusterConfig":
        return ClusterConfig(self.M, self.Q, Nt, self.P_max, self.noise_power, self.alpha)


@dataclass
class ChannelSet:
    """One block-fading realization.

    ``h`` has shape ``(Q, M, Nt)``; ``h[q, m]`` is the channel from S-RRH
    ``m`` to MS ``q``.
    """

    h: np.ndarray

    @property
    def Q(self):
        return self.h.shape[0]

    @property
    def M(self):
        return self.h.shape[1]

    @property
    def Nt(self):
        return self.h.shape[2]

    def stacked(self, q: int) -> np.ndarray:
        """``h_q``: the per-S-RRH blocks of MS ``q`` concatenated in S-RRH order."""
        return self.h[q].reshape(-1)

    def stacked_matrix(self) -> np.ndarray:
        """All stacked channels as the columns of an ``(M*Nt, Q)`` matrix."""
        return self.h.reshape(self.Q, -1).T


def symmetric_alpha(M: int, Q: int) -> np.ndarray:
    """Equal attenuation ``1/M`` on every link (so that each MS's gains sum to one)."""
    return np.full((M, Q), 1.0 / M)


def pathloss_db(r_km):
    """Urban NLOS pathloss gain ``-128 - 37.6 log10(r)`` in dB (``r`` in km)."""
    r = np.asarray(r_km, dtype=float)
    if np.any(r < MIN_DISTANCE_KM - 1e-12):
        raise ValueError(f"distance below the {MIN_DISTANCE_KM * 1000:.0f} m minimum")
    out = -128.0 - 37.6 * np.log10(r)
    return float(out) if out.ndim == 0 else out


def pathloss_alpha(distances_km: np.ndarray) -> np.ndarray:
    """Linear attenuation matrix from an ``(M, Q)`` distance matrix."""
    return db_to_linear(pathloss_db(distances_km))


def draw_channel_array(rng: np.random.Generator, alpha: np.ndarray, Nt: int) -> np.ndarray:
    """Draw ``h[q, m] ~ CN(0, alpha[m, q] I_Nt)``; returns shape ``(Q, M, Nt)``.

    Variance ``alpha`` per complex entry (``alpha/2`` per real component).
    """
    M, Q = alpha.shape
    g = rng.standard_normal((Q, M, Nt, 2))
    scale = np.sqrt(alpha.T / 2.0)[:, :, None]
    return scale * (g[..., 0] + 1j * g[..., 1])


def generate_channels(config: ClusterConfig, rng: np.random.Generator) -> ChannelSet:
    return ChannelSet(draw_channel_array(rng, config.alpha, config.Nt))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HexGeometry:
    """Adjacent pointy-top hexagons with one S-RRH at each centre.

    The default is four hexagons of 100 m edge whose centres form a rhombus
    with 60/120 degree corners.
    """

    edge_m: float = 100.0
    centers: tuple = None

    def __post_init__(self):
        if self.centers is None:
            d = math.sqrt(3.0) * self.edge_m
            c = ((0.0, 0.0), (d, 0.0), (d / 2, 1.5 * self.edge_m), (1.5 * d, 1.5 * self.edge_m))
            object.__setattr__(self, "centers", c)

    @property
    def srrh_positions(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask: which points fall inside the union of hexagons."""
        pts = np.atleast_2d(pts)
        inside = np.zeros(len(pts), dtype=bool)
        for c in self.srrh_positions:
            inside |= _in_pointy_hexagon(pts - c, self.edge_m)
        return inside

    def bounding_box(self):
        c = self.srrh_positions
        hw = math.sqrt(3.0) / 2 * self.edge_m
        return (c[:, 0].min() - hw, c[:, 0].max() + hw,
                c[:, 1].min() - self.edge_m, c[:, 1].max() + self.edge_m)

    def to_dict(self):
        return {"edge_m": self.edge_m, "centers_m": [list(c) for c in self.centers]}


def _in_pointy_hexagon(p: np.ndarray, R: float) -> np.ndarray:
    x = np.abs(p[:, 0])
    y = np.abs(p[:, 1])
    hw = math.sqrt(3.0) / 2 * R
    return (x <= hw) & (y <= R - x / math.sqrt(3.0))


def _sample_in_hexagon(rng: np.random.Generator, R: float) -> np.ndarray:
    hw = math.sqrt(3.0) / 2 * R
    while True:
        p = rng.uniform((-hw, -R), (hw, R))
        if _in_pointy_hexagon(p[None, :], R)[0]:
            return p


@dataclass(frozen=True)
class Placement:
    srrh_positions: np.ndarray  # (M, 2) metres
    ms_positions: np.ndarray  # (Q, 2) metres

    @property
    def distances_km(self) -> np.ndarray:
        """``(M, Q)`` S-RRH-to-MS distances in km."""
        d = self.srrh_positions[:, None, :] - self.ms_positions[None, :, :]
        return np.linalg.norm(d, axis=-1) / 1000.0

    def alpha(self) -> np.ndarray:
        return pathloss_alpha(self.distances_km)


def place_random(geometry: HexGeometry, Q: int, rng: np.random.Generator,
                 min_distance_km: float = MIN_DISTANCE_KM) -> Placement:
    """Drop ``Q`` MSs uniformly over the union of hexagons.

    A point closer than ``min_distance_km`` to any S-RRH is redrawn.
    Hexagons have equal area and do not overlap, so picking a hexagon
    uniformly and then a point uniformly inside it is uniform on the union.
    """
    srrh = geometry.srrh_positions
    pts = np.empty((Q, 2))
    for q in range(Q):
        while True:
            c = srrh[rng.integers(len(srrh))]
            p = c + _sample_in_hexagon(rng, geometry.edge_m)
            if np.min(np.linalg.norm(srrh - p, axis=1)) >= min_distance_km * 1000.0:
                pts[q] = p
                break
    return Placement(srrh.copy(), pts)
