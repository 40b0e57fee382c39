"""Boundary energy of the winding-number field and its analytic gradient.

The maximized objective is

    E = sum_i a_i (|w(p_i-)| - |w(p_i+)|) <H_i, n_i>  +  sum_i g(w(p_i+-))

where w is evaluated at the probe pair of each point, H_i is the field
gradient at p_i (self term excluded) with its sign fixed so that the
directional term is positive for globally consistent outward normals,
and g penalizes winding values above 1 + delta.  Probe selection is held
fixed during differentiation: it is piecewise constant in the normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import NormalField, PointCloud, normal_jacobian
from .errors import StaleCache
from .gwn import (
    EPS_R,
    FOUR_PI,
    _pair_r2,
    winding_gradients_at_sources,
    winding_numbers,
)
from .voronoi import SampleSet

__all__ = [
    "DEFAULT_DELTA",
    "EnergyReport",
    "EnergyState",
    "penalty_g",
    "boundary_energy",
    "energy_gradient",
]

DEFAULT_DELTA = 0.05

# Field gradients at on-surface points exclude sources closer than this
# fraction of the median nearest-neighbor spacing: the raw dipole sum
# diverges like 1/d for a near-coincident pair while the continuous
# normal derivative it approximates stays finite.
NEAR_FIELD_FACTOR = 0.5

# exp() cap in the range penalty; keeps the objective finite when a probe
# lands pathologically close to a source and w blows up
_EXP_CAP = 60.0

_CHUNK = 256


def penalty_g(w_plus: float, w_minus: float, delta: float = DEFAULT_DELTA) -> float:
    """Range penalty (1 - e^max(w+, 1+delta)) + (1 - e^max(w-, 1+delta)).

    Constant (zero gradient) while both winding values stay at or below
    1 + delta; strictly decreasing in each argument above that.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    cap = 1.0 + delta
    return float(
        (1.0 - np.exp(np.minimum(np.maximum(w_plus, cap), _EXP_CAP)))
        + (1.0 - np.exp(np.minimum(np.maximum(w_minus, cap), _EXP_CAP)))
    )


class EnergyState:
    """Cloud + normals + fixed probe pairs with cached field evaluations.

    Caches are stamped with a revision counter; mutate the normals only
    through :meth:`set_angles` and call :meth:`refresh` before evaluating.
    """

    def __init__(self, cloud: PointCloud, normals: NormalField, samples: SampleSet):
        if cloud.areas is None:
            raise ValueError("cloud has no area weights")
        if len(normals) != cloud.n or len(samples) != cloud.n:
            raise ValueError("cloud, normals and samples must have equal length")
        self.cloud = cloud
        self.normals = normals
        self.samples = samples
        nn, _ = cKDTree(cloud.points).query(cloud.points, k=2)
        self.near_field_radius = NEAR_FIELD_FACTOR * float(np.median(nn[:, 1]))
        self.revision = 0
        self._cache_rev = -1
        self.w_plus: np.ndarray | None = None
        self.w_minus: np.ndarray | None = None
        self.grad_w: np.ndarray | None = None

    @property
    def fresh(self) -> bool:
        return self._cache_rev == self.revision

    def set_angles(self, angles: np.ndarray) -> None:
        self.normals = NormalField(np.asarray(angles, dtype=np.float64).reshape(-1, 2))
        self.revision += 1

    def refresh(self) -> None:
        nvec = self.normals.vectors
        pts = self.cloud.points
        areas = self.cloud.areas
        self.w_plus = winding_numbers(pts, nvec, areas, self.samples.plus)
        self.w_minus = winding_numbers(pts, nvec, areas, self.samples.minus)
        self.grad_w = winding_gradients_at_sources(
            pts, nvec, areas, min_distance=self.near_field_radius
        )
        self._cache_rev = self.revision

    def _require_fresh(self):
        if not self.fresh:
            raise StaleCache("caches do not match the current normals; call refresh()")


@dataclass
class EnergyReport:
    """Objective decomposition; ``total = data_term + penalty_term``."""

    total: float
    data_term: float
    penalty_term: float
    per_point: np.ndarray


def _directional_terms(state: EnergyState) -> np.ndarray:
    # <H_i, n_i>; H is the negated query gradient, the sign that makes the
    # data term positive for consistent outward normals
    return -np.einsum("ik,ik->i", state.grad_w, state.normals.vectors)


def boundary_energy(state: EnergyState, delta: float = DEFAULT_DELTA) -> EnergyReport:
    state._require_fresh()
    areas = state.cloud.areas
    cap = 1.0 + delta
    diff = np.abs(state.w_minus) - np.abs(state.w_plus)
    c = _directional_terms(state)
    data = areas * diff * c
    pen = (1.0 - np.exp(np.minimum(np.maximum(state.w_plus, cap), _EXP_CAP))) + (
        1.0 - np.exp(np.minimum(np.maximum(state.w_minus, cap), _EXP_CAP))
    )
    data_term = float(data.sum())
    penalty_term = float(pen.sum())
    return EnergyReport(
        total=data_term + penalty_term,
        data_term=data_term,
        penalty_term=penalty_term,
        per_point=data + pen,
    )


def energy_gradient(state: EnergyState, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Analytic gradient of the objective with respect to all (u, v).

    Chains three dependency paths of each normal n_k -- the explicit
    appearance in its own directional term, the field gradients at every
    other point, and the winding values at every probe -- through the
    angle-chart jacobian.  d|x|/dx at 0 and the penalty derivative at the
    branch point are taken as 0.
    """
    state._require_fresh()
    pts = state.cloud.points
    areas = state.cloud.areas
    nvec = state.normals.vectors
    n = state.cloud.n
    cap = 1.0 + delta

    diff = np.abs(state.w_minus) - np.abs(state.w_plus)
    c = _directional_terms(state)
    cut2 = max(state.near_field_radius, EPS_R) ** 2

    # penalty derivative on the active branch only (zero again past the
    # exp cap, where the clamped penalty is constant)
    def _pen_deriv(w):
        return np.where((w > cap) & (w < _EXP_CAP), -np.exp(np.minimum(w, _EXP_CAP)), 0.0)

    gp_plus = _pen_deriv(state.w_plus)
    gp_minus = _pen_deriv(state.w_minus)

    gamma_minus = areas * c * np.sign(state.w_minus) + gp_minus
    gamma_plus = -areas * c * np.sign(state.w_plus) + gp_plus

    af = areas * diff  # weights of the directional terms

    dE_dn = np.empty((n, 3))
    # explicit path: the n_k inside its own directional term
    dE_dn[:] = af[:, None] * (-state.grad_w)

    p2 = np.einsum("ik,ik->i", pts, pts)
    np_dot = np.einsum("ik,ik->i", nvec, pts)
    pm, pp = state.samples.minus, state.samples.plus
    pm2 = np.einsum("ik,ik->i", pm, pm)
    pp2 = np.einsum("ik,ik->i", pp, pp)
    for s in range(0, n, _CHUNK):
        ks = slice(s, min(s + _CHUNK, n))
        pk = pts[ks]

        # coupling through the field gradients at every point i != k;
        # sum_i s_ki (p_k - p_i) decomposes into rowsum(s) p_k - s @ p
        r2 = _pair_r2(pk, pts, p2)
        for row, kk in enumerate(range(s, min(s + _CHUNK, n))):
            r2[row, kk] = np.inf
        r2[r2 < cut2] = np.inf  # mirror the near-field exclusion of grad_w
        inv_r3 = r2 ** (-1.5)
        inv_r5 = inv_r3 / r2
        nid = pk @ nvec.T - np_dot[None, :]  # <n_i, p_k - p_i>
        s3 = 3.0 * af * nid * inv_r5
        coupling = (af * inv_r3) @ nvec - s3.sum(axis=1)[:, None] * pk + s3 @ pts

        # coupling through the winding values at every probe
        r2m = _pair_r2(pk, pm, pm2)
        r2m[r2m < EPS_R * EPS_R] = np.inf
        r2p = _pair_r2(pk, pp, pp2)
        r2p[r2p < EPS_R * EPS_R] = np.inf
        wm = gamma_minus * r2m ** (-1.5)
        wp = gamma_plus * r2p ** (-1.5)
        probes = (
            (wm.sum(axis=1) + wp.sum(axis=1))[:, None] * pk - wm @ pm - wp @ pp
        )

        dE_dn[ks] += areas[ks, None] * (coupling + probes) / FOUR_PI

    dn_du, dn_dv = normal_jacobian(state.normals.angles[:, 0], state.normals.angles[:, 1])
    grad = np.stack(
        [
            np.einsum("ik,ik->i", dE_dn, dn_du),
            np.einsum("ik,ik->i", dE_dn, dn_dv),
        ],
        axis=1,
    )
    return grad
