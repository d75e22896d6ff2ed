"""Growth rate of expected utility for constant-proportion strategies.

For a triplet (b, c, F) and a strategy y, the growth rate is

    y . b + ((p - 1) / 2) y . c y + sum over atoms of rate * J_y(z)

with the per-jump term J_y(z) = log(1 + y . z) - y . h(z) for log utility and
J_y(z) = ((1 + y . z)^p - 1) / p - y . h(z) for power utility. Values live in
[-inf, inf): the log and negative-power branches degrade to -inf at or beyond
the bankruptcy boundary 1 + y . z = 0, while the fractional-power branch is
finite on [-1, inf) and undefined to the left of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtSingularityError, OutsideDomainError
from .levy import LevyTriplet, UncertaintySet, UtilitySpec, truncation

# Gradients are refused when a jump factor is this close to the singularity.
SINGULARITY_TOL = 1e-12


@dataclass(frozen=True)
class GrowthEvaluation:
    """Growth rate split into its drift, diffusion, and jump contributions."""

    value: float
    drift_term: float
    diffusion_term: float
    jump_term: float


def _jump_terms(s: np.ndarray, hterm: np.ndarray, p: float) -> np.ndarray:
    """Vectorized J_y(z) from s = y . z and hterm = y . h(z). May contain -inf."""
    s = np.asarray(s, dtype=float)
    if p == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.log1p(s) - hterm
        return np.where(s > -1.0, vals, -np.inf)
    if 0.0 < p < 1.0:
        if np.any(s < -1.0):
            raise OutsideDomainError(
                "fractional-power jump term is undefined where 1 + y . z < 0")
        # Finite at s = -1 since 0^p = 0 for p > 0.
        return ((1.0 + s) ** p - 1.0) / p - hterm
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = ((1.0 + s) ** p - 1.0) / p - hterm
    return np.where(s > -1.0, vals, -np.inf)


def jump_integrand(y: np.ndarray, z: np.ndarray, utility: UtilitySpec) -> float:
    """Single-jump term J_y(z); -inf past the bankruptcy boundary for p <= 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    s = float(y @ z)
    hterm = float(y @ truncation(z))
    return float(_jump_terms(np.array([s]), np.array([hterm]), utility.p)[0])


class GrowthModel:
    """Vectorized growth-rate evaluator over the vertices of an uncertainty set.

    Precomputes stacked drift, diffusion, and flattened atom arrays so the
    per-vertex values at a strategy y come out of a handful of numpy calls.
    """

    def __init__(self, theta: UncertaintySet, utility: UtilitySpec):
        self.theta = theta
        self.utility = utility
        self.p = utility.p
        verts = theta.vertices
        self.k = len(verts)
        self.d = theta.dimension
        self.drifts = np.array([v.b for v in verts])
        self.diffusions = np.array([v.c for v in verts])
        locs, rates, owner = [], [], []
        for i, v in enumerate(verts):
            if v.jumps.m:
                locs.append(v.jumps.locations)
                rates.append(v.jumps.rates)
                owner.append(np.full(v.jumps.m, i, dtype=int))
        if locs:
            self.locations = np.concatenate(locs, axis=0)
            self.rates = np.concatenate(rates)
            self.owner = np.concatenate(owner)
        else:
            self.locations = np.zeros((0, self.d))
            self.rates = np.zeros(0)
            self.owner = np.zeros(0, dtype=int)
        self.truncated = truncation(self.locations)
        self._atom_idx = [np.flatnonzero(self.owner == i) for i in range(self.k)]

    def vertex_values(self, y: np.ndarray) -> np.ndarray:
        """Growth rates of all vertices at y, shape (k,), entries in [-inf, inf)."""
        y = np.asarray(y, dtype=float)
        vals = self.drifts @ y + 0.5 * (self.p - 1.0) * ((self.diffusions @ y) @ y)
        if len(self.rates):
            terms = _jump_terms(self.locations @ y, self.truncated @ y, self.p)
            vals = vals + np.bincount(self.owner, weights=self.rates * terms,
                                      minlength=self.k)
        return vals

    def robust(self, y: np.ndarray) -> tuple[float, int]:
        """Worst-case growth rate and the index of the attaining vertex (first on ties)."""
        vals = self.vertex_values(y)
        idx = int(np.argmin(vals))
        return float(vals[idx]), idx

    def robust_value(self, y: np.ndarray) -> float:
        return self.robust(y)[0]

    def parts(self, i: int, y: np.ndarray) -> GrowthEvaluation:
        """Growth rate of vertex i at y, split into its three contributions."""
        y = np.asarray(y, dtype=float)
        drift = float(self.drifts[i] @ y)
        diffusion = 0.5 * (self.p - 1.0) * float(y @ self.diffusions[i] @ y)
        idx = self._atom_idx[i]
        jump = 0.0
        if len(idx):
            terms = _jump_terms(self.locations[idx] @ y, self.truncated[idx] @ y, self.p)
            jump = float(self.rates[idx] @ terms)
        return GrowthEvaluation(drift + diffusion + jump, drift, diffusion, jump)

    def gradient(self, i: int, y: np.ndarray) -> np.ndarray:
        """Supergradient of vertex i at y.

        Refuses points at or numerically at a jump singularity, where the
        one-sided derivative blows up.
        """
        y = np.asarray(y, dtype=float)
        grad = self.drifts[i] + (self.p - 1.0) * (self.diffusions[i] @ y)
        idx = self._atom_idx[i]
        if len(idx):
            s = self.locations[idx] @ y
            if np.any(s <= -1.0 + SINGULARITY_TOL):
                raise AtSingularityError(
                    "gradient undefined where a jump factor 1 + y . z hits zero")
            factor = (1.0 + s) ** (self.p - 1.0)
            grad = grad + self.rates[idx] @ (self.locations[idx] * factor[:, None]
                                             - self.truncated[idx])
        return grad

    def smoothed(self, y: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-vertex values and gradients with jump factors linearized below ``floor``.

        Below s = floor the jump term continues with constant slope, which
        keeps the function finite and C1 for line searches that briefly leave
        the feasible set. The extension region must be infeasible for the
        caller, so feasible results are exact.
        """
        y = np.asarray(y, dtype=float)
        vals = self.drifts @ y + 0.5 * (self.p - 1.0) * ((self.diffusions @ y) @ y)
        grads = self.drifts + (self.p - 1.0) * (self.diffusions @ y)
        if len(self.rates):
            s = self.locations @ y
            se = np.maximum(s, floor)
            if self.p == 0.0:
                base = np.log1p(se)
                slope = 1.0 / (1.0 + se)
            else:
                base = ((1.0 + se) ** self.p - 1.0) / self.p
                slope = (1.0 + se) ** (self.p - 1.0)
            terms = base + slope * np.minimum(s - floor, 0.0) - self.truncated @ y
            vals = vals + np.bincount(self.owner, weights=self.rates * terms,
                                      minlength=self.k)
            contrib = self.rates[:, None] * (self.locations * slope[:, None]
                                             - self.truncated)
            jump_grads = np.zeros((self.k, self.d))
            np.add.at(jump_grads, self.owner, contrib)
            grads = grads + jump_grads
        return vals, grads


def growth_rate(triplet: LevyTriplet, y: np.ndarray, utility: UtilitySpec) -> GrowthEvaluation:
    """Growth rate of one triplet at strategy y, with its term decomposition."""
    model = GrowthModel(UncertaintySet((triplet,)), utility)
    return model.parts(0, np.atleast_1d(np.asarray(y, dtype=float)))


def worst_case_growth(theta: UncertaintySet, y: np.ndarray,
                      utility: UtilitySpec) -> tuple[float, int]:
    """Minimum growth rate over the vertices and the attaining index (first on ties)."""
    return GrowthModel(theta, utility).robust(np.atleast_1d(np.asarray(y, dtype=float)))


def growth_gradient(triplet: LevyTriplet, y: np.ndarray, utility: UtilitySpec) -> np.ndarray:
    """Supergradient of one triplet's growth rate at y."""
    model = GrowthModel(UncertaintySet((triplet,)), utility)
    return model.gradient(0, np.atleast_1d(np.asarray(y, dtype=float)))
