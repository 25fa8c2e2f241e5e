"""Weighted Schur class: characteristic triples, adjoint symbols and defects."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .boundary import (
    BoundaryError, BoundaryGrid, GridSample, OuterFunction, analytic_project, cauchy_eval,
    grid_from_dict, sample_from_obj, sample_to_obj,
)

EIG_FLOOR = 1e-8
ROUNDOFF_DEFECT = 1e-13


class SchurError(ValueError):
    pass


def herm_apply(values: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a stack of Hermitian matrices through ``eigh``."""
    sym = 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))
    lam, vec = np.linalg.eigh(sym)
    return (vec * func(lam)[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


def _adj(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class Weight:
    """Pair of Hermitian positive weights ``(Ξ₊, Ξ₋)`` sampled on one grid."""

    plus: GridSample
    minus: GridSample
    floor: float = EIG_FLOOR

    def __post_init__(self):
        if not self.plus.grid.same_as(self.minus.grid):
            raise SchurError("weights live on different grids")
        for name, w in (("plus", self.plus), ("minus", self.minus)):
            r, c = w.shape
            if r != c:
                raise SchurError(f"weight {name} is not square")
            v = w.values
            if np.max(np.abs(v - _adj(v))) > 1e-10 * max(1.0, np.max(np.abs(v))):
                raise SchurError(f"weight {name} is not Hermitian")
            lam = np.linalg.eigvalsh(v)
            if lam.min() < self.floor or lam.max() > 1.0 / self.floor:
                raise SchurError(f"weight {name} eigenvalues leave [{self.floor}, {1 / self.floor}]")

    @classmethod
    def identity(cls, grid: BoundaryGrid, p: int, q: int | None = None) -> "Weight":
        q = p if q is None else q
        return cls(GridSample.constant(grid, np.eye(p)), GridSample.constant(grid, np.eye(q)))

    @classmethod
    def scalar(cls, grid: BoundaryGrid, plus, minus, p: int = 1, q: int | None = None) -> "Weight":
        """Scalar weights given as node arrays (or constants) times identity."""
        q = p if q is None else q
        sp = np.broadcast_to(np.asarray(plus, dtype=complex), (grid.n,))
        sm = np.broadcast_to(np.asarray(minus, dtype=complex), (grid.n,))
        return cls(GridSample(grid, sp[:, None, None] * np.eye(p)),
                   GridSample(grid, sm[:, None, None] * np.eye(q)))

    @property
    def grid(self) -> BoundaryGrid:
        return self.plus.grid

    @cached_property
    def plus_inv(self) -> GridSample:
        return self.plus.inverse()

    @cached_property
    def minus_inv(self) -> GridSample:
        return self.minus.inverse()

    @cached_property
    def plus_sqrt(self) -> GridSample:
        return GridSample(self.grid, herm_apply(self.plus.values, np.sqrt))

    @cached_property
    def minus_sqrt(self) -> GridSample:
        return GridSample(self.grid, herm_apply(self.minus.values, np.sqrt))

    @cached_property
    def is_scalar(self) -> bool:
        def scalar_like(v):
            d = v.shape[-1]
            diag = np.trace(v, axis1=1, axis2=2) / d
            return np.max(np.abs(v - diag[:, None, None] * np.eye(d))) <= 1e-12 * max(1.0, np.max(np.abs(v)))
        return scalar_like(self.plus.values) and scalar_like(self.minus.values)

    @cached_property
    def is_identity(self) -> bool:
        return all(np.max(np.abs(w.values - np.eye(w.shape[0]))) < 1e-14 for w in (self.plus, self.minus))


@dataclass(frozen=True, eq=False)
class CharTriple:
    """Characteristic data ``(Θ⁺, Ξ₊, Ξ₋)``.

    ``theta_plus`` is a ``q × p`` boundary sample mapping the input space of
    dimension ``p`` (weighted by ``Ξ₊``) into the output space of dimension
    ``q`` (weighted by ``Ξ₋``).  ``evaluator`` optionally gives exact interior
    values; otherwise interior values come from the Cauchy integral.
    """

    theta_plus: GridSample
    weight: Weight
    evaluator: Optional[Callable[[complex], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        q, p = self.theta_plus.shape
        if not self.theta_plus.grid.same_as(self.weight.grid):
            raise SchurError("Θ⁺ and weights live on different grids")
        if self.weight.plus.shape != (p, p) or self.weight.minus.shape != (q, q):
            raise SchurError(
                f"shape mismatch: Θ⁺ is {q}x{p} but weights are {self.weight.plus.shape}, {self.weight.minus.shape}")

    @classmethod
    def unweighted(cls, theta_plus: GridSample, evaluator=None) -> "CharTriple":
        q, p = theta_plus.shape
        return cls(theta_plus, Weight.identity(theta_plus.grid, p, q), evaluator)

    @classmethod
    def from_function(cls, grid: BoundaryGrid, func: Callable, weight: Weight | None = None) -> "CharTriple":
        th = GridSample.from_function(grid, func)
        q, p = th.shape
        return cls(th, weight or Weight.identity(grid, p, q), func)

    @property
    def grid(self) -> BoundaryGrid:
        return self.theta_plus.grid

    @property
    def p_in(self) -> int:
        return self.theta_plus.shape[1]

    @property
    def q_out(self) -> int:
        return self.theta_plus.shape[0]

    def at(self, z: complex) -> np.ndarray:
        """Θ⁺(z) for ``z`` inside the curve."""
        if self.evaluator is not None:
            return np.atleast_2d(np.asarray(self.evaluator(z), dtype=complex))
        return cauchy_eval(self.theta_plus, z, "plus")

    @cached_property
    def minus(self) -> GridSample:
        return theta_minus(self)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class MembershipReport:
    analyticity: float
    excess: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.analyticity <= self.tol and self.excess <= self.tol


@dataclass(frozen=True)
class PurityReport:
    unitary_dim: int
    margin: Optional[float]
    unitary_basis: np.ndarray

    @property
    def pure(self) -> bool:
        return self.unitary_dim == 0 and (self.margin is None or self.margin > 0)


def schur_membership(theta: CharTriple, tol: float = 1e-8) -> MembershipReport:
    """Worst analyticity residual ``‖P₋Θ⁺‖∞`` and worst eigenvalue of ``Θ⁺*Ξ₋Θ⁺ − Ξ₊``."""
    th = theta.theta_plus
    analytic = analytic_project(th, "minus").sup_norm()
    gap = _adj(th.values) @ theta.weight.minus.values @ th.values - theta.weight.plus.values
    excess = float(np.max(np.linalg.eigvalsh(0.5 * (gap + _adj(gap)))))
    return MembershipReport(analytic, max(excess, 0.0), tol)


def theta_minus(theta: CharTriple) -> GridSample:
    """Weighted adjoint symbol ``Ξ₊⁻¹ Θ⁺* Ξ₋``."""
    w = theta.weight
    return w.plus_inv @ theta.theta_plus.adjoint() @ w.minus


def defect_hermitian(theta: CharTriple) -> np.ndarray:
    """Nodewise ``I − Ξ₋^{1/2} Θ⁺ Ξ₊⁻¹ Θ⁺* Ξ₋^{1/2}``, the Hermitian form of ``I − Θ⁺Θ⁻``."""
    w = theta.weight
    x = w.minus_sqrt.values
    th = theta.theta_plus.values
    h = x @ th @ w.plus_inv.values @ _adj(th) @ x
    return np.eye(theta.q_out) - 0.5 * (h + _adj(h))


def defect(theta: CharTriple, tol: float = 1e-8) -> GridSample:
    """Defect ``Δ⁺`` with ``(Δ⁺)² = I − Θ⁺Θ⁻``.

    The square root is taken of the Hermitian form and conjugated back by
    ``Ξ₋^{1/2}``, so ``Δ⁺`` is self-adjoint and nonnegative for the ``Ξ₋``
    inner product.  Raises when the form has an eigenvalue below ``−tol``.
    """
    form = defect_hermitian(theta)
    lam = np.linalg.eigvalsh(form)
    if lam.min() < -tol:
        raise SchurError(f"I - Θ⁺Θ⁻ has eigenvalue {lam.min():.3e}; Θ is not contractive")
    # eigenvalues at roundoff level are zeroed so their square roots do not inflate to ~1e-8
    root = herm_apply(form, lambda t: np.sqrt(np.where(t > ROUNDOFF_DEFECT, t, 0.0)))
    w = theta.weight
    if w.is_identity:
        return GridSample(theta.grid, root)
    return GridSample(theta.grid, np.linalg.inv(w.minus_sqrt.values) @ root @ w.minus_sqrt.values)


def _null_space(stack: np.ndarray, rel: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(stack, full_matrices=True)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > rel * scale))
    return _adj(vh[rank:])


def pure_part_check(theta: CharTriple, probes=None, rel: float = 1e-8) -> PurityReport:
    """Detect unitary-constant input directions and measure strict contractivity of the rest.

    A direction ``n`` counts as unitary-constant when ``Θ⁻Θ⁺n = n`` at every
    node and ``Θ⁺n`` does not vary along the curve.  For scalar weights on the
    circle the remaining part is normalized by the outer factors of the weights
    and its norm is maximized over interior probes; the margin is ``1`` minus
    that maximum.
    """
    th = theta.theta_plus.values
    p = theta.p_in
    gap = np.eye(p) - theta.minus.values @ th
    variation = th - th.mean(axis=0)
    stack = np.concatenate([gap.reshape(-1, p), variation.reshape(-1, p)])
    basis = _null_space(stack, rel)
    dim = basis.shape[1]
    margin = None
    w = theta.weight
    if w.is_scalar and theta.grid.is_circle:
        if probes is None:
            probes = [0.0] + [r * np.exp(2j * np.pi * k / 8) for r in (0.5, 0.8) for k in range(8)]
        comp = _null_space(_adj(basis), rel) if dim else np.eye(p)
        if comp.shape[1] == 0:
            margin = None
        else:
            chi_p = OuterFunction(GridSample(theta.grid, w.plus.values[:, 0, 0].real))
            chi_m = OuterFunction(GridSample(theta.grid, w.minus.values[:, 0, 0].real))
            normalized = GridSample(
                theta.grid,
                th * (chi_m.boundary().scalar / chi_p.boundary().scalar)[:, None, None])
            worst = 0.0
            for z in probes:
                val = cauchy_eval(normalized, z, "plus") @ comp
                worst = max(worst, float(np.linalg.norm(val, 2)))
            margin = 1.0 - worst
    return PurityReport(dim, margin, basis)


# ---------------------------------------------------------------- JSON


def triple_to_json(theta: CharTriple) -> dict:
    return {
        "theta_plus": sample_to_obj(theta.theta_plus),
        "xi_plus": sample_to_obj(theta.weight.plus),
        "xi_minus": sample_to_obj(theta.weight.minus),
        "grid": theta.grid.to_dict(),
    }


def triple_from_json(obj: dict) -> CharTriple:
    try:
        grid = grid_from_dict(obj["grid"])
        th = sample_from_obj(obj["theta_plus"], grid)
        xp = sample_from_obj(obj["xi_plus"], grid)
        xm = sample_from_obj(obj["xi_minus"], grid)
    except KeyError as exc:
        raise SchurError(f"characteristic triple JSON lacks field {exc}") from None
    except BoundaryError as exc:
        raise SchurError(str(exc)) from None
    return CharTriple(th, Weight(xp, xm))
