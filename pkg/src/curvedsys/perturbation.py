"""Naboko-type perturbations ``Ŝ = T̂ + N̂κM̂`` of model operators.

The perturbed operator is handled through two boundary symbols,
``Θ_{·κ}⁺ = Θ⁺ − κ + Θ⁺(P₊Θ⁻)κ`` (analytic inside) and
``Θ_{·κ}⁻ = I − (P₋Θ⁻)κ`` (analytic outside, ``I`` at infinity), which give
the resolvent in closed form and describe the spectral subspaces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import subspace_angles

from .boundary import GridSample, OuterFunction, cauchy_eval
from .model import ModelSpace, _eval_side, dual_model, model_operators, nodal_project
from .schur import ROUNDOFF_DEFECT, herm_apply

TAGS = ("M", "N+", "N-", "D+", "D-", "N", "NM+", "NM-", "DM+", "DM-")


class PerturbationError(ValueError):
    pass


class SpectrumHit(PerturbationError):
    """The requested point is an eigenvalue of the perturbed operator."""


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Coupling ``κ`` (``q × p``, mapping outputs of ``M̂`` to inputs of ``N̂``) on a reference model."""

    kappa: np.ndarray
    model: ModelSpace

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.kappa, dtype=complex))
        p, q = self.model.pi_plus.k, self.model.pi_minus.k
        if k.shape != (q, p):
            raise PerturbationError(f"κ must be {q}x{p}, got {k.shape[0]}x{k.shape[1]}")
        object.__setattr__(self, "kappa", k)

    @property
    def kappa_plus_r(self) -> np.ndarray:
        """Nodal ``κ₊^r = −I − (P₊Θ⁻)κ``."""
        p = self.model.pi_plus.k
        return -np.eye(p) - self.symbols.theta_minus_plus @ self.kappa

    @property
    def kappa_minus_r(self) -> np.ndarray:
        return self.kappa

    @property
    def symbols(self) -> "PerturbedSymbols":
        return theta_kappa(self.model, self)

    def dual(self, dual: Optional[ModelSpace] = None) -> "Perturbation":
        """``κ* `` on the dual model, so that ``Ŝ* = T̂_* + N̂_*κ*M̂_*``."""
        return Perturbation(self.kappa.conj().T, dual or dual_model(self.model))


@dataclass(frozen=True, eq=False)
class PerturbedSymbols:
    model: ModelSpace
    kappa: np.ndarray
    theta_minus_plus: np.ndarray    # nodal P₊Θ⁻ (p × q)
    theta_minus_minus: np.ndarray   # nodal P₋Θ⁻
    plus: np.ndarray                # nodal Θ_{·κ}⁺ (q × p)
    minus: np.ndarray               # nodal Θ_{·κ}⁻ (p × p)

    def plus_at(self, z: complex) -> np.ndarray:
        """``Θ_{·κ}⁺(z)`` inside the circle."""
        m = self.model
        th = m.theta_at(z)
        tmp = cauchy_eval(GridSample(m.grid, self.theta_minus_plus), z, "plus")
        return th - self.kappa + th @ tmp @ self.kappa

    def minus_at(self, z: complex) -> np.ndarray:
        """``Θ_{·κ}⁻(z)`` outside the circle."""
        m = self.model
        tmm = cauchy_eval(GridSample(m.grid, self.theta_minus_minus), z, "minus")
        return np.eye(self.minus.shape[1]) - tmm @ self.kappa

    def at(self, z: complex) -> np.ndarray:
        return self.plus_at(z) if abs(z) < 1 else self.minus_at(z)

    def analyticity(self) -> float:
        """Negative-index content of ``Θ_{·κ}⁺`` plus nonnegative-index content of ``Θ_{·κ}⁻ − I``."""
        a = np.max(np.abs(nodal_project(self.plus, "minus")), initial=0.0)
        b = np.max(np.abs(nodal_project(self.minus - np.eye(self.minus.shape[1]), "plus")), initial=0.0)
        return float(max(a, b))

    # scalar inner-outer splits

    def _require_scalar(self):
        if self.plus.shape[1:] != (1, 1):
            raise PerturbationError("inner-outer splitting is implemented for scalar symbols only")

    def plus_inner(self) -> np.ndarray:
        """Nodal inner factor of ``Θ_{·κ}⁺`` (symbol divided by its outer factor inside)."""
        self._require_scalar()
        mod = np.abs(self.plus[:, 0, 0]) ** 2
        if np.min(mod) <= 1e-14:
            raise PerturbationError("Θ_{·κ}⁺ vanishes on the circle")
        chi = OuterFunction(GridSample(self.model.grid, mod)).boundary().scalar
        return (self.plus[:, 0, 0] / chi)[:, None, None]

    def minus_inner(self) -> np.ndarray:
        """Nodal inner factor of ``Θ_{·κ}⁻`` relative to the exterior domain."""
        self._require_scalar()
        mod = np.abs(self.minus[:, 0, 0]) ** 2
        if np.min(mod) <= 1e-14:
            raise PerturbationError("Θ_{·κ}⁻ vanishes on the circle")
        # the exterior outer function has boundary values conj(χ) for the interior outer χ
        chi = np.conj(OuterFunction(GridSample(self.model.grid, mod)).boundary().scalar)
        return (self.minus[:, 0, 0] / chi)[:, None, None]


def theta_kappa(model: ModelSpace, kappa) -> PerturbedSymbols:
    """Symbols ``Θ_{·κ}^±`` of a perturbation; ``κ = 0`` gives ``(Θ⁺, I)``."""
    k = kappa.kappa if isinstance(kappa, Perturbation) else np.atleast_2d(np.asarray(kappa, dtype=complex))
    tm = model.theta.minus.values
    tmp = nodal_project(tm, "plus")
    tmm = tm - tmp
    th = model.theta.theta_plus.values
    plus = th - k[None] + th @ tmp @ k
    minus = np.eye(tm.shape[1]) - tmm @ k
    return PerturbedSymbols(model, k, tmp, tmm, plus, minus)


def naboko_form(T: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """``T + (I − TT*)^{1/2} κ (I − T*T)^{1/2}`` for a contraction ``T``."""
    T = np.atleast_2d(np.asarray(T, dtype=complex))
    kappa = np.atleast_2d(np.asarray(kappa, dtype=complex))
    d = T.shape[0]
    root = lambda h: herm_apply(h, lambda t: np.sqrt(np.where(t > ROUNDOFF_DEFECT, t, 0.0)))
    left = root(np.eye(d) - T @ T.conj().T)
    right = root(np.eye(d) - T.conj().T @ T)
    return T + left @ kappa @ right


@dataclass(frozen=True)
class PerturbedOperator:
    S: np.ndarray                   # Ŝ in the model's 𝒦 coordinates
    T: np.ndarray
    M: np.ndarray
    N: np.ndarray


def perturbed_operator(pert: Perturbation) -> PerturbedOperator:
    ops = model_operators(pert.model)
    return PerturbedOperator(ops.T + ops.N @ pert.kappa @ ops.M, ops.T, ops.M, ops.N)


def perturbed_resolvent(model: ModelSpace, pert, f: np.ndarray, z: complex) -> np.ndarray:
    """``(Ŝ − z)⁻¹f = (𝒰 − z)⁻¹(f + π₊κ₊^r n + π₋κn)``.

    ``n = Θ_{·κ}⁺(z)⁻¹(π₋†f)(z)`` inside the circle and
    ``n = Θ_{·κ}⁻(z)⁻¹(π₊†f)(z)`` outside.
    """
    if not isinstance(pert, Perturbation):
        pert = Perturbation(pert, model)
    sym = theta_kappa(model, pert)
    f = np.asarray(f, dtype=complex)
    f = f[..., None] if f.ndim == 2 else f
    if abs(z) < 1:
        mat = sym.plus_at(z)
        rhs = _eval_side(model, model.pi_dagger("minus", f), z, "plus")
    else:
        mat = sym.minus_at(z)
        rhs = _eval_side(model, model.pi_dagger("plus", f), z, "minus")
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise SpectrumHit(f"Θ_κ symbol is singular at {z}: an eigenvalue of the perturbed operator")
    n = np.linalg.solve(mat, rhs)                     # (p or q, m)
    a = (-np.eye(model.pi_plus.k) - sym.theta_minus_plus @ sym.kappa) @ n   # nodal (N, p, m)
    b = np.broadcast_to((sym.kappa @ n)[None], (model.n,) + (sym.kappa @ n).shape)
    return model.U_resolvent(f + model.pi("plus", a) + model.pi("minus", b), z)


# ---------------------------------------------------------------- eigenvalues from the symbols


def symbol_eigenvalues(sym: PerturbedSymbols, side: str = "plus", radius: Optional[float] = None,
                       samples: int = 512, newton_steps: int = 8) -> np.ndarray:
    """Zeros of ``det Θ_{·κ}^±`` by contour moments followed by Newton refinement.

    ``side="plus"`` searches ``|z| < radius`` (default 0.9); ``side="minus"``
    searches ``|z| > radius`` (default 1.15) through ``w = 1/z``.
    """
    if side == "plus":
        r = 0.9 if radius is None else radius
        F = lambda z: np.linalg.det(sym.plus_at(z))
        to_z = lambda w: w
    else:
        r = 1 / (1.15 if radius is None else radius)
        F = lambda w: np.linalg.det(sym.minus_at(1 / w))
        to_z = lambda w: 1 / w
    theta = 2 * np.pi * np.arange(samples) / samples
    ws = r * np.exp(1j * theta)
    vals = np.array([F(w) for w in ws])
    if np.min(np.abs(vals)) == 0:
        raise PerturbationError("symbol vanishes on the search contour")
    # dF/dθ by spectral differentiation; det Θ_{·κ}⁻(1/w) → 1 at w = 0, so no pole there
    k = np.fft.fftfreq(samples, 1.0 / samples)
    dF = np.fft.ifft(1j * k * np.fft.fft(vals))
    # (1/2πi)∮ w^m F'/F dw with dw = i w dθ and F' = (dF/dθ)/(i w)
    ratio = dF / vals
    count = int(np.rint(np.real(np.mean(ratio) / 1j)))
    if count <= 0:
        return np.zeros(0, dtype=complex)
    moments = np.array([np.mean(ws ** m * ratio) / 1j for m in range(2 * count)])
    H0 = np.array([[moments[i + j] for j in range(count)] for i in range(count)])
    H1 = np.array([[moments[i + j + 1] for j in range(count)] for i in range(count)])
    roots = np.linalg.eigvals(np.linalg.solve(H0, H1))
    refined = []
    for w in roots:
        for _ in range(newton_steps):
            h = 1e-6 * max(1.0, abs(w))
            fw = F(w)
            der = (F(w + h) - F(w - h)) / (2 * h)
            if der == 0:
                break
            step = fw / der
            w = w - step
            if abs(step) < 1e-15:
                break
        refined.append(to_z(w))
    return np.array(refined)


# ---------------------------------------------------------------- spectral components


@dataclass(frozen=True)
class SpectralComponentReport:
    tag: str
    residual: float
    tol: float
    parts: dict

    @property
    def member(self) -> bool:
        return self.residual <= self.tol


def _norm(model: ModelSpace, v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(np.abs(v) ** 2, axis=tuple(range(1, v.ndim))))))


def _component_residuals(model: ModelSpace, sym: PerturbedSymbols, f: np.ndarray) -> dict:
    """Residual vectors (nodal) of the elementary constraints for the columns of ``f``."""
    f = f[..., None] if f.ndim == 2 else f
    up = model.pi_dagger("plus", f)      # (N, p, m)
    um = model.pi_dagger("minus", f)     # (N, q, m)
    out = {}
    a = np.linalg.solve(sym.minus, up)
    b = np.linalg.solve(sym.plus, um) if sym.plus.shape[1] == sym.plus.shape[2] else None
    if b is not None:
        out["M"] = a - b
    if b is not None:
        out["N+"] = nodal_project(b, "minus")
    out["N-"] = nodal_project(a, "plus")
    if sym.plus.shape[1:] == (1, 1):
        try:
            out["D+"] = nodal_project(um / sym.plus_inner(), "minus")
        except PerturbationError:
            pass
        try:
            out["D-"] = nodal_project(up / sym.minus_inner(), "plus")
        except PerturbationError:
            pass
    return out


_COMPOSITE = {"N": ("N+", "N-"), "NM+": ("N+", "M"), "NM-": ("N-", "M"), "DM+": ("D+", "M"),
              "DM-": ("D-", "M")}


def spectral_membership(model: ModelSpace, pert, f: np.ndarray, tag: str, tol: float = 1e-8) \
        -> SpectralComponentReport:
    """Residual of the constraint defining the lifted spectral component ``tag``.

    ``M``: ``Θ_{·κ}⁻⁻¹π₊†f = Θ_{·κ}⁺⁻¹π₋†f`` nodewise.  ``N±``:
    ``π_∓†f ∈ Θ_{·κ}^± E²(G±)``.  ``D±``: the same with the scalar inner
    factors.  Composite tags intersect their parts; the residual is the largest.
    """
    if tag not in TAGS:
        raise PerturbationError(f"unknown component {tag!r}; expected one of {TAGS}")
    if not isinstance(pert, Perturbation):
        pert = Perturbation(pert, model)
    sym = theta_kappa(model, pert)
    res = _component_residuals(model, sym, np.asarray(f, dtype=complex))
    needed = _COMPOSITE.get(tag, (tag,))
    missing = [t for t in needed if t not in res]
    if missing:
        raise PerturbationError(f"component {missing[0]} is undefined for this symbol")
    parts = {t: _norm(model, res[t]) for t in needed}
    return SpectralComponentReport(tag, max(parts.values()), tol, parts)


def component_subspace(model: ModelSpace, pert, tag: str, rel: float = 1e-6,
                       basis: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Numerical kernel of the ``tag`` constraints on ``span basis`` (default the truncated ``𝒦``).

    Returns coefficient vectors (columns) and the singular values of the
    constraint map.
    """
    if not isinstance(pert, Perturbation):
        pert = Perturbation(pert, model)
    B = model.k_basis if basis is None else basis
    m = B.shape[2]
    if m == 0:
        return np.zeros((0, 0), complex), np.zeros(0)
    sym = theta_kappa(model, pert)
    res = _component_residuals(model, sym, B)
    needed = _COMPOSITE.get(tag, (tag,))
    rows = [res[t].reshape(-1, m) / np.sqrt(model.n) for t in needed]
    A = np.concatenate(rows, axis=0)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    full = np.zeros(m)
    full[: s.size] = s
    scale = max(1.0, float(s[0]) if s.size else 0.0)
    keep = full <= rel * scale
    return vh.conj().T[:, keep], full


@dataclass(frozen=True)
class DualityReport:
    dim_k: int
    dim_n: int
    dim_n_perp: int
    dim_m_dual: int
    max_angle: float
    k_mismatch: float
    n_singular: np.ndarray
    m_singular: np.ndarray

    @property
    def passed(self) -> bool:
        return self.dim_n_perp == self.dim_m_dual and self.max_angle <= 1e-4


def duality_diagnostic(model: ModelSpace, pert, rel: float = 1e-6) -> DualityReport:
    """Compare ``Ñ(Ŝ)⊥`` (within ``𝒦``) with ``M̃(Ŝ*)`` computed in the dual model.

    Both subspaces are numerical kernels of their constraints on the truncated
    ``𝒦``; the report gives their dimensions and the largest principal angle.
    """
    if not isinstance(pert, Perturbation):
        pert = Perturbation(pert, model)
    B = model.k_basis
    dual = dual_model(model)
    # the dual model lives on the same space; its 𝒦 should coincide with the original one
    Bd = dual.k_basis
    proj = model.inner(B, Bd)
    k_mismatch = float(np.max(np.abs(np.linalg.svd(proj, compute_uv=False) - 1), initial=0.0)) \
        if Bd.shape[2] == B.shape[2] else 1.0
    n_basis, n_sv = component_subspace(model, pert, "N", rel, B)
    m_basis, m_sv = component_subspace(dual, pert.dual(dual), "M", rel, B)
    m = B.shape[2]
    if n_basis.shape[1]:
        q, _ = np.linalg.qr(n_basis, mode="complete")
        n_perp = q[:, n_basis.shape[1]:]
    else:
        n_perp = np.eye(m, dtype=complex)
    if n_perp.shape[1] != m_basis.shape[1]:
        angle = np.pi / 2
    elif n_perp.shape[1] == 0:
        angle = 0.0
    else:
        angle = float(np.max(subspace_angles(n_perp, m_basis)))
    return DualityReport(m, n_basis.shape[1], n_perp.shape[1], m_basis.shape[1], angle, k_mismatch, n_sv, m_sv)
