"""Recovering characteristic data from transfer data on the disk.

Two routes are provided.  When the defect has full rank at every node the
boundary jump determines ``Θ⁺`` pointwise through a polar-decomposition
identity.  Otherwise the model space is rebuilt from resolvent coordinate
vectors, the shift on ``𝒦 ∔ π₊E²₊`` is Wold-decomposed and ``Θ⁺`` is read off
the wandering subspace up to a constant unitary, which is then fitted
against the transfer data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boundary import GridSample, OuterFunction, analytic_project, cauchy_eval
from .model import ModelSpace, build_model, model_operators, nodal_project
from .schur import CharTriple, herm_apply, schur_membership
from .systems import JumpData, SystemSpec

__all__ = [
    "JumpData", "RecoveryError", "psi", "polar_from_difference", "partial_phase", "DefectRecovery",
    "defect_from_transfer", "GaugeFit", "gauge_residual", "fit_unitary_gauge", "RecoveryResult",
    "recover_char_disk", "Similarity", "similarity_to_model",
]


class RecoveryError(ValueError):
    pass


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


# ---------------------------------------------------------------- polar identity


def psi(t):
    """``ψ(t) = √((2 + t − √(t² + 4t))/2)``, evaluated as ``2/(√t + √(t + 4))`` to avoid cancellation.

    If ``b = 1/s − s`` with ``0 < s ≤ 1`` then ``ψ(b²) = s``.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, None)
    return 2.0 / (np.sqrt(t) + np.sqrt(t + 4.0))


def polar_from_difference(B: np.ndarray) -> np.ndarray:
    """``|L| = (LL*)^{1/2}`` from ``B = L⁻¹ − L*`` for an invertible contraction ``L``.

    Works on a single matrix or a stack ``(..., p, q)``.
    """
    B = np.asarray(B, dtype=complex)
    return herm_apply(_adj(B) @ B, psi)


def partial_phase(B: np.ndarray, modulus: np.ndarray, rel: float = 1e-10) -> np.ndarray:
    """``U*`` restricted to ``Ran(I − |L|²)`` where ``L = |L|U``: ``B(|L|⁻¹ − |L|)⁺``.

    On the kernel of ``I − |L|²`` the result is zero.
    """
    def pinv_gap(s):
        ok = 1.0 - s > rel
        return np.where(ok, s / np.where(ok, 1.0 - s * s, 1.0), 0.0)

    return B @ herm_apply(modulus, pinv_gap)


# ---------------------------------------------------------------- defect from the jump


@dataclass(frozen=True)
class DefectRecovery:
    defect: GridSample            # Δ⁺ (q × q)
    modulus: np.ndarray           # |L| nodewise, L = Ξ₋^{1/2} Θ⁺ Ξ₊^{-1/2}
    phase: np.ndarray             # U* on Ran(I − |L|²) nodewise (p × q)
    min_gap: float                # smallest eigenvalue of I − |L|² over the nodes
    theta_plus: Optional[GridSample]  # Θ⁺ when the defect has full rank everywhere


def defect_from_transfer(J: JumpData, full_rank_floor: float = 1e-6) -> DefectRecovery:
    """Defect ``Δ⁺`` (and, when possible, ``Θ⁺`` itself) from the boundary jump ``Υ₊ − Υ₋``.

    With ``X± = Ξ±^{1/2}`` and ``L = X₋Θ⁺X₊⁻¹`` the jump equals
    ``X₊⁻¹(L* − L⁻¹)X₋``, so ``B = L⁻¹ − L*`` is known and
    ``|L| = ψ(B*B)``.  Then ``Δ⁺ = X₋⁻¹(I − |L|²)^{1/2}X₋``.  Where
    ``I − |L|²`` is invertible the phase is determined as well and
    ``L = |L|(I − |L|²)⁻¹|L|B*``.
    """
    p, q = J.shape
    if p != q:
        raise RecoveryError("recovery needs square transfer data (equal channel dimensions)")
    w = J.resolved_weight
    xp, xm = w.plus_sqrt.values, w.minus_sqrt.values
    xm_inv = np.linalg.inv(xm)
    B = -xp @ J.jump.values @ xm_inv
    modulus = polar_from_difference(B)
    lam = np.linalg.eigvalsh(np.eye(q) - modulus @ modulus)
    min_gap = float(lam.min())
    root = herm_apply(np.eye(q) - modulus @ modulus, lambda t: np.sqrt(np.where(t > 1e-13, t, 0.0)))
    delta = GridSample(J.grid, xm_inv @ root @ xm)
    phase = partial_phase(B, modulus)
    theta = None
    if min_gap > full_rank_floor:
        L = modulus @ np.linalg.solve(np.eye(q) - modulus @ modulus, modulus @ _adj(B))
        theta = GridSample(J.grid, xm_inv @ L @ xp)
    return DefectRecovery(delta, modulus, phase, min_gap, theta)


# ---------------------------------------------------------------- gauge fit


def _gauge_operator(theta0: CharTriple, J: JumpData, V: np.ndarray):
    """Predicted transfer data of ``Θ_U⁺ = UΘ₀⁺`` with ``V = U*``: boundary traces and probe values."""
    w = theta0.weight
    th = theta0.theta_plus.values
    tm = w.plus_inv.values @ _adj(th) @ V @ w.minus.values
    tms = GridSample(theta0.grid, tm)
    minus = -analytic_project(tms, "minus").values
    plus = analytic_project(tms, "plus").values - np.linalg.solve(th, np.broadcast_to(V, th.shape))
    probes = []
    for z, _ in J.probes:
        if J.grid.contains(z):
            val = cauchy_eval(tms, z, "plus") - np.linalg.solve(theta0.at(z), V)
        else:
            val = -cauchy_eval(tms, z, "minus")
        probes.append(val)
    return plus, minus, probes


def gauge_residual(theta0: CharTriple, J: JumpData, U: np.ndarray) -> np.ndarray:
    """Stacked residual of the gauge conditions for ``Θ⁺ = UΘ₀⁺``; affine in the entries of ``U*``."""
    plus, minus, probes = _gauge_operator(theta0, J, np.conj(np.asarray(U, dtype=complex)).T)
    parts = [(plus - J.upsilon_plus.values).ravel(), (minus - J.upsilon_minus.values).ravel()]
    parts += [(v - y).ravel() for v, (_, y) in zip(probes, J.probes)]
    return np.concatenate(parts)


@dataclass(frozen=True)
class GaugeFit:
    U: np.ndarray
    residual: float               # relative residual of the conditions at the projected unitary
    linear_residual: float        # relative residual of the unconstrained least-squares solution
    singular_values: np.ndarray
    rank_deficient: bool


def fit_unitary_gauge(theta0: CharTriple, J: JumpData, rank_rel: float = 1e-8) -> GaugeFit:
    """Constant unitary ``U`` with ``Θ⁺ = UΘ₀⁺`` best matching the transfer data.

    The conditions are linear in ``V = U*``; the least-squares solution is
    projected onto the unitary group (nearest unitary in the polar sense).  A
    rank-deficient system means some direction is invisible in the transfer
    function, and the gauge is then not unique.
    """
    q = theta0.q_out
    zero = gauge_residual(theta0, J, np.zeros((q, q)))
    cols = []
    for a in range(q):
        for b in range(q):
            E = np.zeros((q, q), dtype=complex)
            E[a, b] = 1.0
            # U* = E  ⇔  U = Eᴴ
            cols.append(gauge_residual(theta0, J, E.T) - zero)
    A = np.stack(cols, axis=1)
    y = -zero
    sv = np.linalg.svd(A, compute_uv=False)
    deficient = bool(sv[-1] <= rank_rel * max(sv[0], 1e-300))
    v, *_ = np.linalg.lstsq(A, y, rcond=None)
    V = v.reshape(q, q)
    scale = max(np.linalg.norm(y), 1e-300)
    lin = float(np.linalg.norm(A @ v - y) / scale)
    u, _, vh = np.linalg.svd(V.conj().T)
    U = u @ vh
    res = float(np.linalg.norm(gauge_residual(theta0, J, U)) / scale)
    return GaugeFit(U, res, lin, sv, deficient)


# ---------------------------------------------------------------- full pipeline


@dataclass(frozen=True)
class RecoveryResult:
    theta: CharTriple
    gauge: np.ndarray
    method: str                   # "jump" or "wold"
    residuals: dict = field(default_factory=dict)
    wandering_dim: Optional[int] = None
    k_dim: Optional[int] = None
    rank_deficient: bool = False

    @property
    def theta0(self) -> CharTriple:
        """Recovered function before the gauge is applied."""
        return self.residuals.get("_theta0", self.theta)

    def report(self) -> dict:
        return {k: v for k, v in self.residuals.items() if not k.startswith("_")}


def _w_orthonormal(vecs: np.ndarray, W: np.ndarray, rel: float):
    n = W.shape[0]
    sq = herm_apply(W / n, np.sqrt)
    isq = herm_apply(W / n, lambda t: 1 / np.sqrt(t))
    x = (sq @ vecs).reshape(-1, vecs.shape[2])
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    keep = s > rel * s[0]
    return isq @ u[:, keep].reshape(n, W.shape[1], -1), s


def _outside_probes(count: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    r = rng.uniform(1.2, 3.0, count)
    return list(r * np.exp(2j * np.pi * rng.uniform(size=count)))


def _coordinate_vectors(J: JumpData, delta: np.ndarray, probes: Sequence[complex]) -> np.ndarray:
    """Nodal vectors ``((Υ(z)n − (Υn)₋)/(ζ − z), Δ⁺n/(ζ − z))`` for ``n`` ranging over a basis."""
    zeta = J.grid.nodes
    um = J.upsilon_minus.values
    out = []
    for z in probes:
        yz = J.value(z)
        kern = 1.0 / (zeta - z)
        f_pi = (yz[None] - um) * kern[:, None, None]
        f_tau = delta * kern[:, None, None]
        out.append(np.concatenate([f_pi, f_tau], axis=1))
    return np.concatenate(out, axis=2)


def _wold_theta(J: JumpData, delta: GridSample, trunc: Optional[int], rank_rel: float, outside: int):
    g = J.grid
    n = g.n
    p, q = J.shape
    w = J.resolved_weight
    if not w.is_scalar:
        raise RecoveryError("the Wold route handles scalar weights only")
    K = n // 4 if trunc is None else int(trunc)
    inside = [z for z, _ in J.inside_probes()]
    probes = inside + _outside_probes(max(outside, len(inside)))
    kvecs = _coordinate_vectors(J, delta.values, probes)
    W = np.zeros((n, p + q, p + q), dtype=complex)
    W[:, :p, :p] = w.plus.values
    W[:, p:, p:] = w.minus.values
    kb, ks = _w_orthonormal(kvecs, W, rank_rel)
    k_dim = kb.shape[2]
    zeta = g.nodes
    shifts = np.zeros((n, p + q, K * p), dtype=complex)
    for k in range(K):
        for i in range(p):
            shifts[:, i, k * p + i] = zeta ** k
    X, _ = _w_orthonormal(np.concatenate([kb, shifts], axis=2), W, 1e-12)

    def inner(a, b):
        return np.conj(a.reshape(-1, a.shape[2])).T @ (W @ b).reshape(-1, b.shape[2]) / n

    G = inner(X, zeta[:, None, None] * X)
    u, s, _ = np.linalg.svd(G)
    wander = X @ u[:, -q:]
    gap = (float(s[-q - 1]) if s.size > q else np.inf, float(s[-q]))
    null_count = int(np.sum(s <= 1e-6))
    e_pi = wander[:, :p, :]
    chi_m = OuterFunction(GridSample(g, w.minus.values[:, 0, 0].real)).boundary().scalar
    xi_p = w.plus.values[:, 0, 0].real
    theta0 = _adj(e_pi) * (xi_p / chi_m)[:, None, None]
    return GridSample(g, theta0), k_dim, gap, null_count


def recover_char_disk(J: JumpData, method: str = "auto", trunc: Optional[int] = None,
                      rank_rel: float = 1e-9, outside_probes: int = 16) -> RecoveryResult:
    """Characteristic triple from transfer data on the unit circle.

    ``method`` is ``"jump"`` (pointwise polar recovery, needs a full-rank
    defect), ``"wold"`` (model reconstruction) or ``"auto"``.
    """
    if not J.grid.is_circle:
        raise RecoveryError("recovery runs on the unit circle grid")
    rec = defect_from_transfer(J)
    weight = J.resolved_weight
    if method == "auto":
        method = "jump" if rec.theta_plus is not None else "wold"
    residuals: dict = {"defect_gap": rec.min_gap}
    k_dim = wdim = None
    if method == "jump":
        if rec.theta_plus is None:
            raise RecoveryError("defect is not of full rank; the jump alone does not fix Θ⁺")
        theta0 = CharTriple(rec.theta_plus, weight)
    elif method == "wold":
        th0, k_dim, gap, wdim = _wold_theta(J, rec.defect, trunc, rank_rel, outside_probes)
        if wdim != J.shape[1]:
            raise RecoveryError(f"wandering subspace has dimension {wdim}, expected {J.shape[1]}; "
                                "data may be non-simple or the truncation too small")
        theta0 = CharTriple(th0, weight)
        residuals["wandering_singular"] = gap[1]
        residuals["wandering_separation"] = gap[0]
    else:
        raise RecoveryError(f"unknown recovery method {method!r}")
    residuals["analyticity"] = analytic_project(theta0.theta_plus, "minus").sup_norm()
    fit = fit_unitary_gauge(theta0, J)
    theta = CharTriple(GridSample(J.grid, fit.U[None] @ theta0.theta_plus.values), weight)
    mem = schur_membership(theta, tol=1e-6)
    residuals.update({"gauge": fit.residual, "membership_excess": mem.excess, "_theta0": theta0})
    return RecoveryResult(theta, fit.U, method, residuals, wdim, k_dim, fit.rank_deficient)


# ---------------------------------------------------------------- similarity to the model


@dataclass(frozen=True)
class Similarity:
    V: np.ndarray                 # coordinates in the model's 𝒦 basis (dim 𝒦 × d)
    nodal: np.ndarray             # nodal images of the state basis
    model: ModelSpace
    cond: float
    intertwining: float           # ‖T̂V − VT‖
    output: float                 # ‖M̂V − M‖
    input: float                  # ‖N̂ − VN‖
    leak: float                   # distance of the images from the truncated 𝒦

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.nodal @ np.asarray(f, dtype=complex)


def similarity_to_model(S: SystemSpec, theta: CharTriple, model: Optional[ModelSpace] = None) -> Similarity:
    """Operator ``V`` from the state space to the model: ``(Vf)_π = −g₋``, ``(Vf)_τ = Δ⁺⁻¹Θ⁺(g₊ − g₋)``.

    Here ``g(ζ) = M(T − ζ)⁻¹f`` on the circle, split into its analytic parts.
    The inverse of ``Δ⁺`` is taken on its range.
    """
    model = model or build_model(theta)
    zeta = model.zeta
    p = model.p_slot
    d = S.d
    eye = np.eye(d)
    g = np.stack([S.M @ np.linalg.solve(S.T - z * eye, eye) for z in zeta])  # (N, p, d)
    gm = nodal_project(g, "minus")
    gp = g - gm
    delta = model.pi_minus.blocks[:, p:, :]
    th = theta.theta_plus.values
    tau = np.linalg.pinv(delta, rcond=1e-10) @ (th @ (gp - gm))
    nodal = np.concatenate([-gm, tau], axis=1)
    V = model.coords(nodal)
    leak = float(np.max(model.norm(nodal - model.vector(V)), initial=0.0))
    ops = model_operators(model)
    sv = np.linalg.svd(V, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    return Similarity(V, nodal, model, cond,
                      float(np.max(np.abs(ops.T @ V - V @ S.T), initial=0.0)),
                      float(np.max(np.abs(ops.M @ V - S.M), initial=0.0)),
                      float(np.max(np.abs(ops.N - V @ S.N), initial=0.0)),
                      leak)
