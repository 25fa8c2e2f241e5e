"""Discretized free functional model in Nagy–Foiaş coordinates.

Model vectors are nodal arrays of shape ``(N, p + q)`` (or ``(N, p + q, m)``
for ``m`` columns): the first ``p`` slots hold ``f_π`` (weighted by ``Ξ₊``),
the last ``q`` slots hold ``f_τ`` (weighted by ``Ξ₋``).  The inner product is
``(1/N) Σ_j f_j* W_j g_j`` with ``W_j = diag(Ξ₊(ζ_j), Ξ₋(ζ_j))``.

The truncated model space ``H`` is spanned by ``π₊u`` and ``π₋v`` with ``u``,
``v`` trigonometric polynomials of degree in ``[-K, K)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .boundary import GridSample, cauchy_eval
from .schur import CharTriple, SchurError, Weight, defect, herm_apply, schur_membership, triple_from_json, \
    triple_to_json


class ModelError(ValueError):
    pass


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _cols(a: np.ndarray) -> np.ndarray:
    """Promote ``(N, k)`` to ``(N, k, 1)``."""
    return a[..., None] if a.ndim == 2 else a


def _combine(basis: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Columns ``Σ_a basis[..., a] c[a, b]``."""
    return basis @ c


def nodal_project(v: np.ndarray, side: str) -> np.ndarray:
    """Riesz projection along the node axis (axis 0) of a circle sample."""
    n = v.shape[0]
    c = np.fft.fft(v, axis=0)
    idx = np.fft.fftfreq(n, 1.0 / n)
    keep = (idx >= 0) & (idx < n // 2) if side == "plus" else (idx < 0) | (idx == -n // 2)
    c[~keep] = 0
    return np.fft.ifft(c, axis=0)


def fourier_basis(n: int, k: int, K: int) -> np.ndarray:
    """Nodal samples of ``ζ^m e_i`` for ``m ∈ [-K, K)``; shape ``(n, k, 2Kk)``, ordered by degree then slot."""
    zeta = np.exp(2j * np.pi * np.arange(n) / n)
    degs = np.arange(-K, K)
    out = np.zeros((n, k, len(degs) * k), dtype=complex)
    for a, m in enumerate(degs):
        for i in range(k):
            out[:, i, a * k + i] = zeta ** m
    return out


@dataclass(frozen=True, eq=False)
class NodalMap:
    """Linear map ``v ↦ B_j (J^r P v)_j`` from ``k``-vector functions into model vectors.

    ``blocks`` has shape ``(N, p+q, k)``; ``domain_weight`` ``(N, k, k)`` is the
    weight of the domain space; ``reflect`` applies ``(Jv)(ζ) = ζ̄ v(ζ̄)``
    first; ``pre`` optionally applies a Riesz projection before everything
    (used only to build deliberately faulty models).
    """

    blocks: np.ndarray
    domain_weight: np.ndarray
    reflect: bool = False
    pre: Optional[str] = None

    @property
    def k(self) -> int:
        return self.blocks.shape[2]

    @staticmethod
    def _J(v: np.ndarray) -> np.ndarray:
        n = v.shape[0]
        idx = (-np.arange(n)) % n
        zeta = np.exp(2j * np.pi * np.arange(n) / n)
        return np.conj(zeta)[:, None, None] * v[idx]

    @staticmethod
    def _J_adj(u: np.ndarray) -> np.ndarray:
        n = u.shape[0]
        idx = (-np.arange(n)) % n
        zeta = np.exp(2j * np.pi * np.arange(n) / n)
        return (zeta[idx])[:, None, None] * u[idx]

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = _cols(np.asarray(v, dtype=complex))
        if self.pre is not None:
            v = nodal_project(v, self.pre)
        if self.reflect:
            v = self._J(v)
        return self.blocks @ v

    def euclid_adjoint(self, f: np.ndarray) -> np.ndarray:
        u = _adj(self.blocks) @ _cols(f)
        if self.reflect:
            u = self._J_adj(u)
        if self.pre is not None:
            u = nodal_project(u, self.pre)
        return u


@dataclass(frozen=True)
class AxiomReport:
    commute_gram_plus: float
    commute_gram_minus: float
    positivity_plus: float
    positivity_minus: float
    commute_cross: float
    analytic_cross: float
    density: float
    min_eig_plus: float
    min_eig_minus: float

    def residuals(self) -> dict:
        return {
            "i1_gram_plus_commutes": self.commute_gram_plus,
            "i1_gram_minus_commutes": self.commute_gram_minus,
            "i2_gram_plus_positive": self.positivity_plus,
            "i2_gram_minus_positive": self.positivity_minus,
            "ii1_cross_commutes": self.commute_cross,
            "ii2_cross_analytic": self.analytic_cross,
            "iii_span_dense": self.density,
        }

    @property
    def worst(self) -> float:
        return max(self.residuals().values())


class ModelSpace:
    """Truncated free functional model ``Π = (π₊, π₋)`` over a circle grid."""

    def __init__(self, theta: CharTriple, pi_plus: NodalMap, pi_minus: NodalMap, K: int,
                 ambient_weight: np.ndarray, tau_projector: np.ndarray, p_slot: int,
                 shift_power: int = 1, extra_weight: Optional[np.ndarray] = None,
                 ambient_basis: Optional[np.ndarray] = None, label: str = "model"):
        self.theta = theta
        self.grid = theta.grid
        self.n = self.grid.n
        self.K = K
        self.pi_plus = pi_plus
        self.pi_minus = pi_minus
        self.W = ambient_weight            # (N, D, D), not divided by N
        self.tau_projector = tau_projector  # (N, D-p_slot, D-p_slot)
        self.p_slot = p_slot
        self.D = ambient_weight.shape[1]
        self.shift_power = shift_power     # 𝒰 = ζ**shift_power
        self.extra_weight = extra_weight
        self._ambient_basis = ambient_basis
        self.label = label

    # ------------------------------------------------------------ geometry

    @property
    def zeta(self) -> np.ndarray:
        return self.grid.nodes

    def W_apply(self, f: np.ndarray) -> np.ndarray:
        f = _cols(f)
        out = self.W @ f
        if self.extra_weight is not None:
            flat = f.reshape(self.n * self.D, -1)
            out = out + (self.extra_weight @ flat).reshape(f.shape)
        return out

    def inner(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Gram matrix ``⟨f_a, g_b⟩`` for column stacks."""
        f, g = _cols(f), _cols(g)
        wg = self.W_apply(g)
        return np.conj(f.reshape(-1, f.shape[2])).T @ wg.reshape(-1, wg.shape[2]) / self.n

    def norm(self, f: np.ndarray) -> np.ndarray:
        f = _cols(f)
        sq = np.sum(np.conj(f) * self.W_apply(f), axis=(0, 1)) / self.n
        return np.sqrt(np.abs(np.real(sq)))

    def U(self, f: np.ndarray) -> np.ndarray:
        return (self.zeta ** self.shift_power)[:, None, None] * _cols(f)

    def U_resolvent(self, f: np.ndarray, z: complex) -> np.ndarray:
        return _cols(f) / (self.zeta ** self.shift_power - z)[:, None, None]

    def pi(self, side: str, v: np.ndarray) -> np.ndarray:
        return (self.pi_plus if side == "plus" else self.pi_minus).apply(v)

    def pi_dagger(self, side: str, f: np.ndarray) -> np.ndarray:
        """Adjoint of ``π±`` for the weighted inner products; returns nodal ``(N, k, m)``."""
        m = self.pi_plus if side == "plus" else self.pi_minus
        u = m.euclid_adjoint(self.W_apply(f))
        return np.linalg.solve(m.domain_weight, u)

    def Q(self, side: str, f: np.ndarray) -> np.ndarray:
        return self.pi(side, nodal_project(self.pi_dagger(side, f), side))

    def P_theta(self, f: np.ndarray) -> np.ndarray:
        """``(I − π₊P₊π₊†)(I − π₋P₋π₋†)``."""
        g = _cols(f) - self.Q("minus", f)
        return g - self.Q("plus", g)

    # ------------------------------------------------------------ truncated spaces

    def domain_basis(self, side: str, K: Optional[int] = None) -> np.ndarray:
        k = (self.pi_plus if side == "plus" else self.pi_minus).k
        return fourier_basis(self.n, k, self.K if K is None else K)

    def _orthonormalize(self, vecs: np.ndarray, rel: float = 1e-10) -> np.ndarray:
        sq = herm_apply(self.W / self.n, np.sqrt)
        isq = herm_apply(self.W / self.n, lambda t: 1 / np.sqrt(t))
        x = (sq @ vecs).reshape(self.n * self.D, -1)
        u, s, _ = np.linalg.svd(x, full_matrices=False)
        keep = s > rel * s[0]
        z = u[:, keep].reshape(self.n, self.D, -1)
        return isq @ z

    @cached_property
    def ambient_basis(self) -> np.ndarray:
        """W-orthonormal basis of ``H = π₊(D_K) + π₋(D_K)``."""
        if self._ambient_basis is not None:
            return self._ambient_basis
        if self.extra_weight is not None:
            raise ModelError("faulty weights need an explicit ambient basis")
        span = np.concatenate([self.pi("plus", self.domain_basis("plus")),
                               self.pi("minus", self.domain_basis("minus"))], axis=2)
        return self._orthonormalize(span)

    @cached_property
    def _k_data(self):
        Qb = self.ambient_basis
        PQ = self.P_theta(Qb)
        C = self.inner(Qb, PQ)
        leak = PQ - _combine(Qb, C)
        leak_norm = float(np.max(self.norm(leak), initial=0.0))
        u, s, _ = np.linalg.svd(C)
        r = int(np.sum(s > 0.5))
        B = _combine(Qb, u[:, :r])
        return B, C, leak_norm

    @property
    def k_basis(self) -> np.ndarray:
        """W-orthonormal basis of ``𝒦_Θ = Ran P_Θ`` (shape ``(N, D, dim)``)."""
        return self._k_data[0]

    @property
    def dim_k(self) -> int:
        return self.k_basis.shape[2]

    @property
    def range_leak(self) -> float:
        """How far ``P_Θ`` maps ``H`` outside ``H`` (truncation diagnostic)."""
        return self._k_data[2]

    def coords(self, f: np.ndarray) -> np.ndarray:
        return self.inner(self.k_basis, f)

    def vector(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        c = c[:, None] if c.ndim == 1 else c
        return _combine(self.k_basis, c)

    def theta_at(self, z: complex) -> np.ndarray:
        return self.theta.at(z)

    def with_faults(self, **changes) -> "ModelSpace":
        """Copy with replaced components (used to inject deliberate faults)."""
        kw = dict(theta=self.theta, pi_plus=self.pi_plus, pi_minus=self.pi_minus, K=self.K,
                  ambient_weight=self.W, tau_projector=self.tau_projector, p_slot=self.p_slot,
                  shift_power=self.shift_power, extra_weight=self.extra_weight,
                  ambient_basis=self.ambient_basis, label=self.label + "+fault")
        kw.update(changes)
        return ModelSpace(**kw)


# ---------------------------------------------------------------- construction


def _tau_projector(delta: np.ndarray, xi_minus: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    """Nodewise ``Ξ₋``-orthogonal projector onto ``Ran Δ⁺``."""
    x = herm_apply(xi_minus, np.sqrt)
    xi = np.linalg.inv(x)
    h = x @ delta @ xi
    h = 0.5 * (h + _adj(h))
    lam, vec = np.linalg.eigh(h)
    scale = max(1.0, float(np.max(np.abs(lam))))
    mask = (lam > rel * scale).astype(float)
    proj = (vec * mask[:, None, :]) @ _adj(vec)
    return xi @ proj @ x


def build_model(theta: CharTriple, truncation: Optional[int] = None, tol: float = 1e-8) -> ModelSpace:
    """Nagy–Foiaş model: ``π₊u = (u, 0)``, ``π₋v = (Θ⁻v, Δ⁺v)``.

    ``truncation`` is the Fourier cutoff ``K`` (default ``N/4``).
    """
    g = theta.grid
    if not g.is_circle:
        raise ModelError("models are built on the unit circle grid")
    rep = schur_membership(theta, tol=max(tol, 1e-8))
    if not rep.passed:
        raise ModelError(f"Θ fails weighted Schur membership (analyticity {rep.analyticity:.2e}, "
                         f"excess {rep.excess:.2e})")
    K = g.n // 4 if truncation is None else int(truncation)
    if not 1 <= K <= g.n // 2:
        raise ModelError("truncation must lie in [1, N/2]")
    p, q = theta.p_in, theta.q_out
    n = g.n
    xp, xm = theta.weight.plus.values, theta.weight.minus.values
    tm = theta.minus.values
    try:
        dl = defect(theta).values
    except SchurError as exc:
        raise ModelError(str(exc)) from None
    W = np.zeros((n, p + q, p + q), dtype=complex)
    W[:, :p, :p] = xp
    W[:, p:, p:] = xm
    bp = np.zeros((n, p + q, p), dtype=complex)
    bp[:, :p, :] = np.eye(p)
    bm = np.zeros((n, p + q, q), dtype=complex)
    bm[:, :p, :] = tm
    bm[:, p:, :] = dl
    return ModelSpace(theta, NodalMap(bp, xp), NodalMap(bm, xm), K, W, _tau_projector(dl, xm), p)


def dual_model(model: ModelSpace) -> ModelSpace:
    """Dual model on the same space: ``π_{*∓}v = π_±(Ξ±⁻¹ Jv)`` with ``(Jv)(ζ) = ζ̄v(ζ̄)``.

    Its unitary is ``𝒰* = ζ̄``; its characteristic triple is the dual triple.
    """
    from .transforms import dualize

    def reflected(m: NodalMap) -> NodalMap:
        idx = (-np.arange(model.n)) % model.n
        winv = np.linalg.inv(m.domain_weight)
        # domain weight of the dual map is the reflected inverse weight
        dw = winv[idx]
        if m.reflect:
            raise ModelError("model is already a dual")
        return NodalMap(m.blocks @ winv, dw, reflect=True, pre=m.pre)

    return ModelSpace(dualize(model.theta), reflected(model.pi_minus), reflected(model.pi_plus), model.K,
                      model.W, model.tau_projector, model.p_slot, shift_power=-model.shift_power,
                      extra_weight=model.extra_weight, ambient_basis=model.ambient_basis,
                      label=model.label + "*")


# ---------------------------------------------------------------- axioms


def _toeplitz_residual(A: np.ndarray, k_in: int, k_out: int) -> float:
    """Largest deviation from block-Toeplitz structure (degree-shift invariance)."""
    m_out, m_in = A.shape[0] // k_out, A.shape[1] // k_in
    B = A.reshape(m_out, k_out, m_in, k_in)
    return float(np.max(np.abs(B[1:, :, 1:, :] - B[:-1, :, :-1, :]), initial=0.0))


def _fourier_coeffs(v: np.ndarray) -> np.ndarray:
    """Fourier coefficients of nodal columns, index-ordered ``[-N/2, N/2)``; shape ``(N, k, m)``."""
    return np.fft.fftshift(np.fft.fft(v, axis=0), axes=0) / v.shape[0]


def check_mod_axioms(model: ModelSpace, density_K: Optional[int] = None, floor: float = 1e-8) -> AxiomReport:
    """Residuals of the model axioms on the truncated degree window ``[-K, K)``."""
    n, K = model.n, model.K
    out = {}
    for side in ("plus", "minus"):
        m = model.pi_plus if side == "plus" else model.pi_minus
        basis = model.domain_basis(side)
        img = model.pi(side, basis)
        gram = model.inner(img, img)  # Fourier-basis Gram of π*π
        out[side] = (_toeplitz_residual(gram, m.k, m.k), float(np.min(np.linalg.eigvalsh(0.5 * (gram + _adj(gram))))))
    bplus = model.domain_basis("plus")
    cross = model.pi_dagger("minus", model.pi("plus", bplus))
    coeffs = _fourier_coeffs(cross)  # (N, q, 2Kp) over full output band
    kq, kp = model.pi_minus.k, model.pi_plus.k
    window = coeffs[n // 2 - K: n // 2 + K].reshape(2 * K * kq, -1)
    commute = _toeplitz_residual(window, kp, kq)
    nonneg_cols = [a * kp + i for a in range(K, 2 * K) for i in range(kp)]
    analytic = float(np.max(np.abs(coeffs[: n // 2][:, :, nonneg_cols]), initial=0.0))
    density = _density_residual(model, density_K)
    return AxiomReport(out["plus"][0], out["minus"][0],
                       max(0.0, floor - out["plus"][1]), max(0.0, floor - out["minus"][1]),
                       commute, analytic, density, out["plus"][1], out["minus"][1])


def _density_residual(model: ModelSpace, Kt: Optional[int] = None) -> float:
    """Worst relative distance of test vectors of the coordinate space to ``span Ran π±``."""
    n, p, D = model.n, model.p_slot, model.D
    Kt = max(1, model.K // 2) if Kt is None else Kt
    qd = D - p
    tests = []
    fb = fourier_basis(n, p, Kt)
    t1 = np.zeros((n, D, fb.shape[2]), dtype=complex)
    t1[:, :p] = fb
    tests.append(t1)
    if qd:
        fq = fourier_basis(n, qd, Kt)
        t2 = np.zeros((n, D, fq.shape[2]), dtype=complex)
        t2[:, p:] = model.tau_projector @ fq
        nz = np.max(np.abs(t2), axis=(0, 1)) > 1e-12
        tests.append(t2[:, :, nz])
    T = np.concatenate(tests, axis=2)
    Q = model.ambient_basis
    coef = model.inner(Q, T)
    resid = T - _combine(Q, coef)
    norms = model.norm(T)
    ok = norms > 0
    return float(np.max(model.norm(resid)[ok] / norms[ok], initial=0.0))


# ---------------------------------------------------------------- characteristic data from a model


def char_from_model(model: ModelSpace) -> CharTriple:
    """``(π₋†π₊, π₊*π₊, π₋*π₋)`` read off as multiplication symbols."""
    kp, kq = model.pi_plus.k, model.pi_minus.k
    ep = np.broadcast_to(np.eye(kp, dtype=complex), (model.n, kp, kp)).copy()
    eq = np.broadcast_to(np.eye(kq, dtype=complex), (model.n, kq, kq)).copy()
    fp, fm = model.pi("plus", ep), model.pi("minus", eq)
    th = model.pi_dagger("minus", fp)
    xp = _adj(fp) @ model.W_apply(fp)
    xm = _adj(fm) @ model.W_apply(fm)
    g = model.grid
    return CharTriple(GridSample(g, th), Weight(GridSample(g, 0.5 * (xp + _adj(xp))),
                                                GridSample(g, 0.5 * (xm + _adj(xm)))))


# ---------------------------------------------------------------- operators


@dataclass(frozen=True)
class ModelOperators:
    T: np.ndarray          # (dim, dim) in k_basis coordinates
    M: np.ndarray          # (p, dim)
    N: np.ndarray          # (dim, q)
    T_alt: np.ndarray      # 𝒰f − π₊M̂f, cross-check of T
    leak: float            # ‖P_Θ𝒰B − B T‖, ‖N̂ leak‖ (truncation diagnostic)

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def transfer(self, z: complex) -> np.ndarray:
        return self.M @ np.linalg.solve(self.T - z * np.eye(self.dim), self.N)


def model_operators(model: ModelSpace) -> ModelOperators:
    """``T̂ = P_Θ𝒰|𝒦``, ``M̂f = (1/2πi)∮ π₊†f``, ``N̂n = P_Θπ₋n``."""
    B = model.k_basis
    d = B.shape[2]
    UB = model.U(B)
    PUB = model.P_theta(UB)
    T = model.inner(B, PUB)
    leak = float(np.max(model.norm(PUB - _combine(B, T)), initial=0.0))
    M = coefficient_mean_nodal(model.pi_dagger("plus", B), model)
    alt = UB - model.pi("plus", np.broadcast_to(M[None], (model.n,) + M.shape))
    T_alt = model.inner(B, alt)
    kq = model.pi_minus.k
    eq = np.broadcast_to(np.eye(kq, dtype=complex), (model.n, kq, kq)).copy()
    PN = model.P_theta(model.pi("minus", eq))
    N = model.inner(B, PN)
    leak = max(leak, float(np.max(model.norm(PN - _combine(B, N)), initial=0.0)))
    if d == 0:
        return ModelOperators(np.zeros((0, 0), complex), np.zeros((model.pi_plus.k, 0), complex),
                              np.zeros((0, kq), complex), np.zeros((0, 0), complex), 0.0)
    return ModelOperators(T, M, N, T_alt, leak)


def coefficient_mean_nodal(v: np.ndarray, model: ModelSpace) -> np.ndarray:
    """``(1/2πi)∮ v dζ`` column-wise for nodal ``(N, k, m)`` arrays (the ``c₋₁`` coefficient)."""
    return np.einsum("j,jkm->km", model.zeta, v) / model.n


def _eval_side(model: ModelSpace, v: np.ndarray, z: complex, side: str) -> np.ndarray:
    """Evaluate the ``side`` analytic part of nodal columns ``v`` at ``z``."""
    g = model.grid
    cols = [cauchy_eval(GridSample(g, v[:, :, m][:, :, None]), z, side)[:, 0] for m in range(v.shape[2])]
    return np.stack(cols, axis=1)


def model_resolvent(model: ModelSpace, f: np.ndarray, z: complex) -> np.ndarray:
    """``(T̂ − z)⁻¹f = (𝒰 − z)⁻¹(f − π₊n)``.

    ``n = Θ⁺(z)⁻¹(π₋†f)(z)`` inside the curve, ``n = (π₊†f)(z)`` outside.
    """
    f = _cols(np.asarray(f, dtype=complex))
    if abs(z) < 1:
        th = model.theta_at(z)
        sv = np.linalg.svd(th, compute_uv=False)
        if sv[-1] <= 1e-12 * max(1.0, sv[0]):
            raise ModelError(f"Θ⁺({z}) is singular: z is an eigenvalue")
        n = np.linalg.solve(th, _eval_side(model, model.pi_dagger("minus", f), z, "plus"))
    else:
        n = _eval_side(model, model.pi_dagger("plus", f), z, "minus")
    rhs = f - model.pi("plus", np.broadcast_to(n[None], (model.n,) + n.shape))
    return model.U_resolvent(rhs, z)


def resolvent_vector(model: ModelSpace, n, z: complex) -> np.ndarray:
    """``r̂_{nz} = P_Θ π_± m/(ζ − z)`` with ``m = −Θ⁺(z)⁻¹n`` inside, ``m = n`` (through ``π₋``) outside.

    The sign inside is fixed so that ``r̂_{nz} = (T̂ − z)⁻¹N̂n``.
    """
    nn = np.atleast_1d(np.asarray(n, dtype=complex))
    nn = nn[:, None] if nn.ndim == 1 else nn
    kern = 1.0 / (model.zeta - z)
    if abs(z) < 1:
        m = -np.linalg.solve(model.theta_at(z), nn)
        v = kern[:, None, None] * np.broadcast_to(m[None], (model.n,) + m.shape)
        return model.P_theta(model.pi("plus", v))
    v = kern[:, None, None] * np.broadcast_to(nn[None], (model.n,) + nn.shape)
    return model.P_theta(model.pi("minus", v))


def resolvent_vector_nf(model: ModelSpace, upsilon_z: np.ndarray, upsilon_minus: GridSample,
                        n, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """Nagy–Foiaş coordinates of ``r̂_{nz}`` from transfer data alone.

    ``f_π = (Υ(z)n − (Υn)₋(ζ))/(ζ − z)`` and ``f_τ = Δ⁺(ζ)n/(ζ − z)``.
    """
    nn = np.atleast_1d(np.asarray(n, dtype=complex))
    zeta = model.zeta
    kern = 1.0 / (zeta - z)
    um = upsilon_minus.values @ nn
    f_pi = (upsilon_z @ nn)[None, :] - um
    f_pi = f_pi * kern[:, None]
    dl = model.pi_minus.blocks[:, model.p_slot:, :] @ nn
    f_tau = dl * kern[:, None]
    return f_pi, f_tau


# ---------------------------------------------------------------- JSON


def model_to_json(model: ModelSpace) -> dict:
    return {"kind": "model", "truncation": model.K, "triple": triple_to_json(model.theta)}


def model_from_json(obj: dict) -> ModelSpace:
    try:
        theta = triple_from_json(obj["triple"] if "triple" in obj else obj)
    except KeyError as exc:
        raise ModelError(f"model JSON lacks field {exc}") from None
    return build_model(theta, obj.get("truncation"))
