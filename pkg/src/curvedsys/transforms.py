"""Transformations Φ_η between domains, the Faber transform and duality."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .boundary import (
    BoundaryGrid, GridSample, analytic_project, cauchy_eval, interpolate, make_grid,
)
from .schur import CharTriple, Weight
from .systems import JumpData, SystemSpec, SystemError_, jump_from_triple, matrix_from_json, matrix_to_json


class TransformError(ValueError):
    pass


def matrix_function(A: np.ndarray, f: Callable[[complex], complex]) -> np.ndarray:
    """``f(A)`` for a scalar function analytic near ``σ(A)``.

    Uses the eigendecomposition when the eigenvector basis is well conditioned
    and a Cauchy integral around the spectrum otherwise.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    if n == 0:
        return A.copy()
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) < 1e6:
        fl = np.array([f(complex(x)) for x in lam])
        return (V * fl[None, :]) @ np.linalg.inv(V)
    # contour hugging the spectrum; f must be analytic inside radius r
    center = lam.mean()
    r = np.max(np.abs(lam - center)) + 0.05
    m = 1024
    pts = center + r * np.exp(2j * np.pi * np.arange(m) / m)
    out = np.zeros_like(A)
    for z in pts:
        out += f(complex(z)) * (z - center) * np.linalg.inv(z * np.eye(n) - A)
    return out / m


# ---------------------------------------------------------------- conformal maps


class ConformalMap:
    """Conformal map ``φ`` from the unit disk (or a previous domain) onto the target domain."""

    kind = "abstract"

    def f(self, z):
        raise NotImplementedError

    def finv(self, w):
        raise NotImplementedError

    def df(self, z):
        raise NotImplementedError

    def sqrt_df(self, z):
        raise NotImplementedError

    @property
    def onto_circle(self) -> bool:
        """Does the map take the unit circle onto the unit circle?"""
        return True

    def image_grid(self, n: int) -> BoundaryGrid:
        return make_grid("circle", n)

    def compose(self, inner: "ConformalMap") -> "ConformalMap":
        """``self ∘ inner``."""
        return ComposedMap(inner, self)

    def to_json(self) -> dict:
        raise TransformError(f"map kind {self.kind} has no JSON form")


class IdentityMap(ConformalMap):
    kind = "identity"

    def f(self, z):
        return z

    def finv(self, w):
        return w

    def df(self, z):
        return np.ones_like(np.asarray(z, dtype=complex)) if np.ndim(z) else 1.0 + 0j

    def sqrt_df(self, z):
        return self.df(z)

    def to_json(self) -> dict:
        return {"kind": "identity"}


class MobiusMap(ConformalMap):
    """Disk automorphism ``z ↦ (z − a)/(1 − āz)``."""

    kind = "mobius"

    def __init__(self, a: complex):
        a = complex(a)
        if abs(a) >= 1:
            raise TransformError("Möbius parameter must satisfy |a| < 1")
        self.a = a

    def f(self, z):
        return (z - self.a) / (1 - np.conj(self.a) * z)

    def finv(self, w):
        return (w + self.a) / (1 + np.conj(self.a) * w)

    def df(self, z):
        return (1 - abs(self.a) ** 2) / (1 - np.conj(self.a) * z) ** 2

    def sqrt_df(self, z):
        # branch continuous on the closed disk, positive at z = 0 direction ā-free
        return np.sqrt(1 - abs(self.a) ** 2) / (1 - np.conj(self.a) * z)

    def to_json(self) -> dict:
        return {"kind": "mobius", "a": [self.a.real, self.a.imag]}


class NearCircleMap(ConformalMap):
    """``z ↦ z + εz²`` (univalent on the closed disk for ``|ε| < 1/2``)."""

    kind = "jordan"

    def __init__(self, eps: float):
        eps = float(eps)
        if not abs(eps) < 0.5:
            raise TransformError("near-circle map needs |eps| < 1/2")
        self.eps = eps

    def f(self, z):
        return z + self.eps * z * z

    def df(self, z):
        return 1 + 2 * self.eps * z

    def sqrt_df(self, z):
        return np.sqrt(1 + 2 * self.eps * np.asarray(z, dtype=complex))

    def finv(self, w):
        if self.eps == 0:
            return w
        # root of εz² + z − w closest to w
        disc = np.sqrt(1 + 4 * self.eps * np.asarray(w, dtype=complex))
        return (-1 + disc) / (2 * self.eps)

    @property
    def onto_circle(self) -> bool:
        return self.eps == 0

    def image_grid(self, n: int) -> BoundaryGrid:
        return make_grid("jordan", n, eps=self.eps)

    def to_json(self) -> dict:
        return {"kind": "jordan", "eps": self.eps}


class ComposedMap(ConformalMap):
    kind = "composed"

    def __init__(self, inner: ConformalMap, outer: ConformalMap):
        self.inner, self.outer = inner, outer

    def f(self, z):
        return self.outer.f(self.inner.f(z))

    def finv(self, w):
        return self.inner.finv(self.outer.finv(w))

    def df(self, z):
        return self.outer.df(self.inner.f(z)) * self.inner.df(z)

    def sqrt_df(self, z):
        return self.outer.sqrt_df(self.inner.f(z)) * self.inner.sqrt_df(z)

    @property
    def onto_circle(self) -> bool:
        return self.inner.onto_circle and self.outer.onto_circle

    def image_grid(self, n: int) -> BoundaryGrid:
        if self.onto_circle:
            return make_grid("circle", n)
        raise TransformError("composed maps onto non-circular curves are not supported")


def map_from_json(obj: dict) -> ConformalMap:
    kind = obj.get("kind")
    if kind == "identity":
        return IdentityMap()
    if kind == "mobius":
        a = obj.get("a", [0.0, 0.0])
        return MobiusMap(complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a))
    if kind == "jordan":
        return NearCircleMap(obj.get("eps", 0.1))
    raise TransformError(f"unsupported conformal map kind {kind!r}")


# ---------------------------------------------------------------- multipliers


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Bounded invertible multiplier ``η(w) = h(w)·C``.

    ``C`` is a constant invertible matrix (``None`` means identity) and ``h`` a
    scalar function analytic and zero-free on the closed target domain
    (``None`` means 1).
    """

    const: Optional[np.ndarray] = None
    scalar_function: Optional[Callable[[complex], complex]] = None

    def __post_init__(self):
        if self.const is not None:
            c = np.atleast_2d(np.asarray(self.const, dtype=complex))
            if c.shape[0] != c.shape[1] or np.linalg.cond(c) > 1e12:
                raise TransformError("constant multiplier must be square and invertible")
            object.__setattr__(self, "const", c)

    @classmethod
    def identity(cls) -> "Multiplier":
        return cls()

    def channel_matrix(self, k: int) -> np.ndarray:
        if self.const is None:
            return np.eye(k, dtype=complex)
        if self.const.shape[0] == 1 and k > 1:
            return self.const[0, 0] * np.eye(k)
        if self.const.shape[0] != k:
            raise TransformError(f"multiplier is {self.const.shape[0]}x{self.const.shape[0]}, channel has {k}")
        return self.const

    def at(self, w: complex, k: int) -> np.ndarray:
        h = 1.0 if self.scalar_function is None else self.scalar_function(w)
        return h * self.channel_matrix(k)

    def sample(self, grid: BoundaryGrid, k: int) -> GridSample:
        c = self.channel_matrix(k)
        h = np.ones(grid.n, dtype=complex) if self.scalar_function is None else \
            np.array([self.scalar_function(w) for w in grid.nodes], dtype=complex)
        return GridSample(grid, h[:, None, None] * c[None])

    def inverse(self) -> "Multiplier":
        c = None if self.const is None else np.linalg.inv(self.const)
        h = None if self.scalar_function is None else (lambda w, g=self.scalar_function: 1.0 / g(w))
        return Multiplier(c, h)

    def times(self, other: "Multiplier") -> "Multiplier":
        """Pointwise product ``self · other``."""
        if self.const is None:
            c = other.const
        elif other.const is None:
            c = self.const
        else:
            c = self.const @ other.const
        hs = [h for h in (self.scalar_function, other.scalar_function) if h is not None]
        if not hs:
            h = None
        elif len(hs) == 1:
            h = hs[0]
        else:
            h = lambda w, a=hs[0], b=hs[1]: a(w) * b(w)
        return Multiplier(c, h)

    def compose(self, phi_inv: Callable) -> "Multiplier":
        """``w ↦ η(φ⁻¹(w))``."""
        if self.scalar_function is None:
            return self
        return Multiplier(self.const, lambda w, h=self.scalar_function: h(phi_inv(w)))

    def tilde_inverse(self) -> "Multiplier":
        """``η~⁻¹`` with ``η~(z) = η(z̄)*``."""
        c = None if self.const is None else np.linalg.inv(self.const.conj().T)
        h = None if self.scalar_function is None else \
            (lambda w, g=self.scalar_function: 1.0 / np.conj(g(np.conj(w))))
        return Multiplier(c, h)

    def to_json(self) -> dict:
        if self.scalar_function is not None:
            raise TransformError("function multipliers have no JSON form")
        return {"constant": None if self.const is None else matrix_to_json(self.const)}

    @classmethod
    def from_json(cls, obj) -> "Multiplier":
        if obj is None:
            return cls()
        if isinstance(obj, dict):
            c = obj.get("constant")
            return cls(None if c is None else matrix_from_json(c))
        return cls(matrix_from_json(obj))


@dataclass(frozen=True, eq=False)
class EtaMap:
    """Transformation datum ``η = (φ, η₊, η₋)``."""

    phi: ConformalMap
    eta_plus: Multiplier = Multiplier()
    eta_minus: Multiplier = Multiplier()

    @classmethod
    def identity(cls) -> "EtaMap":
        return cls(IdentityMap())

    @classmethod
    def constant(cls, phi: ConformalMap, eta_plus=None, eta_minus=None) -> "EtaMap":
        return cls(phi, Multiplier(eta_plus), Multiplier(eta_minus))

    def induced_weight(self, grid: BoundaryGrid, p: int, q: int) -> Weight:
        """``(η₊*η₊, η₋*η₋)`` on ``grid``: the weights produced from unit weights."""
        ep, em = self.eta_plus.sample(grid, p), self.eta_minus.sample(grid, q)
        return Weight(ep.adjoint() @ ep, em.adjoint() @ em)

    def compose(self, inner: "EtaMap") -> "EtaMap":
        """``self ∘ inner = (φ₃₂∘φ₂₁, η₃₊·(η₂₊∘φ₃₂⁻¹), η₃₋·(η₂₋∘φ₃₂⁻¹))``."""
        phi = self.phi.compose(inner.phi)
        return EtaMap(phi,
                      self.eta_plus.times(inner.eta_plus.compose(self.phi.finv)),
                      self.eta_minus.times(inner.eta_minus.compose(self.phi.finv)))

    def multiplier_defect(self, grid: BoundaryGrid, p: int, q: int) -> float:
        """Largest negative-index content of η± and their inverses on ``grid``."""
        out = 0.0
        for m, k in ((self.eta_plus, p), (self.eta_minus, q)):
            for mm in (m, m.inverse()):
                out = max(out, analytic_project(mm.sample(grid, k), "minus").sup_norm())
        return out

    def to_json(self) -> dict:
        return {"phi": self.phi.to_json(), "eta_plus": self.eta_plus.to_json(),
                "eta_minus": self.eta_minus.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "EtaMap":
        try:
            return cls(map_from_json(obj["phi"]), Multiplier.from_json(obj.get("eta_plus")),
                       Multiplier.from_json(obj.get("eta_minus")))
        except (KeyError, SystemError_) as exc:
            raise TransformError(f"bad EtaMap JSON: {exc}") from None


# ---------------------------------------------------------------- composition on grids


def _pullback(u: GridSample, phi: ConformalMap, target: BoundaryGrid) -> np.ndarray:
    """Node values of ``u∘φ⁻¹`` on the target grid."""
    src = u.grid
    if target.kind == "jordan":
        # target nodes are φ of the uniform source nodes
        if not np.allclose(phi.f(src.nodes), target.nodes, atol=1e-12):
            raise TransformError("target grid is not the image of the source nodes")
        return u.values.copy()
    pre = phi.finv(target.nodes)
    if src.is_circle:
        if np.max(np.abs(np.abs(pre) - 1)) > 1e-10:
            raise TransformError("composition leaves the source curve")
        return interpolate(u, pre)
    raise TransformError("composition from a non-circular source grid needs matching parametrization")


def target_grid(u_grid: BoundaryGrid, phi: ConformalMap) -> BoundaryGrid:
    if isinstance(phi, IdentityMap):
        return u_grid
    if not u_grid.is_circle:
        raise TransformError("transformations start from the unit circle grid")
    return phi.image_grid(u_grid.n)


def pullback_sample(u: GridSample, phi: ConformalMap, grid: BoundaryGrid | None = None) -> GridSample:
    grid = grid or target_grid(u.grid, phi)
    if isinstance(phi, IdentityMap) and grid.same_as(u.grid):
        return u
    return GridSample(grid, _pullback(u, phi, grid))


def phi_eta_cfn(theta: CharTriple, eta: EtaMap) -> CharTriple:
    """``(η₋⁻¹(Θ⁺∘φ⁻¹)η₊, η₊*(Ξ₊∘φ⁻¹)η₊, η₋*(Ξ₋∘φ⁻¹)η₋)``."""
    grid = target_grid(theta.grid, eta.phi)
    p, q = theta.p_in, theta.q_out
    ep, em = eta.eta_plus.sample(grid, p), eta.eta_minus.sample(grid, q)
    th = pullback_sample(theta.theta_plus, eta.phi, grid)
    xp = pullback_sample(theta.weight.plus, eta.phi, grid)
    xm = pullback_sample(theta.weight.minus, eta.phi, grid)
    new_th = em.inverse() @ th @ ep
    def evaluator(w, ev=theta.evaluator):
        inner = np.atleast_2d(np.asarray(ev(eta.phi.finv(w)), dtype=complex))
        return np.linalg.inv(eta.eta_minus.at(w, q)) @ inner @ eta.eta_plus.at(w, p)

    weight = Weight(ep.adjoint() @ xp @ ep, em.adjoint() @ xm @ em)
    return CharTriple(new_th, weight, evaluator if theta.evaluator is not None else None)


def phi_eta_sys(S: SystemSpec, eta: EtaMap, n: int | None = None) -> SystemSpec:
    """``T₂ = φ(T₁)``, ``M₂ = η₊⁻¹M₁ψ₊(T₁)``, ``N₂ = ψ₋(T₁)N₁η₋`` and transported weights.

    ``ψ₊ = √φ′/(h₊∘φ)`` and ``ψ₋ = √φ′·(h₋∘φ)`` carry the scalar parts of the
    multipliers; constant matrix parts act on the channels.
    """
    phi = eta.phi
    sq = matrix_function(S.T, phi.sqrt_df)
    hp, hm = eta.eta_plus.scalar_function, eta.eta_minus.scalar_function
    psi_p = sq if hp is None else sq @ matrix_function(S.T, lambda t: 1.0 / hp(phi.f(t)))
    psi_m = sq if hm is None else sq @ matrix_function(S.T, lambda t: hm(phi.f(t)))
    M2 = np.linalg.inv(eta.eta_plus.channel_matrix(S.p)) @ S.M @ psi_p
    N2 = psi_m @ S.N @ eta.eta_minus.channel_matrix(S.q)
    T2 = matrix_function(S.T, phi.f)
    if S.weight is not None:
        grid = target_grid(S.weight.grid, phi)
        ep, em = eta.eta_plus.sample(grid, S.p), eta.eta_minus.sample(grid, S.q)
        xp = pullback_sample(S.weight.plus, phi, grid)
        xm = pullback_sample(S.weight.minus, phi, grid)
        weight = Weight(ep.adjoint() @ xp @ ep, em.adjoint() @ xm @ em)
    else:
        grid = phi.image_grid(n or 256)
        weight = None if isinstance(phi, IdentityMap) and eta.eta_plus.const is None \
            and eta.eta_plus.scalar_function is None and eta.eta_minus.const is None \
            and eta.eta_minus.scalar_function is None else eta.induced_weight(grid, S.p, S.q)
    return SystemSpec(T2, M2, N2, theta_u=S.theta_u, weight=weight,
                      grid=None if grid.is_circle else grid)


def faber_transform(u: GridSample, eta: Multiplier | None, phi: ConformalMap,
                    k: int | None = None) -> GridSample:
    """``F_{η,φ}(u) = P₋(η·(u∘φ⁻¹))`` on the image grid (``η`` acts on the left)."""
    v = pullback_sample(u, phi)
    if eta is not None:
        v = eta.sample(v.grid, v.shape[0] if k is None else k) @ v
    return analytic_project(v, "minus")


def phi_eta_tfn(J: JumpData, eta: EtaMap) -> JumpData:
    """Transported transfer data.

    Outside the new curve ``Υ₂ = P₋[η₊⁻¹(Υ₁₋∘φ⁻¹)η₋]``; the inner trace follows
    from the jump relation ``Υ₂₊ − Υ₂₋ = η₊⁻¹(Υ₁₊ − Υ₁₋)∘φ⁻¹ η₋``; interior
    probe values are carried by ``Υ₂(φ(z)) = η₊⁻¹Υ₁(z)η₋ − (P₊[η₊⁻¹(Υ₁₋∘φ⁻¹)η₋])(φ(z))``.
    """
    phi = eta.phi
    grid = target_grid(J.grid, phi)
    p, q = J.shape
    ep_inv = eta.eta_plus.inverse().sample(grid, p)
    em = eta.eta_minus.sample(grid, q)
    um = ep_inv @ pullback_sample(J.upsilon_minus, phi, grid) @ em
    jump = ep_inv @ pullback_sample(J.jump, phi, grid) @ em
    new_minus = analytic_project(um, "minus")
    analytic_part = um - new_minus
    new_plus = new_minus + jump
    probes = []
    for z, v in J.probes:
        w = complex(phi.f(z))
        if not J.grid.contains(z):
            probes.append((w, cauchy_eval(new_minus, w, "minus")))
        else:
            corr = cauchy_eval(analytic_part, w, "plus")
            probes.append((w, np.linalg.inv(eta.eta_plus.at(w, p)) @ v @ eta.eta_minus.at(w, q) - corr))
    weight = None
    if J.weight is not None:
        ep, emm = eta.eta_plus.sample(grid, p), eta.eta_minus.sample(grid, q)
        weight = Weight(ep.adjoint() @ pullback_sample(J.weight.plus, phi, grid) @ ep,
                        emm.adjoint() @ pullback_sample(J.weight.minus, phi, grid) @ emm)
    elif not (isinstance(phi, IdentityMap) and eta.eta_plus.const is None and eta.eta_minus.const is None
              and eta.eta_plus.scalar_function is None and eta.eta_minus.scalar_function is None):
        weight = eta.induced_weight(grid, p, q)
    return JumpData(new_plus, new_minus, tuple(probes), weight)


# ---------------------------------------------------------------- duality


def _reflect_index(grid: BoundaryGrid) -> np.ndarray:
    idx = (-np.arange(grid.n)) % grid.n
    if np.max(np.abs(np.conj(grid.nodes) - grid.nodes[idx])) > 1e-12:
        raise TransformError("grid is not symmetric under complex conjugation")
    return idx


def tilde(u: GridSample) -> GridSample:
    """``A~(ζ) = A(ζ̄)*`` on a conjugation-symmetric grid."""
    idx = _reflect_index(u.grid)
    return GridSample(u.grid, np.conj(np.swapaxes(u.values[idx], 1, 2)))


def pairing(u: GridSample, v: GridSample) -> np.ndarray:
    """``⟨u, v⟩ = (1/2πi)∮ v(ζ̄)ᵀ u(ζ) dζ`` for vector samples (columns of the same height)."""
    idx = _reflect_index(u.grid)
    vv = v.values[idx]
    return np.einsum("j,jra,jrb->ab", u.grid.weights, vv, u.values) / (2j * np.pi)


def dualize(x):
    """Duality functor on triples, systems, transfer data and models; an involution."""
    if isinstance(x, CharTriple):
        w = x.weight
        ev = None
        if x.evaluator is not None:
            ev = lambda z, f=x.evaluator: np.conj(np.asarray(f(np.conj(z)))).T
        return CharTriple(tilde(x.theta_plus), Weight(tilde(w.minus).inverse(), tilde(w.plus).inverse()), ev)
    if isinstance(x, SystemSpec):
        w = None if x.weight is None else Weight(tilde(x.weight.minus).inverse(), tilde(x.weight.plus).inverse())
        tu = None if x.theta_u is None else np.conj(np.asarray(x.theta_u)).T
        return SystemSpec(x.T.conj().T, x.N.conj().T, x.M.conj().T, theta_u=tu, weight=w, grid=x.grid)
    if isinstance(x, JumpData):
        w = None if x.weight is None else Weight(tilde(x.weight.minus).inverse(), tilde(x.weight.plus).inverse())
        probes = tuple((np.conj(z), v.conj().T) for z, v in x.probes)
        return JumpData(tilde(x.upsilon_plus), tilde(x.upsilon_minus), probes, w)
    from .model import ModelSpace, dual_model
    if isinstance(x, ModelSpace):
        return dual_model(x)
    raise TransformError(f"cannot dualize {type(x).__name__}")


def dual_eta(eta: EtaMap) -> EtaMap:
    """``η₋* = (φ~, η₋~⁻¹, η₊~⁻¹)``; for a real-symmetric φ the map ``φ~`` is ``z ↦ conj(φ(z̄))``."""
    phi = eta.phi
    if isinstance(phi, IdentityMap):
        phit: ConformalMap = phi
    elif isinstance(phi, MobiusMap):
        phit = MobiusMap(np.conj(phi.a))
    elif isinstance(phi, NearCircleMap):
        phit = phi
    else:
        raise TransformError("dual of this conformal map is not implemented")
    return EtaMap(phit, eta.eta_minus.tilde_inverse(), eta.eta_plus.tilde_inverse())


# ---------------------------------------------------------------- models and commutation


def phi_eta_model(model, eta: EtaMap):
    """Transported model: ``π₂±v = (π₁±(η± v))∘φ⁻¹`` on nodal data, with the ambient weight carried along.

    The symbols of the result are exactly the Φ_η images of the original
    symbols, so ``char_from_model`` commutes with the transformation.
    """
    from .model import ModelSpace, NodalMap

    phi = eta.phi
    if not phi.onto_circle:
        raise TransformError("models are transported only by maps of the circle onto itself")
    if model.pi_plus.reflect or model.extra_weight is not None:
        raise TransformError("only plain (non-dual, fault-free) models can be transported")
    grid = target_grid(model.grid, phi)

    def carry(values: np.ndarray) -> np.ndarray:
        return _pullback(GridSample(model.grid, values), phi, grid)

    def carry_map(m: NodalMap, mult: Multiplier) -> NodalMap:
        e = mult.sample(grid, m.k).values
        dw = carry(m.domain_weight)
        return NodalMap(carry(m.blocks) @ e, np.conj(np.swapaxes(e, 1, 2)) @ dw @ e, pre=m.pre)

    theta2 = phi_eta_cfn(model.theta, eta)
    return ModelSpace(theta2, carry_map(model.pi_plus, eta.eta_plus), carry_map(model.pi_minus, eta.eta_minus),
                      model.K, carry(model.W), carry(model.tau_projector), model.p_slot,
                      label=model.label + "∘φ")


@dataclass(frozen=True)
class CommuteReport:
    cfn_tfn: float
    mod_cfn: float
    mod_sys: float
    axioms: float

    @property
    def worst(self) -> float:
        return max(self.cfn_tfn, self.mod_cfn, self.mod_sys)

    def residuals(self) -> dict:
        return {"cfn_tfn": self.cfn_tfn, "mod_cfn": self.mod_cfn, "mod_sys": self.mod_sys,
                "transported_axioms": self.axioms}


def check_phi_f_commute(colligation, eta: EtaMap, n: int = 512, probes=None, seed: int = 0) -> CommuteReport:
    """Two-path residuals of the squares (Cfn→Tfn), (Mod→Cfn) and (Mod→Sys) under ``eta``.

    * Cfn→Tfn: transfer data predicted from ``Φ_η Θ`` against ``Φ_η`` of the
      transfer data predicted from ``Θ`` (boundary traces and probe values).
    * Mod→Cfn: symbols of the transported model against ``Φ_η Θ``.
    * Mod→Sys: transfer function of the transported model's operators against
      the transfer function of ``Φ_η`` applied to the original model's operators.
    """
    from .model import build_model, char_from_model, check_mod_axioms, model_operators
    from .systems import char_triple_from_colligation, ctot_eval, default_probes, transfer_fn

    grid = make_grid("circle", n)
    theta = char_triple_from_colligation(colligation, grid)
    theta2 = phi_eta_cfn(theta, eta)
    S0 = colligation.system()
    if probes is None:
        probes = default_probes(S0, 10, seed=seed, margin=0.1)
    probes = [z for z in probes if abs(z) > 1 or np.min(np.abs(S0.spectrum - z)) > 1e-6]

    # Cfn → Tfn
    J2 = phi_eta_tfn(jump_from_triple(theta, probes), eta)
    direct = jump_from_triple(theta2)
    cfn_tfn = max((J2.upsilon_minus - direct.upsilon_minus).sup_norm(),
                  (J2.upsilon_plus - direct.upsilon_plus).sup_norm())
    for w, v in J2.probes:
        cfn_tfn = max(cfn_tfn, float(np.max(np.abs(v - ctot_eval(theta2, w)))))

    # Mod → Cfn
    model = build_model(theta)
    model2 = phi_eta_model(model, eta)
    back = char_from_model(model2)
    mod_cfn = max(float(np.max(np.abs(back.theta_plus.values - theta2.theta_plus.values))),
                  float(np.max(np.abs(back.weight.plus.values - theta2.weight.plus.values))),
                  float(np.max(np.abs(back.weight.minus.values - theta2.weight.minus.values))))
    axioms = check_mod_axioms(model2).worst

    # Mod → Sys
    ops1, ops2 = model_operators(model), model_operators(model2)
    S2 = phi_eta_sys(SystemSpec(ops1.T, ops1.M, ops1.N), eta, n)
    mod_sys = float(np.max(np.abs(np.sort_complex(np.linalg.eigvals(ops2.T)) - np.sort_complex(S2.spectrum)),
                           initial=0.0))
    for w, _ in J2.probes:
        if np.min(np.abs(S2.spectrum - w), initial=np.inf) > 1e-6:
            mod_sys = max(mod_sys, float(np.max(np.abs(ops2.transfer(w) - transfer_fn(S2, w)))))
    return CommuteReport(cfn_tfn, mod_cfn, mod_sys, axioms)
