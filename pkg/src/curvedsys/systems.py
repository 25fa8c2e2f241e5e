"""Finite conservative systems: unitary colligations, transfer functions, CtoT."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Optional, Sequence

import numpy as np

from .boundary import BoundaryGrid, GridSample, analytic_project, cauchy_eval, grid_from_dict
from .schur import CharTriple, Weight

RANK_REL = 1e-8


class SystemError_(ValueError):
    """Invalid system data or an evaluation point inside the spectrum."""


class SpectrumHit(SystemError_):
    """The evaluation point is (numerically) an eigenvalue."""


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


def matrix_to_json(a: np.ndarray) -> list:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return np.stack([a.real, a.imag], axis=-1).tolist()


def matrix_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1 and arr.shape == (2,):
        arr = arr[None, None]
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise SystemError_("matrices must be nested lists of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# ---------------------------------------------------------------- colligations


@dataclass(frozen=True, eq=False)
class Colligation:
    """Block matrix ``[[T, N], [M, L]]`` with ``T`` d×d, ``N`` d×q, ``M`` p×d, ``L`` p×q."""

    T: np.ndarray
    N: np.ndarray
    M: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        for name in "TNML":
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=complex)))
        d = self.T.shape[0]
        if self.T.shape != (d, d) or self.N.shape[0] != d or self.M.shape[1] != d:
            raise SystemError_("colligation blocks have inconsistent shapes")
        if self.L.shape != (self.M.shape[0], self.N.shape[1]):
            raise SystemError_("L must be p×q")

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[0]

    @property
    def q(self) -> int:
        return self.N.shape[1]

    @property
    def block(self) -> np.ndarray:
        return np.block([[self.T, self.N], [self.M, self.L]])

    def unitarity_residual(self) -> float:
        a = self.block
        r1 = np.linalg.norm(_adj(a) @ a - np.eye(a.shape[1]), 2)
        r2 = np.linalg.norm(a @ _adj(a) - np.eye(a.shape[0]), 2)
        return float(max(r1, r2))

    def system(self) -> "SystemSpec":
        return SystemSpec(self.T, self.M, self.N)

    def to_json(self) -> dict:
        return {"kind": "colligation", **{k: matrix_to_json(getattr(self, k)) for k in "TNML"}}

    @classmethod
    def from_json(cls, obj: dict) -> "Colligation":
        try:
            return cls(*(matrix_from_json(obj[k]) for k in "TNML"))
        except KeyError as exc:
            raise SystemError_(f"colligation JSON lacks block {exc}") from None


def shift_colligation() -> Colligation:
    """``T = 0``, ``N = M = 1``, ``L = 0``: characteristic function ``z``, transfer ``−1/z``."""
    return Colligation([[0]], [[1]], [[1]], [[0]])


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]


def random_colligation(d: int, p: int = 1, seed=None, max_radius: float | None = None,
                       max_tries: int = 10000) -> Colligation:
    """Haar-random unitary colligation with state dimension ``d`` and ``p`` channels.

    ``max_radius`` rejects draws whose main operator has spectral radius above
    it; it keeps grid aliasing (which scales like radius**N) negligible.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(max_tries):
        u = haar_unitary(d + p, rng)
        col = Colligation(u[:d, :d], u[:d, d:], u[d:, :d], u[d:, d:])
        if max_radius is None or d == 0 or np.max(np.abs(np.linalg.eigvals(col.T))) <= max_radius:
            return col
    raise SystemError_(f"no draw with spectral radius <= {max_radius} in {max_tries} tries")


def char_fn_disk(A: Colligation, z: complex) -> np.ndarray:
    """``Θ(z) = L* + z N*(I − zT*)⁻¹M*`` for ``|z| < 1``; a ``q × p`` contraction."""
    z = complex(z)
    if abs(z) >= 1:
        raise SystemError_("characteristic function is evaluated inside the unit disk")
    res = np.linalg.solve(np.eye(A.d) - z * _adj(A.T), _adj(A.M))
    return _adj(A.L) + z * _adj(A.N) @ res


def char_triple_from_colligation(A: Colligation, grid: BoundaryGrid) -> CharTriple:
    """Unweighted boundary sample of the characteristic function on the unit circle.

    The boundary values are obtained from ``Θ(ζ) = (L − M(T − ζ)⁻¹N)*``,
    which is the analytic continuation of the disk formula to the circle.
    """
    vals = np.stack([_adj(A.L - A.M @ np.linalg.solve(A.T - z * np.eye(A.d), A.N)) for z in grid.nodes])
    return CharTriple.unweighted(GridSample(grid, vals), evaluator=lambda z: char_fn_disk(A, z))


# ---------------------------------------------------------------- systems


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Curved conservative system ``(T, M, N, Θ_u, Ξ)`` over the domain bounded by ``grid``.

    ``grid=None`` means the unit disk.  ``theta_u`` is metadata describing the
    unitary part; it is compared, never computed.
    """

    T: np.ndarray
    M: np.ndarray
    N: np.ndarray
    theta_u: Any = None
    weight: Optional[Weight] = None
    grid: Optional[BoundaryGrid] = None

    def __post_init__(self):
        for name in "TMN":
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=complex)))
        d = self.T.shape[0]
        if self.T.shape != (d, d) or self.M.shape[1] != d or self.N.shape[0] != d:
            raise SystemError_("system matrices have inconsistent shapes")

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[0]

    @property
    def q(self) -> int:
        return self.N.shape[1]

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvals(self.T)

    def inside(self, z: complex) -> bool:
        if self.grid is None:
            return abs(z) < 1
        return self.grid.contains(z)

    def spectrum_distance(self, z: complex) -> float:
        return float(np.min(np.abs(self.spectrum - z))) if self.d else np.inf

    def resolvent(self, z: complex, rhs: np.ndarray) -> np.ndarray:
        if self.spectrum_distance(z) <= 1e-10 * max(1.0, np.max(np.abs(self.spectrum), initial=0)):
            raise SpectrumHit(f"z = {z} lies in the spectrum")
        return np.linalg.solve(self.T - complex(z) * np.eye(self.d), rhs)

    def to_json(self) -> dict:
        out = {"kind": "system", **{k: matrix_to_json(getattr(self, k)) for k in "TMN"}}
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SystemSpec":
        try:
            mats = [matrix_from_json(obj[k]) for k in "TMN"]
        except KeyError as exc:
            raise SystemError_(f"system JSON lacks matrix {exc}") from None
        grid = grid_from_dict(obj["grid"]) if "grid" in obj and obj["grid"].get("kind", "circle") != "circle" else None
        return cls(*mats, grid=grid)


def transfer_fn(S: SystemSpec, z: complex) -> np.ndarray:
    """``Υ(z) = M(T − z)⁻¹N``."""
    return S.M @ S.resolvent(z, S.N)


def transfer_sample(S: SystemSpec, grid: BoundaryGrid) -> GridSample:
    """``Υ`` evaluated on the curve itself.

    For a finite system whose spectrum avoids the curve ``Υ`` is analytic
    across it, so both one-sided traces equal this sample.
    """
    return GridSample(grid, np.stack([transfer_fn(S, z) for z in grid.nodes]))


@dataclass(frozen=True)
class ResolventVectorSet:
    points: np.ndarray
    directions: np.ndarray
    vectors: np.ndarray  # (n_points, d, n_directions)

    def residual(self, S: SystemSpec) -> float:
        worst = 0.0
        for z, r in zip(self.points, self.vectors):
            worst = max(worst, float(np.max(np.abs((S.T - z * np.eye(S.d)) @ r - S.N @ self.directions))))
        return worst

    def stacked(self) -> np.ndarray:
        return np.concatenate(list(self.vectors), axis=1) if len(self.vectors) else np.zeros((0, 0))


def resolvent_vectors(S: SystemSpec, probes: Sequence[complex], directions=None) -> ResolventVectorSet:
    """``r_{nz} = (T − z)⁻¹Nn`` for each probe and each direction column."""
    dirs = np.eye(S.q, dtype=complex) if directions is None else np.atleast_2d(np.asarray(directions, dtype=complex))
    pts = np.asarray(list(probes), dtype=complex)
    vecs = np.stack([S.resolvent(z, S.N @ dirs) for z in pts]) if len(pts) else np.zeros((0, S.d, dirs.shape[1]))
    return ResolventVectorSet(pts, dirs, vecs)


def numerical_rank(a: np.ndarray, rel: float = RANK_REL) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rel * s[0])) if s[0] > 0 else 0


def simplicity_check(S: SystemSpec, probes: Sequence[complex], rel: float = RANK_REL) -> tuple[bool, int]:
    """Span of the resolvent vectors over all probes and directions versus the state space."""
    valid = [z for z in probes if S.spectrum_distance(z) > 1e-8]
    if not valid:
        raise SystemError_("no probe lies in the resolvent set")
    if not any(S.inside(z) for z in valid):
        raise SystemError_("at least one probe must lie inside the curve")
    rank = numerical_rank(resolvent_vectors(S, valid).stacked(), rel)
    return rank == S.d, rank


@dataclass(frozen=True)
class EqualityReport:
    residuals: dict
    cond: float

    @property
    def residual(self) -> float:
        return max(self.residuals.values())


def system_equal(S1: SystemSpec, S2: SystemSpec, W) -> EqualityReport:
    """Residuals of ``T₂W = WT₁``, ``M₂W = M₁``, ``N₂ = WN₁`` and equality of ``Θ_u``, ``Ξ``."""
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    if S1.T.shape != S2.T.shape or S1.M.shape != S2.M.shape or S1.N.shape != S2.N.shape \
            or W.shape != S1.T.shape:
        raise SystemError_("dimension mismatch between systems and witness")
    res = {
        "T": float(np.max(np.abs(S2.T @ W - W @ S1.T), initial=0)),
        "M": float(np.max(np.abs(S2.M @ W - S1.M), initial=0)),
        "N": float(np.max(np.abs(S2.N - W @ S1.N), initial=0)),
        "theta_u": 0.0 if _same_meta(S1.theta_u, S2.theta_u) else np.inf,
        "weight": _weight_gap(S1.weight, S2.weight),
    }
    return EqualityReport(res, float(np.linalg.cond(W)))


def _same_meta(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    try:
        return bool(np.allclose(np.asarray(a), np.asarray(b)))
    except (TypeError, ValueError):
        return a == b


def _weight_gap(a: Optional[Weight], b: Optional[Weight]) -> float:
    if a is None and b is None:
        return 0.0
    if a is None or b is None:
        other = a or b
        return max((other.plus - GridSample.constant(other.grid, np.eye(other.plus.shape[0]))).sup_norm(),
                   (other.minus - GridSample.constant(other.grid, np.eye(other.minus.shape[0]))).sup_norm())
    return max((a.plus - b.plus).sup_norm(), (a.minus - b.minus).sup_norm())


# ---------------------------------------------------------------- CtoT


def ctot_eval(theta: CharTriple, z: complex, return_cond: bool = False):
    """Transfer value predicted from characteristic data alone.

    Inside the curve: ``(P₊Θ⁻)(z) − Θ⁺(z)⁻¹``.  Outside: ``−(P₋Θ⁻)(z)``.
    Interior values of ``Θ⁺`` come from its boundary sample via the Cauchy
    integral.  A numerically singular ``Θ⁺(z)`` raises :class:`SpectrumHit`.
    """
    tm = theta.minus
    if theta.grid.contains(z):
        th = cauchy_eval(theta.theta_plus, z, "plus")
        sv = np.linalg.svd(th, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        if sv[-1] <= 1e-12 * max(1.0, theta.theta_plus.sup_norm()) or cond > 1e12:
            raise SpectrumHit(f"Θ⁺({z}) is singular (cond {cond:.2e}); z is a model eigenvalue")
        val = cauchy_eval(tm, z, "plus") - np.linalg.inv(th)
    else:
        cond = 1.0
        val = -cauchy_eval(tm, z, "minus")
    return (val, cond) if return_cond else val


def curved_from_colligation(A: Colligation, eta, W0=None, n: int = 256) -> SystemSpec:
    """System over ``φ(𝔻)`` built from a disk colligation through matrix functions of ``T₀``.

    ``T = W₀φ(T₀)W₀⁻¹``, ``M = M₀ψ₊(T₀)W₀⁻¹``, ``N = W₀ψ₋(T₀)N₀`` with
    ``ψ₊ = √φ′/(η₊∘φ)`` and ``ψ₋ = √φ′·(η₋∘φ)``; weights are ``η±*η±``
    sampled on the image curve with ``n`` nodes.  ``eta`` is an
    :class:`curvedsys.transforms.EtaMap`.
    """
    from .transforms import phi_eta_sys

    base = SystemSpec(A.T, A.M, A.N)
    S = phi_eta_sys(base, eta, n=n)
    if W0 is None:
        return S
    W0 = np.asarray(W0, dtype=complex)
    W0inv = np.linalg.inv(W0)
    return SystemSpec(W0 @ S.T @ W0inv, S.M @ W0inv, W0 @ S.N, theta_u=S.theta_u, weight=S.weight, grid=S.grid)


# ---------------------------------------------------------------- transfer data


@dataclass(frozen=True, eq=False)
class JumpData:
    """Transfer-function data: one-sided boundary traces, probe values and weights.

    ``probes`` holds ``(z, Υ(z))`` pairs.  Values outside the curve can also be
    produced from ``upsilon_minus`` by the Cauchy integral, because ``Υ``
    vanishes at infinity there; inside the curve ``Υ`` may have poles, so only
    the stored probes are available.
    """

    upsilon_plus: GridSample
    upsilon_minus: GridSample
    probes: tuple = ()
    weight: Optional[Weight] = None

    def __post_init__(self):
        if not self.upsilon_plus.grid.same_as(self.upsilon_minus.grid):
            raise SystemError_("traces live on different grids")
        if self.upsilon_plus.shape != self.upsilon_minus.shape:
            raise SystemError_("trace shapes differ")
        object.__setattr__(self, "probes", tuple((complex(z), np.atleast_2d(np.asarray(v, dtype=complex)))
                                                 for z, v in self.probes))

    @property
    def grid(self) -> BoundaryGrid:
        return self.upsilon_plus.grid

    @property
    def shape(self) -> tuple[int, int]:
        return self.upsilon_plus.shape

    @property
    def jump(self) -> GridSample:
        return self.upsilon_plus - self.upsilon_minus

    @cached_property
    def resolved_weight(self) -> Weight:
        p, q = self.shape
        return self.weight if self.weight is not None else Weight.identity(self.grid, p, q)

    def inside_probes(self) -> list:
        return [(z, v) for z, v in self.probes if self.grid.contains(z)]

    def outside_value(self, z: complex) -> np.ndarray:
        return cauchy_eval(self.upsilon_minus, z, "minus")

    def value(self, z: complex) -> np.ndarray:
        for zz, v in self.probes:
            if abs(zz - z) < 1e-14:
                return v
        if not self.grid.contains(z):
            return self.outside_value(z)
        raise SystemError_(f"no stored transfer value at interior point {z}")

    def to_json(self) -> dict:
        from .boundary import sample_to_obj
        out = {
            "kind": "transfer",
            "grid": self.grid.to_dict(),
            "upsilon_plus": sample_to_obj(self.upsilon_plus),
            "upsilon_minus": sample_to_obj(self.upsilon_minus),
            "probes": [{"z": [z.real, z.imag], "value": matrix_to_json(v)} for z, v in self.probes],
        }
        if self.weight is not None:
            out["xi_plus"] = sample_to_obj(self.weight.plus)
            out["xi_minus"] = sample_to_obj(self.weight.minus)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "JumpData":
        from .boundary import sample_from_obj
        try:
            grid = grid_from_dict(obj["grid"])
            up = sample_from_obj(obj["upsilon_plus"], grid)
            um = sample_from_obj(obj["upsilon_minus"], grid)
        except KeyError as exc:
            raise SystemError_(f"transfer JSON lacks field {exc}") from None
        probes = [(complex(*p["z"]), matrix_from_json(p["value"])) for p in obj.get("probes", [])]
        weight = None
        if "xi_plus" in obj:
            weight = Weight(sample_from_obj(obj["xi_plus"], grid), sample_from_obj(obj["xi_minus"], grid))
        return cls(up, um, tuple(probes), weight)


def default_probes(S: SystemSpec, count: int, seed=0, margin: float = 0.05) -> list:
    """``count`` probes split between inside (|z| ≤ 0.9) and outside (1.2 ≤ |z| ≤ 3), away from σ(T)."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        inside = k % 2 == 0
        while True:
            r = rng.uniform(0.0, 0.9) if inside else rng.uniform(1.2, 3.0)
            z = complex(r * np.exp(2j * np.pi * rng.uniform()))
            if S.spectrum_distance(z) > margin:
                break
        out.append(z)
    return out


def jump_from_system(S: SystemSpec, grid: BoundaryGrid, probes: Sequence[complex] = ()) -> JumpData:
    """Transfer data of a finite system: traces taken on the curve, plus probe values."""
    if S.d and np.min([grid.distance(lam) for lam in S.spectrum]) < grid.spacing:
        raise SystemError_("an eigenvalue of T lies within one grid spacing of the curve")
    samp = transfer_sample(S, grid)
    return JumpData(samp, samp, tuple((z, transfer_fn(S, z)) for z in probes), S.weight)


def jump_from_triple(theta: CharTriple, probes: Sequence[complex] = ()) -> JumpData:
    """Transfer data predicted from characteristic data alone, for ``Θ⁺`` invertible on the circle.

    ``Υ₋ = −P₋Θ⁻`` and ``Υ₊ = P₊Θ⁻ − (Θ⁺)⁻¹``; probe values come from :func:`ctot_eval`.
    """
    tm = theta.minus
    minus = -analytic_project(tm, "minus")
    plus = analytic_project(tm, "plus") - theta.theta_plus.inverse()
    return JumpData(plus, minus, tuple((z, ctot_eval(theta, z)) for z in probes), theta.weight)
