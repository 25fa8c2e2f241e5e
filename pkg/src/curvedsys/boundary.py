"""Discretized boundary calculus on closed curves.

Boundary functions are stored as node values ``(N, rows, cols)``.  The unit
circle is the reference curve: there the analytic projections are exact
Fourier truncations.  Other smooth Jordan curves use the trapezoidal rule on
a subtracted Cauchy kernel, which is spectrally accurate for smooth data.

Projection convention: ``P+`` keeps Fourier indices ``n >= 0`` and ``P-``
keeps ``n < 0``, so functions in the range of ``P-`` vanish at infinity and
``P+ + P- = I`` exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CURVE_KINDS = ("circle", "mobius", "jordan")

DEFAULT_TOL = 1e-10


class BoundaryError(ValueError):
    """Raised for unsupported grids, shape mismatches and unreliable quadrature."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def mobius(a: complex) -> tuple[Callable, Callable, Callable]:
    """Disk automorphism ``z -> (z - a) / (1 - conj(a) z)``, its inverse and derivative."""
    a = complex(a)
    ac = a.conjugate()

    def f(z):
        return (z - a) / (1 - ac * z)

    def finv(w):
        return (w + a) / (1 + ac * w)

    def df(z):
        return (1 - abs(a) ** 2) / (1 - ac * z) ** 2

    return f, finv, df


def near_circle(eps: float) -> tuple[Callable, Callable]:
    """The univalent map ``z -> z + eps z**2`` (``|eps| < 1/2``) and its derivative."""
    if not abs(eps) < 0.5:
        raise BoundaryError("near-circle map needs |eps| < 1/2 to stay univalent")

    def f(z):
        return z + eps * z * z

    def df(z):
        return 1 + 2 * eps * z

    return f, df


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Nodes of a positively oriented closed curve with trapezoid weights for ``∮ · dζ``.

    Nodes are images ``γ(θ_j)`` of the uniform parameter grid
    ``θ_j = 2πj/N``; ``weights[j] = γ'(θ_j) 2π/N``.
    """

    kind: str
    n: int
    param: np.ndarray
    nodes: np.ndarray
    dnodes: np.ndarray
    weights: np.ndarray
    options: dict = field(default_factory=dict)

    @property
    def is_circle(self) -> bool:
        return self.kind == "circle"

    @property
    def spacing(self) -> float:
        return float(np.max(np.abs(np.diff(np.append(self.nodes, self.nodes[0])))))

    def distance(self, z: complex) -> float:
        return float(np.min(np.abs(self.nodes - z)))

    def contains(self, z: complex) -> bool:
        """Winding-number test: is ``z`` inside the curve (in G+)?"""
        if z == np.inf or np.isinf(z):
            return False
        wind = np.sum(self.weights / (self.nodes - z)) / (2j * np.pi)
        return bool(wind.real > 0.5)

    def same_as(self, other: "BoundaryGrid") -> bool:
        return self is other or (
            self.kind == other.kind
            and self.n == other.n
            and np.allclose(self.nodes, other.nodes, rtol=0, atol=1e-14)
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "N": self.n, **self.options}


def make_grid(kind: str = "circle", n: int = 256, **options) -> BoundaryGrid:
    """Uniform-parameter grid on a supported curve.

    ``kind="mobius"`` takes ``a`` (complex, ``|a| < 1``): nodes are the Möbius
    images of the uniform circle nodes, so they cluster on the unit circle.
    ``kind="jordan"`` takes ``eps``: the curve is the image of the unit circle
    under ``z + eps z**2``.
    """
    if kind not in CURVE_KINDS:
        raise BoundaryError(f"unsupported curve kind {kind!r}")
    if not _is_power_of_two(int(n)) or n < 8:
        raise BoundaryError(f"node count must be a power of two >= 8, got {n}")
    n = int(n)
    theta = 2 * np.pi * np.arange(n) / n
    w = np.exp(1j * theta)
    opts: dict = {}
    if kind == "circle":
        nodes, dnodes = w, 1j * w
    elif kind == "mobius":
        a = complex(options.get("a", 0.0))
        if abs(a) >= 1:
            raise BoundaryError("Möbius parameter must satisfy |a| < 1")
        f, _, df = mobius(a)
        nodes, dnodes = f(w), df(w) * 1j * w
        opts["a"] = [a.real, a.imag]
    else:
        eps = float(options.get("eps", 0.1))
        f, df = near_circle(eps)
        nodes, dnodes = f(w), df(w) * 1j * w
        opts["eps"] = eps
    weights = dnodes * (2 * np.pi / n)
    return BoundaryGrid(kind, n, theta, nodes, dnodes, weights, opts)


def grid_from_dict(d: dict) -> BoundaryGrid:
    opts = {}
    if "a" in d:
        a = d["a"]
        opts["a"] = complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a)
    if "eps" in d:
        opts["eps"] = float(d["eps"])
    return make_grid(d.get("kind", "circle"), int(d["N"]), **opts)


def _as_values(values, n: int) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    if v.ndim == 1:
        v = v[:, None, None]
    elif v.ndim == 2:
        v = v[:, :, None]
    if v.ndim != 3 or v.shape[0] != n:
        raise BoundaryError(f"values must have leading dimension {n}, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class GridSample:
    """Matrix-valued function sampled at the nodes of a grid; ``values`` is ``(N, r, c)``."""

    grid: BoundaryGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.grid.n))

    @classmethod
    def from_function(cls, grid: BoundaryGrid, func: Callable) -> "GridSample":
        vals = [np.atleast_2d(np.asarray(func(z), dtype=complex)) for z in grid.nodes]
        return cls(grid, np.stack(vals))

    @classmethod
    def constant(cls, grid: BoundaryGrid, mat) -> "GridSample":
        m = np.atleast_2d(np.asarray(mat, dtype=complex))
        return cls(grid, np.broadcast_to(m, (grid.n,) + m.shape).copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def scalar(self) -> np.ndarray:
        if self.shape != (1, 1):
            raise BoundaryError("sample is not scalar")
        return self.values[:, 0, 0]

    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.values, ord=2, axis=(1, 2))))

    def _check(self, other: "GridSample") -> None:
        if not self.grid.same_as(other.grid):
            raise BoundaryError("samples live on different grids")

    def __add__(self, other: "GridSample") -> "GridSample":
        self._check(other)
        return GridSample(self.grid, self.values + other.values)

    def __sub__(self, other: "GridSample") -> "GridSample":
        self._check(other)
        return GridSample(self.grid, self.values - other.values)

    def __neg__(self) -> "GridSample":
        return GridSample(self.grid, -self.values)

    def __matmul__(self, other: "GridSample") -> "GridSample":
        self._check(other)
        if self.shape[1] != other.shape[0]:
            raise BoundaryError(f"cannot multiply shapes {self.shape} and {other.shape}")
        return GridSample(self.grid, self.values @ other.values)

    def scale(self, c) -> "GridSample":
        return GridSample(self.grid, self.values * c)

    def adjoint(self) -> "GridSample":
        return GridSample(self.grid, np.conj(np.swapaxes(self.values, 1, 2)))

    def inverse(self) -> "GridSample":
        return GridSample(self.grid, np.linalg.inv(self.values))


@dataclass(frozen=True, eq=False)
class FourierRep:
    """Coefficients ``c_n`` for ``n in [-N/2, N/2)``, stored in that order as ``(N, r, c)``."""

    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.n // 2, self.n // 2)

    def coefficient(self, k: int) -> np.ndarray:
        return self.coeffs[k + self.n // 2]

    def __call__(self, z: complex) -> np.ndarray:
        """Evaluate ``Σ c_n z**n``; on the circle this is trigonometric interpolation."""
        z = complex(z)
        powers = z ** self.indices.astype(float) if z != 0 else (self.indices == 0).astype(complex)
        return np.tensordot(powers, self.coeffs, axes=(0, 0))

    def evaluate_many(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        powers = zs[:, None] ** self.indices[None, :].astype(float)
        return np.tensordot(powers, self.coeffs, axes=(1, 0))


def _require_circle(grid: BoundaryGrid, what: str) -> None:
    if not grid.is_circle:
        raise BoundaryError(f"{what} needs a uniform unit-circle grid")


def fourier(u: GridSample) -> FourierRep:
    """Discrete Fourier representation of a circle sample."""
    _require_circle(u.grid, "fourier")
    c = np.fft.fft(u.values, axis=0) / u.grid.n
    return FourierRep(np.fft.fftshift(c, axes=0))


def from_fourier(grid: BoundaryGrid, rep: FourierRep) -> GridSample:
    _require_circle(grid, "from_fourier")
    if rep.n != grid.n:
        raise BoundaryError("coefficient count does not match grid")
    c = np.fft.ifftshift(rep.coeffs, axes=0)
    return GridSample(grid, np.fft.ifft(c, axis=0) * grid.n)


def _circle_split(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[0]
    c = np.fft.fft(values, axis=0)
    cp = c.copy()
    cp[n // 2:] = 0
    plus = np.fft.ifft(cp, axis=0)
    return plus, values - plus


def _derivative_along(grid: BoundaryGrid, values: np.ndarray) -> np.ndarray:
    """``du/dζ`` at the nodes via spectral differentiation in the parameter."""
    n = grid.n
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0
    du_dtheta = np.fft.ifft(1j * k[:, None, None] * np.fft.fft(values, axis=0), axis=0)
    return du_dtheta / grid.dnodes[:, None, None]


def _cauchy_plus_matrix(grid: BoundaryGrid) -> np.ndarray:
    """Matrix of the off-diagonal part of ``P+`` on a general curve (subtracted kernel)."""
    z = grid.nodes
    diff = z[None, :] - z[:, None]
    np.fill_diagonal(diff, 1.0)
    ker = grid.weights[None, :] / diff / (2j * np.pi)
    np.fill_diagonal(ker, 0.0)
    return ker


def analytic_project(u: GridSample, side: str = "plus") -> GridSample:
    """Analytic projection ``P+`` (range E²(G+)) or ``P-`` (range E²(G-), zero at infinity)."""
    if side not in ("plus", "minus"):
        raise BoundaryError(f"side must be 'plus' or 'minus', got {side!r}")
    grid = u.grid
    if grid.is_circle:
        plus, minus = _circle_split(u.values)
    else:
        ker = _cauchy_plus_matrix(grid)
        v = u.values
        flat = v.reshape(grid.n, -1)
        rowsum = ker.sum(axis=1)
        off = ker @ flat - rowsum[:, None] * flat
        diag = (grid.weights / (2j * np.pi))[:, None] * _derivative_along(grid, v).reshape(grid.n, -1)
        plus = (flat + off + diag).reshape(v.shape)
        minus = v - plus
    return GridSample(grid, plus if side == "plus" else minus)


def projection_residual(u: GridSample) -> float:
    """Idempotence defect of ``P+`` on ``u``; reported for non-circle grids where it is not exact."""
    p = analytic_project(u, "plus")
    pp = analytic_project(p, "plus")
    scale = max(u.sup_norm(), 1.0)
    return (pp - p).sup_norm() / scale


def cauchy_eval(u: GridSample, z: complex, side: str = "plus") -> np.ndarray:
    """Value at an off-curve point ``z`` of the analytic extension of ``P±u``.

    For ``side="minus"`` and ``z = ∞`` the value is zero.
    """
    grid = u.grid
    if side not in ("plus", "minus"):
        raise BoundaryError(f"side must be 'plus' or 'minus', got {side!r}")
    if side == "minus" and (z is None or np.isinf(z)):
        return np.zeros(u.shape, dtype=complex)
    z = complex(z)
    inside = grid.contains(z)
    if (side == "plus") != inside:
        raise BoundaryError(f"point {z} lies on the wrong side of the curve for P{'+' if side == 'plus' else '-'}")
    if grid.distance(z) < grid.spacing:
        raise BoundaryError(f"point {z} is within one grid spacing of the curve")
    if grid.is_circle:
        rep = fourier(u)
        idx = rep.indices
        sel = idx >= 0 if side == "plus" else idx < 0
        powers = z ** idx[sel].astype(float)
        return np.tensordot(powers, rep.coeffs[sel], axes=(0, 0))
    val = np.tensordot(grid.weights / (grid.nodes - z), u.values, axes=(0, 0)) / (2j * np.pi)
    return val if side == "plus" else -val


def hilbert_transform(u: GridSample) -> GridSample:
    """Conjugate function on the circle: Fourier multiplier ``-i sgn(n)`` (Nyquist term dropped)."""
    _require_circle(u.grid, "hilbert_transform")
    vals = u.values
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(vals), initial=0.0)):
        raise BoundaryError("hilbert_transform expects a real-valued sample")
    n = u.grid.n
    k = np.fft.fftfreq(n, 1.0 / n)
    mult = -1j * np.sign(k)
    mult[n // 2] = 0
    out = np.fft.ifft(mult[:, None, None] * np.fft.fft(vals.real, axis=0), axis=0)
    return GridSample(u.grid, out.real.astype(complex))


def outer_log_coefficients(m: np.ndarray) -> np.ndarray:
    """Taylor coefficients (``n = 0..N/2-1``) of ``log χ`` for the outer ``χ`` with ``|χ|² = m``."""
    n = m.shape[0]
    c = np.fft.fft(0.5 * np.log(m)) / n
    a = np.zeros(n // 2, dtype=complex)
    a[0] = c[0].real
    a[1:] = 2 * c[1:n // 2]
    return a


def scalar_outer_factor(m: GridSample) -> FourierRep:
    """Outer function ``χ = exp(½ log m + i H[½ log m])`` with ``|χ|² = m`` and ``χ(0) > 0``."""
    _require_circle(m.grid, "scalar_outer_factor")
    vals = m.scalar
    if np.any(np.abs(vals.imag) > 1e-12 * np.max(np.abs(vals))) or np.any(vals.real <= 0):
        raise BoundaryError("outer factorization needs a positive weight at every node")
    a = outer_log_coefficients(vals.real)
    n = m.grid.n
    logchi = np.fft.ifft(np.concatenate([a, np.zeros(n - n // 2)])) * n
    rep = fourier(GridSample(m.grid, np.exp(logchi)))
    # χ is analytic inside; drop aliasing noise so interior evaluation stays bounded
    rep.coeffs[: n // 2] = 0
    return rep


class OuterFunction:
    """Scalar outer function on the disk built from a positive boundary weight.

    Evaluates through its logarithm, which is accurate at interior points
    where the coefficient series of ``χ`` itself converges slowly.
    """

    def __init__(self, m: GridSample):
        _require_circle(m.grid, "OuterFunction")
        vals = m.scalar
        if np.any(vals.real <= 0):
            raise BoundaryError("outer factorization needs a positive weight at every node")
        self.grid = m.grid
        self.log_coeffs = outer_log_coefficients(vals.real)
        n = self.grid.n
        self._log_boundary = np.fft.ifft(np.concatenate([self.log_coeffs, np.zeros(n - n // 2)])) * n

    def boundary(self, power: float = 1.0) -> GridSample:
        return GridSample(self.grid, np.exp(power * self._log_boundary))

    def __call__(self, z: complex, power: float = 1.0) -> complex:
        z = complex(z)
        k = np.arange(self.log_coeffs.size)
        return complex(np.exp(power * np.sum(self.log_coeffs * z ** k)))

    def at_circle(self, zs, power: float = 1.0) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        k = np.arange(self.log_coeffs.size)
        return np.exp(power * (zs[:, None] ** k[None, :]) @ self.log_coeffs)


def coefficient_mean(u: GridSample) -> np.ndarray:
    """``(1/2πi) ∮ u(ζ) dζ``; on the circle this is the Fourier coefficient ``c_{-1}``."""
    return np.tensordot(u.grid.weights, u.values, axes=(0, 0)) / (2j * np.pi)


def interpolate(u: GridSample, points) -> np.ndarray:
    """Trigonometric interpolation of a circle sample at arbitrary points of the circle."""
    return fourier(u).evaluate_many(points)


def boundary_trace(func: Callable, grid: BoundaryGrid, side: str, delta: float | None = None,
                   order: int = 6) -> GridSample:
    """One-sided boundary values of ``func`` by radial polynomial extrapolation.

    ``func`` is evaluated at ``ζ (1 ± kδ)``, ``k = 1..order`` and the values
    are extrapolated to ``δ = 0``.  Default ``δ = 1/N``.
    """
    _require_circle(grid, "boundary_trace")
    if delta is None:
        delta = 1.0 / grid.n
    sign = -1.0 if side == "plus" else 1.0
    ks = np.arange(1, order + 1, dtype=float)
    # Lagrange weights for extrapolation to 0 from nodes k·δ
    lw = np.array([np.prod([kj / (kj - ki) for kj in ks if kj != ki]) for ki in ks])
    vals = None
    for k, w in zip(ks, lw):
        pts = grid.nodes * (1 + sign * k * delta)
        v = np.stack([np.atleast_2d(np.asarray(func(z), dtype=complex)) for z in pts])
        vals = w * v if vals is None else vals + w * v
    return GridSample(grid, vals)


def sample_to_csv(u: GridSample) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    r, c = u.shape
    matrix = (r, c) != (1, 1)
    w.writerow((["row", "col"] if matrix else []) + ["node_index", "param", "re", "im"])
    for i in range(r):
        for j in range(c):
            for k in range(u.grid.n):
                v = u.values[k, i, j]
                w.writerow(([i, j] if matrix else []) + [k, repr(float(u.grid.param[k])),
                                                          repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def sample_from_csv(text: str, grid: BoundaryGrid) -> GridSample:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise BoundaryError("empty GridSample CSV")
    matrix = "row" in rows[0]
    nr = 1 + max(int(x["row"]) for x in rows) if matrix else 1
    nc = 1 + max(int(x["col"]) for x in rows) if matrix else 1
    vals = np.zeros((grid.n, nr, nc), dtype=complex)
    seen = np.zeros(vals.shape, dtype=bool)
    for x in rows:
        i, j = (int(x["row"]), int(x["col"])) if matrix else (0, 0)
        k = int(x["node_index"])
        vals[k, i, j] = complex(float(x["re"]), float(x["im"]))
        seen[k, i, j] = True
    if not seen.all():
        raise BoundaryError("GridSample CSV does not cover every node and entry")
    return GridSample(grid, vals)


def sample_to_obj(u: GridSample) -> dict:
    """JSON-ready form: per-node matrices with complex entries as ``[re, im]``."""
    return {
        "shape": list(u.shape),
        "values": np.stack([u.values.real, u.values.imag], axis=-1).tolist(),
    }


def sample_from_obj(obj: dict, grid: BoundaryGrid) -> GridSample:
    arr = np.asarray(obj["values"], dtype=float)
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise BoundaryError("grid sample values must be an N x rows x cols x 2 array")
    if arr.shape[0] != grid.n:
        raise BoundaryError(f"sample has {arr.shape[0]} nodes, grid has {grid.n}")
    if "shape" in obj and list(arr.shape[1:3]) != list(obj["shape"]):
        raise BoundaryError("declared shape does not match values")
    return GridSample(grid, arr[..., 0] + 1j * arr[..., 1])
