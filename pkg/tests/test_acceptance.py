"""Acceptance suite: one PASS/FAIL line per criterion at the target tolerances.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
from scipy.linalg import sqrtm

from curvedsys.boundary import analytic_project, make_grid
from curvedsys.model import (
    build_model, char_from_model, check_mod_axioms, model_operators, model_resolvent, resolvent_vector,
    resolvent_vector_nf,
)
from curvedsys.perturbation import (
    Perturbation, duality_diagnostic, perturbed_operator, perturbed_resolvent, symbol_eigenvalues, theta_kappa,
)
from curvedsys.recovery import defect_from_transfer, polar_from_difference, recover_char_disk
from curvedsys.schur import CharTriple, Weight, defect, theta_minus
from curvedsys.systems import (
    char_fn_disk, char_triple_from_colligation, ctot_eval, default_probes, jump_from_system, jump_from_triple,
    random_colligation, transfer_fn,
)
from curvedsys.transforms import (
    EtaMap, MobiusMap, Multiplier, check_phi_f_commute, dualize, phi_eta_cfn, tilde,
)

RESULTS: dict = {}
NOTES: list = []


def record(number: int, label: str, value: float, tol: float, seconds: float | None = None,
           budget: float | None = None) -> bool:
    ok = bool(np.isfinite(value) and value <= tol)
    timing = ""
    if seconds is not None:
        timing = f", {seconds:.1f}s"
        if budget is not None:
            timing += f" (budget {budget:g}s)"
            ok = ok and seconds < budget
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {label}: {value:.2e} <= {tol:.0e}{timing}"
    RESULTS[number] = line
    print(line)
    return ok


def _sup(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


G512 = make_grid("circle", 512)
G256 = make_grid("circle", 256)


def _inside(S, count=12, seed=0):
    return [z for z in default_probes(S, 2 * count, seed=seed) if abs(z) < 1]


def _weighted(A, grid, strict=True):
    x, y = np.real(grid.nodes), np.imag(grid.nodes)
    base = char_triple_from_colligation(A, grid)
    wp = 2 + 0.5 * x + 0.3 * y
    wm = 1 + 0.3 * y if strict else wp
    return CharTriple(base.theta_plus, Weight.scalar(grid, wp, wm, A.p), base.evaluator)


# ---------------------------------------------------------------- 1


def test_criterion_1_schur_generation():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = -np.inf
    for k in range(200):
        A = random_colligation(int(rng.integers(1, 9)), int(rng.integers(1, 4)), seed=rng)
        r = 0.99 * np.sqrt(rng.uniform(size=50))
        for z in r * np.exp(2j * np.pi * rng.uniform(size=50)):
            worst = max(worst, np.linalg.norm(char_fn_disk(A, z), 2) - 1)
    ok = record(1, "max ||Θ(z)|| − 1 over 200 Haar colligations x 50 points", max(worst, 0.0), 1e-10,
                time.perf_counter() - t0, 5)
    assert ok


# ---------------------------------------------------------------- 2


def _ctot_worst(A, seed):
    S = A.system()
    th = char_triple_from_colligation(A, G512)
    probes = default_probes(S, 40, seed=seed, margin=0.1)   # alternating: 20 inside, 20 outside
    return max(_sup(transfer_fn(S, z) - ctot_eval(th, z)) for z in probes)


def test_criterion_2_ctot_identity():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = max(_ctot_worst(random_colligation(int(rng.integers(1, 9)), int(rng.integers(1, 4)), seed=rng,
                                               max_radius=0.9), k) for k in range(50))
    ok = record(2, "CtoT residual, 50 colligations (spectral radius <= 0.9), 20+20 probes, N=512", worst,
                1e-7, time.perf_counter() - t0, 30)
    # context only: unconditioned draws put eigenvalues within reach of the 512-node aliasing error
    rng = np.random.default_rng(2)
    raw = [_ctot_worst(random_colligation(int(rng.integers(1, 9)), int(rng.integers(1, 4)), seed=rng), k)
           for k in range(20)]
    NOTES.append(f"[info] criterion 2 on unconditioned Haar draws: {sum(r > 1e-7 for r in raw)}/20 above 1e-7 "
                 f"(worst {max(raw):.1e}); the error tracks (spectral radius)^N")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_3_polar_recovery():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(200):
        d = int(rng.integers(1, 17))
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        u, _, vh = np.linalg.svd(x)
        L = u @ np.diag(rng.uniform(0.05, 1.0, d)) @ vh
        B = np.linalg.inv(L) - L.conj().T
        worst = max(worst, _sup(polar_from_difference(B) - sqrtm(L @ L.conj().T)))
    scalar = abs(polar_from_difference(np.array([[0.5 ** -1 - 0.5]]))[0, 0] - 0.5)
    elapsed = time.perf_counter() - t0
    NOTES.append(f"[info] criterion 3 scalar oracle L = 0.5: error {scalar:.1e} (tol 1e-12)")
    # the scalar oracle has its own, tighter tolerance; a miss there fails the criterion outright
    value = worst if scalar <= 1e-12 else np.inf
    ok = record(3, "‖|L| − ψ(B*B)‖ over 200 contractions (dims 1-16), L = 0.5 oracle to 1e-12", value, 1e-9,
                elapsed, 5)
    assert ok


# ---------------------------------------------------------------- 4


def _defect_instances():
    for seed in range(6):
        A = random_colligation(1 + seed, 1 + seed % 3, seed=seed, max_radius=0.8)
        yield char_triple_from_colligation(A, G512), jump_from_system(A.system(), G512)
    for p in (1, 2):
        th = _weighted(random_colligation(3, p, seed=p, max_radius=0.8), G512)
        yield th, jump_from_triple(th)
    const = CharTriple.from_function(G512, lambda z: np.array([[0.6]]))
    yield const, jump_from_triple(const)
    outer = CharTriple.from_function(G512, lambda z: np.array([[0.3 * z + 0.2, 0.1], [0.0, 0.5 * z * z]]))
    yield outer, jump_from_triple(outer)


def test_criterion_4_defect_recovery():
    worst = 0.0
    for th, J in _defect_instances():
        worst = max(worst, _sup(defect_from_transfer(J).defect.values - defect(th).values))
    assert record(4, "recovered vs forward defect, sup over 10 instances, N=512", worst, 1e-7)


# ---------------------------------------------------------------- 5


def test_criterion_5_round_trip():
    cases = []
    for p in (1, 2):
        A = random_colligation(3, p, seed=20 + p, max_radius=0.8)
        cases.append((f"unweighted p={p}", char_triple_from_colligation(A, G512), A))
        for strict in (True, False):
            B = random_colligation(3, p, seed=10 + p, max_radius=0.8)
            cases.append((f"scalar weights p={p} {'distinct' if strict else 'equal'}", _weighted(B, G512, strict), B))
    worst, slowest = 0.0, 0.0
    for name, th, A in cases:
        t0 = time.perf_counter()
        res = recover_char_disk(jump_from_triple(th, _inside(A.system())))
        slowest = max(slowest, time.perf_counter() - t0)
        err = _sup(res.theta.theta_plus.values - th.theta_plus.values)
        NOTES.append(f"[info] criterion 5 {name}: method={res.method} error={err:.1e}")
        worst = max(worst, err)
    assert record(5, "recovered Θ⁺ after gauge fit, scalar and 2x2, N=512 (slowest instance)", worst, 1e-5,
                  slowest, 60)


# ---------------------------------------------------------------- 6


def test_criterion_6_model():
    A = random_colligation(3, 2, seed=1, max_radius=0.8)
    coll = char_triple_from_colligation(A, G512)
    outer = CharTriple.from_function(G512, lambda z: np.array([[0.4 * z + 0.1]]),
                                     Weight.scalar(G512, 1.0, 2 + np.real(G512.nodes)))
    rng = np.random.default_rng(6)
    worst = 0.0
    for th in (coll, outer):
        m = build_model(th)
        worst = max(worst, check_mod_axioms(m).worst)
        back = char_from_model(m)
        worst = max(worst, _sup(back.theta_plus.values - th.theta_plus.values),
                    _sup(back.weight.plus.values - th.weight.plus.values),
                    _sup(back.weight.minus.values - th.weight.minus.values))
        f = m.ambient_basis @ (rng.normal(size=(m.ambient_basis.shape[2], 3)) + 0j)
        once = m.P_theta(f)
        worst = max(worst, _sup(m.P_theta(once) - once))
        u_minus = analytic_project(th.minus, "minus").scale(-1)
        p = m.pi_plus.k
        for z in (0.2 + 0.1j, 1.7j, -0.5):
            n = np.ones(m.pi_minus.k)
            rv = resolvent_vector(m, n, z)
            f_pi, f_tau = resolvent_vector_nf(m, ctot_eval(th, z), u_minus, n, z)
            worst = max(worst, _sup(f_pi - rv[:, :p, 0]), _sup(f_tau - rv[:, p:, 0]))
            if th is coll:
                ops = model_operators(m)
                c = rng.normal(size=(m.dim_k, 2)) + 0j
                r = model_resolvent(m, m.vector(c), z)
                worst = max(worst, _sup(m.coords(r) - np.linalg.solve(ops.T - z * np.eye(m.dim_k), c)))
            else:
                g0 = m.P_theta(m.pi("minus", np.ones((m.n, 1, 1))))
                g = model_resolvent(m, g0, z)
                worst = max(worst, _sup(m.P_theta(m.U(g)) - z * g - g0))
    assert record(6, "axioms, MtoC, P_Θ idempotence, resolvent, NF coordinates (N=512)", worst, 1e-8)


# ---------------------------------------------------------------- 7


def test_criterion_7_commutation():
    rng = np.random.default_rng(7)
    commute = 0.0
    for k in range(4):
        a = 0.3 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        eta = EtaMap.constant(MobiusMap(complex(a)), complex(rng.uniform(0.5, 2)), complex(rng.uniform(0.5, 2)))
        A = random_colligation(int(rng.integers(1, 4)), 1, seed=rng, max_radius=0.75)
        commute = max(commute, check_phi_f_commute(A, eta, n=512, seed=k).worst)
    w = Weight.scalar(G512, 1.5 + 0.5 * np.real(G512.nodes), 2.0 + 0.3 * np.imag(G512.nodes))
    th = CharTriple.from_function(G512, lambda z: np.array([[0.3 * z * z + 0.2]]), w)
    mult = lambda a, c: Multiplier(None, lambda v, a=a, c=c: c * (1 + a * v))
    e21 = EtaMap(MobiusMap(0.25 - 0.1j), mult(0.2, 1.0), mult(-0.3j, 2.0))
    e32 = EtaMap(MobiusMap(-0.2 + 0.15j), mult(0.1j, 0.5), Multiplier(np.array([[1.5]])))
    two, one = phi_eta_cfn(phi_eta_cfn(th, e21), e32), phi_eta_cfn(th, e32.compose(e21))
    composition = max(_sup(two.theta_plus.values - one.theta_plus.values),
                      _sup(two.weight.plus.values - one.weight.plus.values),
                      _sup(two.weight.minus.values - one.weight.minus.values))
    dd = dualize(dualize(th))
    S = random_colligation(3, 2, seed=9, max_radius=0.8).system()
    Sdd = dualize(dualize(S))
    involution = max(_sup(dd.theta_plus.values - th.theta_plus.values), _sup(dd.weight.plus.values - w.plus.values),
                     _sup(dd.weight.minus.values - w.minus.values), _sup(Sdd.T - S.T), _sup(Sdd.M - S.M),
                     _sup(Sdd.N - S.N), _sup((tilde(theta_minus(dualize(th))) - theta_minus(th)).values))
    NOTES.append(f"[info] criterion 7 parts: squares {commute:.1e} (tol 1e-6), composition {composition:.1e} "
                 f"(tol 1e-8), involution {involution:.1e} (tol 1e-12)")
    value = max(commute / 1e-6, composition / 1e-8, involution / 1e-12)
    assert record(7, "worst part relative to its tolerance (squares, composition, involution)", value, 1.0)


# ---------------------------------------------------------------- 8


def test_criterion_8_perturbed_resolvent():
    rng = np.random.default_rng(8)
    solve, collapse = 0.0, 0.0
    for d in range(1, 5):
        p = 1 + d % 2
        m = build_model(char_triple_from_colligation(random_colligation(d, p, seed=rng, max_radius=0.8), G512))
        kappa = 0.5 * (rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p)))
        pert = Perturbation(kappa, m)
        S = perturbed_operator(pert).S
        ev = np.linalg.eigvals(S)
        c = rng.normal(size=(d, 2)) + 0j
        for z in (0.3j, -0.55, 1.6, 2.2 - 1j):
            if np.min(np.abs(ev - z)) < 0.05:
                continue
            g = perturbed_resolvent(m, pert, m.vector(c), z)
            solve = max(solve, _sup(m.coords(g) - np.linalg.solve(S - z * np.eye(d), c)))
            f = m.vector(c)
            collapse = max(collapse, _sup(perturbed_resolvent(m, np.zeros_like(kappa), f, z) - model_resolvent(m, f, z)))
    shift = build_model(CharTriple.from_function(make_grid("circle", 64), lambda z: z))
    cval = 0.3 + 0.2j
    roots = symbol_eigenvalues(theta_kappa(shift, [[cval]]))
    detect = abs(roots[0] - cval) if roots.size == 1 else np.inf
    NOTES.append(f"[info] criterion 8 parts: solve {solve:.1e} (tol 1e-8), κ=0 {collapse:.1e} (tol 1e-10), "
                 f"shift eigenvalue {detect:.1e} (tol 1e-6)")
    value = max(solve / 1e-8, collapse / 1e-10, detect / 1e-6)
    assert record(8, "worst part relative to its tolerance (solve, κ=0 collapse, eigenvalue)", value, 1.0)


# ---------------------------------------------------------------- 9


def test_criterion_9_duality():
    t0 = time.perf_counter()
    outer = build_model(CharTriple.from_function(G256, lambda z: np.array([[0.4 * z + 0.1]])))
    coll = build_model(char_triple_from_colligation(random_colligation(2, 1, seed=3, max_radius=0.8), G256))
    const = build_model(CharTriple.from_function(G256, lambda z: np.array([[0.5]])))
    worst, dims = 0.0, []
    for m, kappa in ((outer, 0.0), (outer, 0.3 + 0.2j), (outer, -0.2 + 0.1j), (coll, 0.3 + 0.2j), (const, 0.3)):
        rep = duality_diagnostic(m, [[kappa]])
        dims.append(f"{rep.dim_n_perp}/{rep.dim_m_dual}")
        worst = max(worst, rep.max_angle if rep.dim_n_perp == rep.dim_m_dual else np.pi / 2)
    NOTES.append(f"[info] criterion 9 dim(Ñ⊥)/dim(M̃_*) per instance: {' '.join(dims)}")
    assert record(9, "largest principal angle between Ñ(Ŝ)⊥ and M̃(Ŝ*) (scalar, N=256)", worst, 1e-4,
                  time.perf_counter() - t0, 120)


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted((k, v) for k, v in dict(globals()).items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
        except Exception as exc:  # report and keep going
            failed += 1
            print(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
    for note in NOTES:
        print(note)
    sys.exit(1 if failed else 0)
