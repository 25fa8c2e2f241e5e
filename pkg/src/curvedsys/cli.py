"""Command-line harness: generate instances, run the check suites, write residual tables.

Exit status is 0 when every residual is within tolerance, 1 when some check
fails and 2 when arguments or input files cannot be parsed.  ``SMK_THREADS``
caps the worker pool used for independent probes; results are sorted before
they are written, so output does not depend on scheduling.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .boundary import analytic_project, make_grid
from .model import (
    build_model, char_from_model, check_mod_axioms, dual_model, model_from_json, model_operators,
    model_resolvent, model_to_json, resolvent_vector, resolvent_vector_nf,
)
from .perturbation import (
    Perturbation, duality_diagnostic, perturbed_operator, perturbed_resolvent, symbol_eigenvalues,
)
from .recovery import recover_char_disk
from .schur import schur_membership, triple_to_json
from .systems import (
    Colligation, JumpData, SystemSpec, char_triple_from_colligation, ctot_eval, default_probes, jump_from_system,
    matrix_from_json, matrix_to_json, random_colligation, shift_colligation, transfer_fn,
)
from .transforms import EtaMap, MobiusMap, check_phi_f_commute, dualize, phi_eta_cfn

COMMANDS = {
    "gen-colligation": "Haar-random unitary colligation (JSON)",
    "char-fn": "boundary sample of the characteristic function (JSON)",
    "transfer-fn": "transfer-function traces and probe values (JSON)",
    "ctot-check": "transfer function against its characteristic-function formula",
    "model-check": "model axioms, model-to-characteristic round trip, resolvent formulas",
    "recover": "characteristic function from transfer data (JSON)",
    "faber-check": "commutation of transports with the functors",
    "dual-check": "duality involution and the dual model",
    "perturb-check": "perturbed resolvent, eigenvalues from the symbols, duality diagnostic",
}

# the model keeps grid/4 Fourier modes, so eigenvalues must stay further from the circle
MODEL_COMMANDS = ("model-check", "faber-check", "dual-check", "perturb-check")


class InputError(Exception):
    """Unreadable or malformed input (exit status 2)."""


@dataclass
class Row:
    check: str
    value: float
    tol: float
    index: int = 0
    z: Optional[complex] = None

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def as_dict(self) -> dict:
        z = self.z
        return {"check": self.check, "index": self.index,
                "z_re": "" if z is None else repr(float(z.real)), "z_im": "" if z is None else repr(float(z.imag)),
                "value": repr(float(self.value)), "tol": repr(float(self.tol)), "pass": int(self.passed)}


@dataclass
class Outcome:
    rows: list = field(default_factory=list)
    artifact: Optional[dict] = None


# ---------------------------------------------------------------- plumbing


def worker_count() -> int:
    raw = os.environ.get("SMK_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise InputError(f"SMK_THREADS must be an integer, got {raw!r}") from None
    return max(1, cap)


def parallel_map(func: Callable, items: Sequence) -> list:
    if worker_count() == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(items))) as pool:
        return list(pool.map(func, items))


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _parse(loader: Callable, obj, what: str):
    try:
        return loader(obj)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed {what}: {exc}") from None


def _colligation(args) -> Colligation:
    if args.input:
        return _parse(Colligation.from_json, _load_json(args.input), "colligation")
    return random_colligation(args.dim, args.channels, seed=args.seed, max_radius=args.max_radius)


def _system_or_colligation(args):
    if not args.input:
        return _colligation(args)
    obj = _load_json(args.input)
    if obj.get("kind") == "system":
        return _parse(SystemSpec.from_json, obj, "system")
    return _parse(Colligation.from_json, obj, "colligation")


def _triple_or_model(args, path: Optional[str]):
    """Model from a model/triple JSON, or from a generated colligation."""
    grid = make_grid("circle", args.grid)
    if path:
        obj = _load_json(path)
        if obj.get("kind") == "colligation":
            th = char_triple_from_colligation(_parse(Colligation.from_json, obj, "colligation"), grid)
            return th, build_model(th, args.trunc)
        model = _parse(model_from_json, obj, "model")
        if args.trunc is not None and args.trunc != model.K:
            model = build_model(model.theta, args.trunc)
        return model.theta, model
    th = char_triple_from_colligation(_colligation(args), grid)
    return th, build_model(th, args.trunc)


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def render(rows: list, fmt: str) -> str:
    rows = sorted(rows, key=lambda r: (r.check, r.index))
    if fmt == "json":
        return json.dumps([r.as_dict() for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["check", "index", "z_re", "z_im", "value", "tol", "pass"],
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r.as_dict())
    return buf.getvalue()


def _residual_block(rows: list) -> dict:
    return {f"{r.check}[{r.index}]" if r.index else r.check: float(r.value) for r in rows}


def _sup(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


# ---------------------------------------------------------------- subcommands


def cmd_gen_colligation(args) -> Outcome:
    A = shift_colligation() if args.shift else random_colligation(args.dim, args.channels, seed=args.seed,
                                                                  max_radius=args.max_radius)
    rows = [Row("unitarity", A.unitarity_residual(), args.tol if args.tol is not None else 1e-12)]
    return Outcome(rows, {**A.to_json(), "residuals": _residual_block(rows)})


def cmd_char_fn(args) -> Outcome:
    A = _colligation(args)
    th = char_triple_from_colligation(A, make_grid("circle", args.grid))
    rows = [Row("schur_excess", schur_membership(th).excess, args.tol if args.tol is not None else 1e-8)]
    return Outcome(rows, {**triple_to_json(th), "residuals": _residual_block(rows)})


def cmd_transfer_fn(args) -> Outcome:
    src = _system_or_colligation(args)
    S = src.system() if isinstance(src, Colligation) else src
    probes = default_probes(S, args.probes, seed=args.seed) if args.probes else []
    J = jump_from_system(S, make_grid("circle", args.grid), probes)
    trace = _sup(J.upsilon_plus.values - J.upsilon_minus.values)
    rows = [Row("trace_jump", trace, args.tol if args.tol is not None else 1e-12)]
    return Outcome(rows, {**J.to_json(), "residuals": _residual_block(rows)})


def cmd_ctot_check(args) -> Outcome:
    A = _colligation(args)
    S = A.system()
    th = char_triple_from_colligation(A, make_grid("circle", args.grid))
    tol = args.tol if args.tol is not None else 1e-7
    # default_probes alternates inside / outside, so 2·probes gives `probes` on each side
    probes = default_probes(S, 2 * args.probes, seed=args.seed, margin=0.1)

    def one(item):
        k, z = item
        side = "ctot_inside" if abs(z) < 1 else "ctot_outside"
        return Row(side, _sup(transfer_fn(S, z) - ctot_eval(th, z)), tol, k, z)

    return Outcome(parallel_map(one, list(enumerate(probes))))


def cmd_model_check(args) -> Outcome:
    th, m = _triple_or_model(args, args.input or args.model)
    tol = args.tol if args.tol is not None else 1e-8
    rows = [Row(name, val, tol) for name, val in check_mod_axioms(m).residuals().items()]
    back = char_from_model(m)
    rows.append(Row("mtoc_theta", _sup(back.theta_plus.values - th.theta_plus.values), tol))
    rows.append(Row("mtoc_weight", max(_sup(back.weight.plus.values - th.weight.plus.values),
                                       _sup(back.weight.minus.values - th.weight.minus.values)), tol))
    rng = np.random.default_rng(args.seed)
    f = m.ambient_basis @ (rng.normal(size=(m.ambient_basis.shape[2], 2)) + 0j)
    once = m.P_theta(f)
    rows.append(Row("p_theta_idempotent", _sup(m.P_theta(once) - once), tol))
    ops = model_operators(m)
    p, q = m.pi_plus.k, m.pi_minus.k
    u_minus = analytic_project(th.minus, "minus").scale(-1)
    zs = [complex(z) for z in (0.35 * np.exp(2j * np.pi * rng.uniform()), 1.8 * np.exp(2j * np.pi * rng.uniform()))]
    zs = [z for z in zs if m.dim_k == 0 or np.min(np.abs(np.linalg.eigvals(ops.T) - z)) > 0.05]

    def one(item):
        k, z = item
        out = []
        if 0 < m.dim_k <= 4 * m.K:
            c = rng_c[: m.dim_k]
            r = model_resolvent(m, m.vector(c), z)
            out.append(Row("resolvent_vs_matrix", _sup(m.coords(r) - np.linalg.solve(ops.T - z * np.eye(m.dim_k), c)),
                           tol, k, z))
        n = np.ones(q) / np.sqrt(q)
        rv = resolvent_vector(m, n, z)
        f_pi, f_tau = resolvent_vector_nf(m, ctot_eval(th, z), u_minus, n, z)
        out.append(Row("resolvent_vector_coords", max(_sup(f_pi - rv[:, :p, 0]), _sup(f_tau - rv[:, p:, 0])), tol, k, z))
        return out

    rng_c = rng.normal(size=(max(m.dim_k, 1), 1)) + 0j
    for chunk in parallel_map(one, list(enumerate(zs))):
        rows.extend(chunk)
    artifact = model_to_json(m) if args.out_model else None
    if artifact is not None:
        with open(args.out_model, "w") as fh:
            json.dump(artifact, fh)
    return Outcome(rows)


def cmd_recover(args) -> Outcome:
    if not args.input:
        raise InputError("recover needs --input transfer.json")
    J = _parse(JumpData.from_json, _load_json(args.input), "transfer data")
    if args.grid_given and J.grid.n != args.grid:
        raise InputError(f"--grid {args.grid} does not match the {J.grid.n}-node grid of the input")
    tol = args.tol if args.tol is not None else 1e-6
    res = recover_char_disk(J, method=args.method, trunc=args.trunc)
    rows = [Row(k, v, tol) for k, v in res.report().items() if k not in ("defect_gap", "wandering_separation")]
    artifact = {**triple_to_json(res.theta), "gauge": matrix_to_json(res.gauge), "method": res.method,
                "rank_deficient": res.rank_deficient, "residuals": res.report()}
    return Outcome(rows, artifact)


def _eta_from_args(args) -> EtaMap:
    if args.eta:
        return _parse(EtaMap.from_json, _load_json(args.eta), "eta map")
    rng = np.random.default_rng(args.seed)
    a = 0.3 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
    return EtaMap.constant(MobiusMap(complex(a)), complex(rng.uniform(0.5, 2)), complex(rng.uniform(0.5, 2)))


def cmd_faber_check(args) -> Outcome:
    A = _colligation(args)
    eta = _eta_from_args(args)
    tol = args.tol if args.tol is not None else 1e-6
    rep = check_phi_f_commute(A, eta, n=args.grid, seed=args.seed)
    rows = [Row(k, v, tol) for k, v in rep.residuals().items() if not k.startswith("axiom")]
    # composition with the inverse Möbius map returns the original symbol
    th = char_triple_from_colligation(A, make_grid("circle", args.grid))
    if isinstance(eta.phi, MobiusMap):
        back = phi_eta_cfn(phi_eta_cfn(th, EtaMap(eta.phi)), EtaMap(MobiusMap(-eta.phi.a)))
        rows.append(Row("composition_inverse", _sup(back.theta_plus.values - th.theta_plus.values), 1e-8))
    return Outcome(rows)


def cmd_dual_check(args) -> Outcome:
    src = _system_or_colligation(args)
    tol = args.tol if args.tol is not None else 1e-12
    S = src.system() if isinstance(src, Colligation) else src
    rows = [Row("system_involution", max(_sup(dualize(dualize(S)).T - S.T), _sup(dualize(dualize(S)).M - S.M),
                                         _sup(dualize(dualize(S)).N - S.N)), tol)]
    if isinstance(src, Colligation):
        g = make_grid("circle", args.grid)
        th = char_triple_from_colligation(src, g)
        dd = dualize(dualize(th))
        rows.append(Row("triple_involution", max(_sup(dd.theta_plus.values - th.theta_plus.values),
                                                 _sup(dd.weight.plus.values - th.weight.plus.values),
                                                 _sup(dd.weight.minus.values - th.weight.minus.values)), tol))
        m = build_model(th, args.trunc)
        d = dual_model(m)
        rows.append(Row("dual_model_axioms", check_mod_axioms(d).worst, 1e-8))
        found = np.sort_complex(np.linalg.eigvals(model_operators(d).T))
        target = np.sort_complex(np.conj(np.linalg.eigvals(src.T)))
        rows.append(Row("dual_spectrum", _sup(found - target) if found.size == target.size else np.inf, 1e-8))
    return Outcome(rows)


def _kappa_from_args(args, m) -> np.ndarray:
    p, q = m.pi_plus.k, m.pi_minus.k
    if args.kappa:
        obj = _load_json(args.kappa)
        k = _parse(matrix_from_json, obj.get("kappa") if isinstance(obj, dict) else obj, "coupling")
        if k.shape != (q, p):
            raise InputError(f"κ must be {q}x{p}, got {k.shape[0]}x{k.shape[1]}")
        return k
    rng = np.random.default_rng(args.seed + 1)
    return 0.5 * (rng.normal(size=(q, p)) + 1j * rng.normal(size=(q, p)))


def cmd_perturb_check(args) -> Outcome:
    th, m = _triple_or_model(args, args.model or args.input)
    kappa = _kappa_from_args(args, m)
    pert = Perturbation(kappa, m)
    tol = args.tol if args.tol is not None else 1e-8
    rows = []
    S = perturbed_operator(pert).S if m.dim_k else np.zeros((0, 0))
    ev = np.linalg.eigvals(S) if S.size else np.zeros(0, complex)
    rng = np.random.default_rng(args.seed)
    zs = []
    while len(zs) < args.probes:
        inside = len(zs) % 2 == 0
        r = rng.uniform(0.0, 0.85) if inside else rng.uniform(1.2, 3.0)
        z = complex(r * np.exp(2j * np.pi * rng.uniform()))
        if ev.size == 0 or np.min(np.abs(ev - z)) > 0.05:
            zs.append(z)
    finite = 0 < m.dim_k <= 4 * m.K
    c = rng.normal(size=(max(m.dim_k, 1), 1)) + 0j

    def one(item):
        k, z = item
        out = []
        if finite:
            g = perturbed_resolvent(m, pert, m.vector(c), z)
            out.append(Row("resolvent_vs_matrix",
                           _sup(m.coords(g) - np.linalg.solve(S - z * np.eye(m.dim_k), c)), tol, k, z))
            f = m.vector(c)
        else:
            f = m.k_basis[..., :1]
        g0 = perturbed_resolvent(m, np.zeros_like(kappa), f, z)
        out.append(Row("zero_coupling_collapse", _sup(g0 - model_resolvent(m, f, z)), 1e-10, k, z))
        return out

    for chunk in parallel_map(one, list(enumerate(zs))):
        rows.extend(chunk)
    if finite:
        sym = pert.symbols
        found = np.concatenate([symbol_eigenvalues(sym, "plus"), symbol_eigenvalues(sym, "minus")])
        watched = ev[(np.abs(ev) < 0.9) | (np.abs(ev) > 1.15)]
        for k, lam in enumerate(sorted(watched, key=lambda w: (round(w.real, 12), round(w.imag, 12)))):
            err = float(np.min(np.abs(found - lam))) if found.size else np.inf
            rows.append(Row("eigenvalue", err, 1e-6, k, lam))
        rows.append(Row("eigenvalue_count", abs(found.size - watched.size), 0))
    if kappa.shape == (1, 1):
        rep = duality_diagnostic(m, pert)
        rows.append(Row("duality_angle", rep.max_angle, 1e-4))
        rows.append(Row("duality_dim_gap", abs(rep.dim_n_perp - rep.dim_m_dual), 0))
    return Outcome(rows)


HANDLERS = {
    "gen-colligation": cmd_gen_colligation, "char-fn": cmd_char_fn, "transfer-fn": cmd_transfer_fn,
    "ctot-check": cmd_ctot_check, "model-check": cmd_model_check, "recover": cmd_recover,
    "faber-check": cmd_faber_check, "dual-check": cmd_dual_check, "perturb-check": cmd_perturb_check,
}


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curvedsys", description="Check suites for conservative systems and their models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name])
        p.add_argument("--dim", type=int, default=3, help="state dimension of generated colligations")
        p.add_argument("--channels", type=_positive, default=1, help="number of input/output channels")
        p.add_argument("--grid", type=_positive, default=None, help="boundary nodes (power of two, default 512)")
        p.add_argument("--trunc", type=_positive, default=None, help="model Fourier truncation")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--input", default=None)
        p.add_argument("--model", default=None)
        p.add_argument("--kappa", default=None)
        p.add_argument("--eta", default=None)
        p.add_argument("--probes", type=int, default=20)
        p.add_argument("--max-radius", type=float, default=None,
                       help="reject generated colligations whose T has a larger spectral radius "
                            "(default 0.9, or 0.8 for commands that build a model)")
        p.add_argument("--shift", action="store_true", help="gen-colligation: emit the one-dimensional shift")
        p.add_argument("--method", choices=("auto", "jump", "wold"), default="auto")
        p.add_argument("--out-model", default=None, help="model-check: also dump the model JSON")
        p.add_argument("--table", default=None, help="artifact commands: write the residual table here")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.grid_given = args.grid is not None
    args.grid = args.grid or 512
    if args.max_radius is None:
        args.max_radius = 0.8 if args.command in MODEL_COMMANDS else 0.9
    if args.dim < 0 or args.probes < 0:
        parser.error("--dim and --probes must be nonnegative")
    try:
        outcome = HANDLERS[args.command](args)
    except InputError as exc:
        print(f"curvedsys: {exc}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"curvedsys: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    table = render(outcome.rows, args.format)
    if outcome.artifact is not None:
        _write(json.dumps(outcome.artifact) + "\n", args.out)
        if args.table:
            _write(table, args.table)
    else:
        _write(table, args.out)
    failed = [r for r in outcome.rows if not r.passed]
    for r in failed[:5]:
        print(f"curvedsys: {r.check}[{r.index}] = {r.value:.3e} exceeds {r.tol:.1e}", file=sys.stderr)
    if len(failed) > 5:
        print(f"curvedsys: {len(failed) - 5} more checks failed", file=sys.stderr)
    return 1 if failed else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
