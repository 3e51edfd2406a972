"""Command-line front end: ``xcflab <command> [options]``.

Exit statuses: 0 success, 2 invalid input, 3 the flow left its regime,
4 numerical failure.  Errors are reported as one JSON object on stderr.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import chart as ch
from . import flow as fl
from . import homogeneous as hg
from . import io
from . import linearization as lin
from .errors import (CurvatureSignError, DomainError, RegimeError, StiffnessError,
                     UnderflowError)
from .functionals import monitor_trajectory

EXIT_OK, EXIT_INVALID, EXIT_REGIME, EXIT_NUMERICAL = 0, 2, 3, 4
SPREAD_TOL = 1e-8


def worker_count():
    try:
        n = int(os.environ.get("XCFLAB_THREADS", "1"))
    except ValueError:
        raise DomainError("XCFLAB_THREADS must be an integer") from None
    return max(1, n)


def _map(fn, items):
    # results keep input order, so output is independent of scheduling
    n = worker_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _spec(cfg, base):
    return hg.FlowSpec(cfg.flow, K=cfg.K, g_ref=base if cfg.flow == "DXCF" else None)


def initial_metric(cfg):
    base = fl.matched_hyperbolic(cfg.K)
    return base, base + io.perturbation(cfg.seed, cfg.perturb)


def _spectrum(spec, base):
    if spec.kind not in fl.CONVERGING:
        return []
    return io.spectrum_list(lin.frame_jacobian(spec, base).eigenvalues)


# -- commands -----------------------------------------------------------------------

def cmd_simulate(cfg):
    base, g0 = initial_metric(cfg)
    spec = _spec(cfg, base)
    t_end = cfg.t_end if cfg.t_end is not None else (4.0 if spec.kind in fl.CONVERGING else 1.0)
    traj = fl.integrate(spec, g0, t_end, tol=cfg.tol)
    report = monitor_trajectory(traj)
    out = {"flow": spec.kind, "K": spec.K, "t_end": t_end, "status": traj.status,
           "omega_fit": None, "C_fit": None, "residual": None,
           "violations": report.violations, "spectrum": _spectrum(spec, base)}
    triple = np.array(traj.monitors[-1].triple)
    spread = float(triple.max() - triple.min()) / spec.K ** 2
    out["final_sectional_spread"] = spread
    out["converged"] = bool(traj.status == "completed" and spec.kind in fl.CONVERGING
                            and spread <= SPREAD_TOL)
    if spec.kind in fl.CONVERGING and traj.status == "completed":
        try:
            fit = fl.fit_decay_rate(traj, fl.late_time_limit(traj))
            out.update(omega_fit=fit.omega, C_fit=fit.C, residual=fit.residual)
        except UnderflowError as exc:
            out["fit_note"] = str(exc)
    if report.y_fit is not None:
        out["y_fit"] = {"omega": report.y_fit.omega, "C": report.y_fit.C,
                        "residual": report.y_fit.residual}
    if cfg.csv:
        with open(cfg.csv, "w", encoding="utf-8", newline="") as fh:
            io.write_trajectory_csv(fh, traj)
    code = EXIT_OK if traj.status == "completed" else EXIT_REGIME
    return code, out


def cmd_linearize(cfg):
    base = fl.matched_hyperbolic(cfg.K)
    spec = _spec(cfg, base)
    rep = lin.frame_jacobian(spec, base)
    lam, resid = rep.rayleigh(base)
    out = {"flow": spec.kind, "K": spec.K, "basis": "E11,E22,E33,(E12+E21)/sqrt2,(E13+E31)/sqrt2,(E23+E32)/sqrt2",
           "jacobian": rep.jacobian, "spectrum": io.spectrum_list(rep.eigenvalues),
           "richardson_change": rep.richardson_change, "comparison": rep.comparison,
           "conformal_eigenvalue": lam, "conformal_residual": resid}
    if rep.gauge_term is not None:
        out["gauge_term"] = rep.gauge_term
    return EXIT_OK, out


def cmd_spectrum(cfg):
    if cfg.symbol is not None:
        S, ev = lin.buckland_symbol(io.parse_symbol(cfg.symbol))
        return EXIT_OK, {"symbol": S, "spectrum": io.spectrum_list(ev)}
    base = fl.matched_hyperbolic(cfg.K)
    spec = _spec(cfg, base)
    rep = lin.frame_jacobian(spec, base)
    return EXIT_OK, {"flow": spec.kind, "K": spec.K, "spectrum": io.spectrum_list(rep.eigenvalues)}


def cmd_rescale_check(cfg):
    base, g0 = initial_metric(cfg)
    t_end = cfg.t_end if cfg.t_end is not None else 1.0
    return EXIT_OK, rescale_check(g0, cfg.K, t_end, cfg.tol)


def rescale_check(g0, K=-1.0, t_end=1.0, tol=1e-10):
    """Map a KXCF run to XCF time and compare with a direct XCF run."""
    rmap = fl.RescaleMap(K=K)
    kx = fl.integrate(hg.FlowSpec("KXCF", K=K), g0, t_end, tol=tol, target=None)
    mapped = fl.rescale_xcf(kx, rmap)
    direct = fl.integrate(hg.FlowSpec("XCF", K=K), rmap.psi(0.0) * g0, mapped.t_end, tol=tol,
                          target=None, stops=mapped.times)
    idx = np.searchsorted(direct.times, mapped.times)
    if np.any(direct.times[idx] != mapped.times):
        raise DomainError("direct XCF run did not land on the mapped sample times")
    err = np.abs(direct.metrics[idx] - mapped.metrics).max()
    return {"K": K, "t_end": t_end, "t_tilde_end": mapped.t_end, "sup_error": float(err),
            "samples": len(mapped.times)}


def _bump(ctx, seed):
    return ch.random_bump(ctx, seed)


def cmd_verify(cfg):
    ctx = ch.ChartContext(N=cfg.grid, L=cfg.L)
    seeds = list(range(cfg.seed, cfg.seed + cfg.bumps))
    suite = cfg.suite
    out = {"suite": suite, "grid": cfg.grid, "L": cfg.L, "seeds": seeds}
    if suite in ("koiso", "quadform", "lemma2"):
        g = ch.poincare_chart(ctx)
        curv = ch.chart_curvature(ctx, g)
    if suite == "koiso":
        res = _map(lambda s: ch.koiso_check(ctx, _bump(ctx, s), g, curv), seeds)
        out["residual_general"] = [r.residual_general for r in res]
        out["residual_reduced"] = [r.residual_reduced for r in res]
        out["residual"] = [max(r.residual_general, r.residual_reduced) for r in res]
        out["passed"] = bool(max(out["residual"]) <= 1e-3)
    elif suite == "quadform":
        res = _map(lambda s: ch.quadratic_form(ctx, _bump(ctx, s), g, curv), seeds)
        out["lhs"] = [r[0] for r in res]
        out["rhs"] = [r[1] for r in res]
        out["h_norm2"] = [float(ch.norm2(ctx, g, ctx.crop(_bump(ctx, s)))) for s in seeds]
        out["passed"] = bool(all(lhs <= -n * (1 - 1e-3) for lhs, n in zip(out["lhs"], out["h_norm2"])))
    elif suite == "lemma2":
        def one(s):
            gbar = g + 1e-2 * ch.random_bump(ctx, 10_000 + s)
            h = _bump(ctx, s)
            frechet_err, fr, _ = lin.general_vs_frechet(ctx, gbar, h)
            general, _ = lin.apply_A_general(ctx, g, h, curvature=curv)
            const = lin.apply_A_constant_chart(ctx, h, g, curvature=curv)
            return frechet_err, lin.relative_l2(ctx, ctx.crop(g), general, const), fr.richardson_change
        res = _map(one, seeds)
        out["residual"] = [r[0] for r in res]
        out["general_vs_constant"] = [r[1] for r in res]
        out["richardson_change"] = [r[2] for r in res]
        out["passed"] = bool(max(out["residual"]) <= 5e-2 and max(out["general_vs_constant"]) <= 1e-2)
    elif suite == "symbol":
        rng = np.random.default_rng(cfg.seed)
        errs = []
        for _ in range(max(cfg.bumps, 100)):
            A = rng.standard_normal((3, 3))
            Lam = 0.5 * (A + A.T)
            Lam[0, 0] = abs(Lam[0, 0])
            _, ev = lin.buckland_symbol(Lam)
            want = np.array([Lam[0, 0]] * 3 + [0.0] * 3)
            errs.append(float(np.abs(ev - want).max()))
        out["residual"] = errs
        out["passed"] = bool(max(errs) == 0.0)
    else:
        norms = {}
        base = fl.matched_hyperbolic(cfg.K)
        C = hg.hyperbolic_model()
        for kind in fl.CONVERGING:
            spec = hg.FlowSpec(kind, K=cfg.K, g_ref=base if kind == "DXCF" else None)
            norms[kind] = float(np.linalg.norm(hg.flow_rhs(spec, base, C)))
        out["residual"] = norms
        out["passed"] = bool(max(norms.values()) <= 1e-12)
    return EXIT_OK, out


COMMAND_FUNCS = {"simulate": cmd_simulate, "linearize": cmd_linearize, "verify": cmd_verify,
                 "rescale-check": cmd_rescale_check, "spectrum": cmd_spectrum}


def run(cfg):
    """Execute a validated config; returns ``(exit status, summary dict)``."""
    code, out = COMMAND_FUNCS[cfg.command](cfg)
    if cfg.json:
        with open(cfg.json, "w", encoding="utf-8") as fh:
            fh.write(io.dumps(out))
    return code, out


# -- argument parsing ------------------------------------------------------------------

class _ArgumentParser(argparse.ArgumentParser):
    # report usage errors through the JSON diagnostic instead of argparse's text
    def error(self, message):
        raise DomainError(message)


def build_parser():
    p = _ArgumentParser(prog="xcflab", description="Cross curvature flow laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in io.COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key=value file; command-line flags take precedence")
        s.add_argument("--flow", type=str.upper)
        s.add_argument("--K", type=float)
        s.add_argument("--perturb", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--t-end", dest="t_end", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--grid", type=int)
        s.add_argument("--L", type=float)
        s.add_argument("--bumps", type=int)
        s.add_argument("--suite")
        s.add_argument("--symbol", help="l11,l12,l13,l22,l23,l33")
        s.add_argument("--csv", help="trajectory CSV path (simulate)")
        s.add_argument("--json", help="summary JSON path (default: stdout)")
    return p


def _diagnose(exc, code, command):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": command}
    sys.stderr.write(io.dumps(payload))
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except DomainError as exc:
        return _diagnose(exc, EXIT_INVALID, None)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    opts = vars(args)
    command = opts.pop("command")
    config_path = opts.pop("config")
    try:
        file_values = io.read_config_file(config_path) if config_path else {}
        cfg = io.build_config(command, file_values, opts)
    except (DomainError, OSError) as exc:
        return _diagnose(exc, EXIT_INVALID, command)
    try:
        code, out = run(cfg)
    except (CurvatureSignError, RegimeError) as exc:
        return _diagnose(exc, EXIT_REGIME, command)
    except (UnderflowError, StiffnessError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _diagnose(exc, EXIT_NUMERICAL, command)
    except (DomainError, OSError) as exc:
        return _diagnose(exc, EXIT_INVALID, command)
    if not cfg.json:
        sys.stdout.write(io.dumps(out))
    if code == EXIT_REGIME:
        sys.stderr.write(io.dumps({"error": "RegimeExit", "message": f"trajectory truncated: {out.get('status')}",
                                   "exit_code": code, "command": command}))
    return code


if __name__ == "__main__":
    sys.exit(main())
