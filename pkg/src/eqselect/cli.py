"""Command line entry point: analyze, design, simulate, sweep, evaluate.

Exit codes: 0 success, 1 evaluation mismatch, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import abm, control, dynamics, eigen, game, metrics

log = logging.getLogger("eqselect")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT = 0, 1, 2

SWEEP_DEFAULTS = {
    "game": "builtin:paper",
    "b_grid": list(control.DEFAULT_GRID),
    "engines": ["ode", "abm"],
    "seeds": [1, 2, 3, 4, 5],
    "out": "sweep_out",
    "tax_mode": "channel_sum",
    "horizon": 200.0,
    "step": 0.01,
    "rounds": 6000,
    "n_agents": 1000,
    "prob_revision": 0.2,
    "prob_mutation": 0.05,
    "discard_fraction": 0.5,
    "workers": 1,
}
SUMMARY_HEADER = ["b", "engine", "seed", "selected", "tau_half", "L_strength",
                  "rho1", "rho2", "rho3", "rho4", "rho5"]
# long-run selection threshold per engine; mutation keeps the ABM ~0.05 away
SELECTION_THRESHOLDS = {"ode": 0.05, "abm": 0.1}


class InputError(Exception):
    pass


def load_game(spec: str) -> game.PayoffMatrix:
    if spec in ("builtin:paper", "builtin", "paper"):
        return game.paper_game
    if spec.startswith("builtin:"):
        raise InputError(f"unknown builtin game {spec!r}")
    try:
        return game.PayoffMatrix.from_csv(spec)
    except OSError as exc:
        raise InputError(f"cannot read game file: {exc}") from None
    except game.GameError as exc:
        raise InputError(str(exc)) from None


def parse_grid(text) -> list[float]:
    """``"-1:1:0.2"`` (start:stop:step, inclusive) or ``"-0.8,0,0.8"``."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            n = int(round((hi - lo) / step))
            return [round(lo + i * step, 10) for i in range(n + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse b grid {text!r}") from None


def _targets(A, anchor_spec=None):
    """Anchor equilibrium (the one whose poles are shifted) and the other one."""
    eqs = game.find_equilibria(A)
    if not eqs:
        raise InputError("the game has no Nash equilibrium within tolerance")
    if A is game.paper_game and anchor_spec is None:
        return game.NASH_1, game.NASH_2
    if anchor_spec is not None:
        anchor = eqs[int(anchor_spec)].point
    else:
        complex_eq = [e for e in eqs if np.any(np.abs(
            eigen.eig(dynamics.jacobian_replicator(A, e.point)).eigenvalues.imag) > 1e-9)]
        anchor = (complex_eq or eqs)[0].point
    others = [e.point for e in eqs if not np.allclose(e.point, anchor)]
    return anchor, (others[0] if others else anchor)


def _half_thresholds(A):
    if A is game.paper_game:
        return game.HALF_THRESHOLD_NASH_1, game.HALF_THRESHOLD_NASH_2
    return None


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _complex_list(z):
    return [[float(v.real), float(v.imag)] for v in z]


# analyze ------------------------------------------------------------------

def cmd_analyze(args) -> int:
    A = load_game(args.game)
    eqs = game.find_equilibria(A)
    if not eqs:
        print("no Nash equilibrium found", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"game": [[str(v) for v in row] for row in A.entries], "equilibria": []}
    for e in eqs:
        J = dynamics.jacobian_replicator(A, e.point)
        es = eigen.eig(J)
        entry = {
            "point": e.point.tolist(),
            "support": [i + 1 for i in e.support],
            "expected_payoff": e.expected_payoff,
            "kind": e.kind,
            "jacobian": J.tolist(),
            "eigensystem": es.to_json(),
            "payoff_eigenvalue_check": eigen.payoff_eigen_check(J, e.point, e.expected_payoff),
        }
        if np.any(es.eigenvalues.imag < -1e-12):
            cyc = eigen.eigencycles(eigen.rotation_eigenvector(es))
            entry["eigencycles"] = {metrics.pair_key(p): v for p, v in cyc.items()}
        report["equilibria"].append(entry)
        spectrum = ", ".join(f"{z.real:+.4f}{z.imag:+.4f}i" for z in es.eigenvalues)
        print(f"equilibrium {np.round(e.point, 4).tolist()} payoff {e.expected_payoff:.4f}")
        print(f"  spectrum: {spectrum}")
    _dump(out / "analysis.json", report)
    print(f"{len(eqs)} equilibria; report written to {out / 'analysis.json'}")
    return EXIT_OK


# design -------------------------------------------------------------------

def design(A, grid, tax_mode, anchor):
    controllers, rows = [], []
    for b in grid:
        c = control.build_controller(A, anchor, control.PAPER_CHANNEL, b, tax_mode)
        closed = np.linalg.eigvals(dynamics.jacobian_controlled(A, anchor, c))
        controllers.append(c)
        rows.append({
            "b": b,
            "K": c.K.tolist(),
            "target": _complex_list(c.target.values),
            "closed_loop": _complex_list(closed),
            "pole_error": eigen.max_pairing_error(closed, c.target.as_array()),
            "K_dot_anchor": float(c.K @ anchor),
            "warnings": c.warnings,
        })
    return controllers, rows


def cmd_design(args) -> int:
    A = load_game(args.game)
    grid = [args.b] if args.b is not None else parse_grid(args.b_grid)
    anchor, _ = _targets(A, args.anchor)
    controllers, rows = design(A, grid, args.tax_mode, anchor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    control.write_gain_table(controllers, out / "gains.csv")
    _dump(out / "design_report.json", {"tax_mode": args.tax_mode, "anchor": anchor.tolist(),
                                       "channel": control.PAPER_CHANNEL.tolist(), "rows": rows})
    for c in controllers:
        print(f"b={c.b:+.2f}  K=" + " ".join(f"{k:+.4f}" for k in c.K))
    return EXIT_OK


# simulate -----------------------------------------------------------------

def ode_run(A, c, horizon, step, x0=None):
    n = A.n if isinstance(A, game.PayoffMatrix) else len(A)
    x0 = np.full(n, 1.0 / n) if x0 is None else x0
    return dynamics.integrate(dynamics.ReplicatorField(A, c), x0, step, horizon,
                              {"engine": "ode", "b": c.b, "tax_mode": c.tax_mode})


def _with_distances(traj, n1, n2):
    return {"d1": metrics.distance_series(traj, n1), "d2": metrics.distance_series(traj, n2)}


def cmd_simulate_ode(args) -> int:
    A = load_game(args.game)
    anchor, other = _targets(A)
    c = control.build_controller(A, anchor, control.PAPER_CHANNEL, args.b, args.tax_mode)
    traj = ode_run(A, c, args.horizon, args.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = f"ode_b{args.b:+.2f}"
    traj.to_csv(out / f"{name}.csv", _with_distances(traj, anchor, other) if args.distances else None)
    rep = metrics.evaluate(traj, anchor, other, _half_thresholds(A),
                           selection_threshold=SELECTION_THRESHOLDS["ode"])
    _dump(out / f"{name}.json", {"controller": c.to_json(), "step": args.step,
                                 "horizon": args.horizon, "metrics": rep.to_json()})
    print(f"{name}: final {np.round(traj.final, 4).tolist()} selected {rep.selected}")
    return EXIT_OK


def abm_config(A, c, seed, opts):
    n = A.n
    base, rem = divmod(int(opts["n_agents"]), n)
    counts = [base + (1 if i < rem else 0) for i in range(n)]
    return abm.ABMConfig(n_agents=int(opts["n_agents"]), initial_counts=counts,
                         prob_revision=opts["prob_revision"], prob_mutation=opts["prob_mutation"],
                         rounds=int(opts["rounds"]), seed=int(seed), controller=c)


def cmd_simulate_abm(args) -> int:
    A = load_game(args.game)
    anchor, other = _targets(A)
    c = control.build_controller(A, anchor, control.PAPER_CHANNEL, args.b, args.tax_mode)
    opts = dict(SWEEP_DEFAULTS, rounds=args.rounds, n_agents=args.n_agents,
                prob_revision=args.prob_revision, prob_mutation=args.prob_mutation)
    cfg = abm_config(A, c, args.seed, opts)
    traj = abm.run_abm(A, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = f"abm_b{args.b:+.2f}_s{args.seed}"
    traj.to_csv(out / f"{name}.csv", _with_distances(traj, anchor, other) if args.distances else None)
    rep = metrics.evaluate(traj, anchor, other, _half_thresholds(A),
                           selection_threshold=SELECTION_THRESHOLDS["abm"])
    abm.write_manifest(out / f"{name}.json", cfg, traj, {"metrics": rep.to_json()})
    print(f"{name}: final {np.round(traj.final, 4).tolist()} selected {rep.selected}")
    return EXIT_OK


# sweep / evaluate ---------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _run_one(job):
    """One (engine, b, seed) run of a sweep; returns its summary row."""
    A = load_game(job["game"])
    anchor, other = _targets(A)
    c = control.build_controller(A, anchor, control.PAPER_CHANNEL, job["b"], job["tax_mode"])
    out = Path(job["out"]) / "runs"
    try:
        if job["engine"] == "ode":
            traj = ode_run(A, c, job["horizon"], job["step"])
            name = f"ode_b{job['b']:+.2f}"
        else:
            cfg = abm_config(A, c, job["seed"], job)
            traj = abm.run_abm(A, cfg)
            name = f"abm_b{job['b']:+.2f}_s{job['seed']}"
    except dynamics.IntegrationError as exc:
        # a failed run is recorded in the summary; the sweep carries on
        log.error("run %s b=%s seed=%s failed: %s", job["engine"], job["b"], job["seed"], exc)
        return {"b": job["b"], "engine": job["engine"], "seed": job["seed"],
                "selected": "failed", "tau_half": None, "L_strength": float("nan"),
                **{f"rho{i + 1}": float("nan") for i in range(A.n)}}
    rep = metrics.evaluate(traj, anchor, other, _half_thresholds(A), job["discard_fraction"],
                           SELECTION_THRESHOLDS[job["engine"]])
    traj.to_csv(out / f"{name}.csv")
    rep.dump(out / f"{name}.json")
    return {"b": job["b"], "engine": job["engine"], "seed": job["seed"],
            "selected": rep.selected, "tau_half": rep.tau_half, "L_strength": rep.L_strength,
            **{f"rho{i + 1}": float(v) for i, v in enumerate(rep.mean_distribution)}}


def run_sweep(cfg: dict) -> list[dict]:
    out = Path(cfg["out"])
    (out / "runs").mkdir(parents=True, exist_ok=True)
    grid = parse_grid(cfg["b_grid"])
    if not grid or any(not -1 <= b <= 1 for b in grid):
        raise InputError(f"b grid must be nonempty with values in [-1, 1]: {grid}")
    A = load_game(cfg["game"])
    anchor, _ = _targets(A)
    # fail early (and loudly) if any design is infeasible
    design(A, grid, cfg["tax_mode"], anchor)
    jobs = []
    for engine in cfg["engines"]:
        for b in grid:
            # the ODE is deterministic: one run per b, shared by all seeds
            seeds = cfg["seeds"][:1] if engine == "ode" else cfg["seeds"]
            jobs += [dict(cfg, engine=engine, b=b, seed=s) for s in seeds]
    if cfg.get("workers", 1) > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    rows = []
    for job, row in zip(jobs, done):
        if job["engine"] == "ode":
            rows += [dict(row, seed=s) for s in cfg["seeds"]]
        else:
            rows.append(row)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in SUMMARY_HEADER])
    _dump(out / "sweep_config.json", cfg)
    return rows


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["b"] = float(r["b"])
        r["seed"] = int(r["seed"])
        r["tau_half"] = float(r["tau_half"]) if r["tau_half"] else None
        for k in ("L_strength", "rho1", "rho2", "rho3", "rho4", "rho5"):
            r[k] = float(r[k])
    return rows


def _majority(flags):
    flags = list(flags)
    return sum(flags) * 2 > len(flags)


def evaluate_summary(rows, time_scale=None) -> dict:
    """Check the three controller predictions against a sweep summary.

    distribution: for b < 0 the long-run weight sits on strategies 1-3, for
    b > 0 on strategies 4-5 (majority of seeds).
    speed: the median half-convergence time grows as b approaches 0 from
    either side (a run that never converges counts as infinitely slow).
    cycles (ABM only): mean cycle strength is smaller for b > 0 than b < 0.
    """
    result = {"predictions": {}, "passed": True}
    for engine in sorted({r["engine"] for r in rows}):
        er = [r for r in rows if r["engine"] == engine]
        grid = sorted({r["b"] for r in er})
        by_b = {b: [r for r in er if r["b"] == b] for b in grid}

        def side(r):
            return r["rho1"] + r["rho2"] + r["rho3"] - r["rho4"] - r["rho5"]

        dist_fail = [b for b in grid if b != 0 and not _majority(
            (side(r) > 0) == (b < 0) for r in by_b[b])]
        tau = {b: float(np.median([np.inf if r["tau_half"] is None else r["tau_half"]
                                   for r in by_b[b]])) for b in grid}
        neg = [tau[b] for b in grid if b <= 0]
        pos = [tau[b] for b in grid if b > 0]
        speed_ok = all(x < y for x, y in zip(neg, neg[1:])) and all(
            x > y for x, y in zip(pos, pos[1:]))
        pred = {
            "distribution": {"passed": not dist_fail, "failing_b": dist_fail},
            "speed": {"passed": speed_ok,
                      "median_tau_half": {_fmt(b): (None if np.isinf(t) else t)
                                          for b, t in tau.items()}},
        }
        if engine == "abm":
            lneg = np.mean([r["L_strength"] for r in er if r["b"] < 0] or [np.nan])
            lpos = np.mean([r["L_strength"] for r in er if r["b"] > 0] or [np.nan])
            pred["cycles"] = {"passed": bool(lpos < lneg), "mean_L_strength_b_neg": lneg,
                              "mean_L_strength_b_pos": lpos}
        else:
            pred["cycles"] = {"passed": None,
                              "note": "deterministic runs settle without persistent cycles"}
        result["predictions"][engine] = pred
        result["passed"] &= all(p["passed"] is not False for p in pred.values())
    result["passed"] = bool(result["passed"])
    if time_scale is not None:
        result["calibration"] = {"ode_time_per_abm_round": time_scale}
    return result


def _theory(A, grid, tax_mode):
    anchor, _ = _targets(A)
    es = eigen.eig(dynamics.jacobian_replicator(A, anchor))
    cyc = eigen.eigencycles(eigen.rotation_eigenvector(es))
    return {
        "eigencycles_at_anchor": {metrics.pair_key(p): v for p, v in cyc.items()},
        "predicted_selection": {_fmt(b): ("Nash_1" if b < 0 else "Nash_2")
                                for b in grid if b != 0},
    }


def _evaluate_dir(out: Path) -> dict:
    rows = read_summary(out / "summary.csv")
    scale = None
    theory = None
    cfg_path = out / "sweep_config.json"
    if cfg_path.exists():
        cfg = json.loads(cfg_path.read_text())
        A = load_game(cfg["game"])
        scale = cfg["prob_revision"] * (1 - cfg["prob_mutation"]) / abm.payoff_range(A)
        theory = _theory(A, parse_grid(cfg["b_grid"]), cfg["tax_mode"])
    ev = evaluate_summary(rows, scale)
    if theory:
        ev["theory"] = theory
    _dump(out / "evaluation.json", ev)
    return ev


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    unknown = set(data) - set(SWEEP_DEFAULTS)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return data


def cmd_sweep(args) -> int:
    cfg = dict(SWEEP_DEFAULTS)
    if args.config:
        cfg.update(load_config(args.config))
    overrides = {"game": args.game, "b_grid": args.b_grid, "engines": args.engines,
                 "seeds": args.seeds, "out": args.out, "tax_mode": args.tax_mode,
                 "horizon": args.horizon, "step": args.step, "rounds": args.rounds,
                 "workers": args.workers}
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(cfg["engines"], str):
        cfg["engines"] = [e.strip() for e in cfg["engines"].split(",")]
    if isinstance(cfg["seeds"], str):
        cfg["seeds"] = [int(s) for s in cfg["seeds"].split(",")]
    if set(cfg["engines"]) - {"ode", "abm"}:
        raise InputError(f"engines must be a subset of ode,abm: {cfg['engines']}")
    cfg["b_grid"] = parse_grid(cfg["b_grid"])
    try:
        run_sweep(cfg)
    except control.ControlError as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    ev = _evaluate_dir(Path(cfg["out"]))
    print(json.dumps(ev["predictions"], indent=2))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    if not (out / "summary.csv").exists():
        raise InputError(f"{out / 'summary.csv'} not found; run `sweep` first")
    ev = _evaluate_dir(out)
    print(json.dumps(ev["predictions"], indent=2))
    return EXIT_OK if ev["passed"] else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqselect", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--game", default="builtin:paper", help="CSV file or builtin:paper")
        sp.add_argument("--tax-mode", choices=dynamics.TAX_MODES, default="channel_sum")
        sp.add_argument("--out", default=out_default)

    sp = sub.add_parser("analyze", help="equilibria, Jacobians, spectra, eigencycles")
    common(sp, ".")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("design", help="gain table over a b grid")
    common(sp, ".")
    sp.add_argument("--b", type=float)
    sp.add_argument("--b-grid", default=",".join(str(b) for b in control.TABLE_GRID))
    sp.add_argument("--anchor", type=int, help="index of the anchor equilibrium")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("simulate-ode", help="controlled replicator ODE from the uniform state")
    common(sp, ".")
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--horizon", type=float, default=200.0)
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--distances", action="store_true", help="append d1,d2 columns")
    sp.set_defaults(func=cmd_simulate_ode)

    sp = sub.add_parser("simulate-abm", help="agent-based run with the controller")
    common(sp, ".")
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--rounds", type=int, default=6000)
    sp.add_argument("--n-agents", type=int, default=1000)
    sp.add_argument("--prob-revision", type=float, default=0.2)
    sp.add_argument("--prob-mutation", type=float, default=0.05)
    sp.add_argument("--distances", action="store_true", help="append d1,d2 columns")
    sp.set_defaults(func=cmd_simulate_abm)

    sp = sub.add_parser("sweep", help="design + simulate + evaluate over a b grid")
    sp.add_argument("--config", help="JSON file with flat keys (see README)")
    sp.add_argument("--game")
    sp.add_argument("--tax-mode", choices=dynamics.TAX_MODES)
    sp.add_argument("--out")
    sp.add_argument("--b-grid")
    sp.add_argument("--engines")
    sp.add_argument("--seeds")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("evaluate", help="re-evaluate a sweep directory from summary.csv")
    sp.add_argument("--out", default="sweep_out")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, game.GameError, abm.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
