"""Command-line front end.

Subcommands: model build, seq check, seq dwell, seq search, cov steady,
chance verify, sim run. Bitstring arguments read left to right as
eta_0 eta_1 ..., with 1 = actuate and 0 = sense.

Exit codes: 0 success (an infeasible search is a valid finding), 2 input
or schema error, 3 synthesis or numerical failure, 4 I/O error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .chance import verify_chance
from .covariance import steady_augmented_cov, steady_error_cov
from .exceptions import (
    DimensionError,
    DomainError,
    NumericsError,
    SchemaError,
    SensactError,
    StabilityError,
)
from .modelio import (
    box_from_config,
    build_from_config,
    cost_weights_from_config,
    dump_json,
    load_config,
    load_model,
    resolve_config_path,
    save_model,
    sim_config_from_config,
)
from .plant import mode_matrices
from .search import SearchOptions, search_fixed_length, search_up_to
from .sequence import (
    SwitchSequence,
    admissibility,
    dwell_counts,
    dwell_feasible,
    growth_constant,
    irreducible_core,
)
from .sim import run_ensemble

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _radii_line(mm) -> str:
    r = mm.spectral_radii
    return (f"rho(coast)={r[0]:.4f}  rho(feedback)={r[1]:.4f}  "
            f"rho(observer)={r[2]:.4f}  rho(actuate)={r[3]:.4f}")


def cmd_model_build(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    model, gains = build_from_config(cfg)
    mm = mode_matrices(model, gains)
    c = growth_constant(mm)
    summary = {
        "spectral_radii": {
            "coast": mm.spectral_radii[0],
            "feedback": mm.spectral_radii[1],
            "observer": mm.spectral_radii[2],
            "actuate": mm.spectral_radii[3],
        },
        "fro_norms": {
            "coast": mm.fro_norms[0],
            "feedback": mm.fro_norms[1],
            "observer": mm.fro_norms[2],
            "actuate": mm.fro_norms[3],
        },
        "growth_constant": c,
    }
    save_model(args.out, model, gains, summary=summary, config_echo=cfg)
    print(_radii_line(mm))
    print(f"growth constant c = {c:.4f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _load(args):
    model, gains, cfg = load_model(args.model)
    return model, gains, cfg or {}


def cmd_seq_check(args) -> int:
    model, gains, cfg = _load(args)
    mm = mode_matrices(model, gains)
    seq = SwitchSequence.from_string(args.bits)
    core = irreducible_core(seq)
    report = admissibility(seq, mm)
    d = dwell_counts(seq)
    out = {
        "sequence": str(seq),
        "core": str(core),
        "dwell": {"n0": d.n0, "n1": d.n1, "ns": d.ns},
        "qbar": report.qbar,
        "qtilde": report.qtilde,
        "admissible": report.admissible,
    }
    print(f"sequence {seq}  (irreducible core {core})")
    print(f"dwell counts: n0={d.n0} n1={d.n1} ns={d.ns}")
    print(f"qbar={report.qbar:.6g}  qtilde={report.qtilde:.6g}  "
          f"admissible={'yes' if report.admissible else 'no'}")
    if args.dwell:
        c = growth_constant(mm)
        feas = dwell_feasible(seq, mm.spectral_radii, c)
        out["dwell_screen"] = {
            "c": c,
            "lhs_ctrl": feas.lhs_ctrl,
            "lhs_obs": feas.lhs_obs,
            "lhs_obs_typeset": feas.lhs_obs_typeset,
            "passes": feas.passes,
        }
        print(f"dwell screen: c={c:.4f} lhs_ctrl={feas.lhs_ctrl:.4f} "
              f"lhs_obs={feas.lhs_obs:.4f} passes={'yes' if feas.passes else 'no'}")
    if args.chance:
        delta = args.delta if args.delta is not None else (cfg.get("chance") or {}).get("delta")
        if delta is None:
            raise SchemaError("chance check requested but no --delta given "
                              "and none in the model's config echo")
        box = box_from_config(cfg, bound=args.bound)
        if box is None:
            raise SchemaError("chance check requested but no --bound given "
                              "and none in the model's config echo")
        chance = verify_chance(seq, model, gains, box, float(delta))
        out["chance"] = chance.to_dict()
        print(f"chance: alpha={chance.alpha:.4f} radii "
              f"[{chance.min_radius:.4f}, {chance.max_radius:.4f}] "
              f"exact={'pass' if chance.passes else 'fail'} "
              f"sphere={'pass' if chance.sphere_passes else 'fail'}")
    if args.json:
        _write_text(args.json, dump_json(out))
    return EXIT_OK


def cmd_seq_dwell(args) -> int:
    model, gains, _ = _load(args)
    mm = mode_matrices(model, gains)
    seq = SwitchSequence.from_string(args.bits)
    c = growth_constant(mm, kstar=args.kstar, family=args.family,
                        search_kstar=args.search_kstar)
    feas = dwell_feasible(seq, mm.spectral_radii, c)
    d = dwell_counts(seq)
    print(_radii_line(mm))
    print(f"n0={d.n0} n1={d.n1} ns={d.ns}  c={c:.4f}")
    print(f"lhs_ctrl={feas.lhs_ctrl:.4f}  lhs_obs={feas.lhs_obs:.4f}  "
          f"(typeset variant {feas.lhs_obs_typeset:.4f})")
    print(f"dwell screen {'passes' if feas.passes else 'fails'}")
    return EXIT_OK


def cmd_seq_search(args) -> int:
    model, gains, cfg = _load(args)
    weights = cost_weights_from_config(cfg, model.n)
    options = SearchOptions(prefilter=args.prefilter, all_lengths=args.all_lengths,
                            include_table=args.table, threads=args.threads)
    if args.n is not None:
        result = search_fixed_length(args.n, model, gains, weights, options)
    else:
        result = search_up_to(args.n_max, model, gains, weights, options)
    out = {
        "feasible": result.feasible,
        "length": result.length,
        "counts": {
            "enumerated": result.counts.enumerated,
            "cores_evaluated": result.counts.cores_evaluated,
            "memo_hits": result.counts.memo_hits,
            "screen_accepts": result.counts.screen_accepts,
            "screen_rejects": result.counts.screen_rejects,
        },
    }
    if result.feasible:
        out.update({
            "sequence": str(result.sequence),
            "core": str(result.core),
            "cost": result.cost,
            "qbar": result.report.qbar,
            "qtilde": result.report.qtilde,
            "tied": [str(s) for s in result.tied],
        })
        print(f"optimum at length {result.length}: {result.sequence} "
              f"(core {result.core}, cost {result.cost:.9g})")
        print(f"qbar={result.report.qbar:.6g} qtilde={result.report.qtilde:.6g}")
        print(f"tie class ({len(result.tied)}): {' '.join(str(s) for s in result.tied)}")
    else:
        print(f"no admissible sequence up to length {result.length}")
    if args.table and result.table:
        out["table"] = [
            {"word": "".join(map(str, w)), "core": "".join(map(str, c)), "cost": cost}
            for w, c, cost in result.table
        ]
    if args.json:
        _write_text(args.json, dump_json(out))
    return EXIT_OK


def cmd_cov_steady(args) -> int:
    model, gains, _ = _load(args)
    mm = mode_matrices(model, gains)
    seq = SwitchSequence.from_string(args.bits)
    err = steady_error_cov(seq, mm, model.sigma_v, model.sigma_w)
    out = {
        "sequence": str(seq),
        "period": err.period,
        "error_phases": {str(k): err[k].tolist() for k in range(err.period)},
    }
    print(f"steady error covariance traces: "
          + " ".join(f"{np.trace(p):.6g}" for p in err))
    if args.augmented:
        joint, state = steady_augmented_cov(seq, model, gains)
        out["state_phases"] = {str(k): state[k].tolist() for k in range(state.period)}
        out["joint_phases"] = {str(k): joint[k].tolist() for k in range(joint.period)}
        print(f"steady state covariance traces: "
              + " ".join(f"{np.trace(p):.6g}" for p in state))
    if args.json:
        _write_text(args.json, dump_json(out))
    return EXIT_OK


def cmd_chance_verify(args) -> int:
    model, gains, cfg = _load(args)
    seq = SwitchSequence.from_string(args.bits)
    delta = args.delta if args.delta is not None else (cfg.get("chance") or {}).get("delta")
    if delta is None:
        raise SchemaError("no --delta given and none in the model's config echo")
    box = box_from_config(cfg, bound=args.bound)
    if box is None:
        raise SchemaError("no --bound given and none in the model's config echo")
    report = verify_chance(seq, model, gains, box, float(delta))
    print(f"alpha = {report.alpha:.4f}")
    for ph in report.phases:
        print(f"phase {ph.phase}: radius {ph.radius:.4f} "
              f"min margin {min(ph.margins):.4f} "
              f"face {'pass' if ph.face_pass else 'fail'} "
              f"sphere {'pass' if ph.sphere_pass else 'fail'}")
    print(f"overall: exact {'pass' if report.passes else 'fail'}, "
          f"sphere {'pass' if report.sphere_passes else 'fail'}")
    if args.json:
        _write_text(args.json, dump_json(report.to_dict()))
    return EXIT_OK


def cmd_sim_run(args) -> int:
    model, gains, cfg = _load(args)
    seq = SwitchSequence.from_string(args.bits)
    overrides = {"steps": args.steps, "runs": args.runs, "seed": args.seed}
    sim_cfg = sim_config_from_config(cfg, model.n, model.m, overrides)
    box = box_from_config(cfg, bound=args.bound) if (args.bound or cfg.get("chance")) else None
    stats, trajectories = run_ensemble(model, gains, seq, sim_cfg, box=box,
                                       threads=args.threads, return_trajectories=True)
    os.makedirs(args.out, exist_ok=True)
    _write_trajectories(os.path.join(args.out, "trajectories.csv"), trajectories)
    _write_ensemble(os.path.join(args.out, "ensemble.csv"), stats)
    meta = dict(stats.meta)
    meta.update({"version": __version__, "config_echo": cfg or None,
                 "bound": None if box is None else box.half_width})
    _write_text(os.path.join(args.out, "meta.json"), dump_json(meta))
    print(f"wrote {sim_cfg.runs} runs x {sim_cfg.steps} steps to {args.out}")
    if stats.violation is not None:
        steady = stats.violation[stats.violation.size // 2:]
        print(f"max steady-window violation fraction = {steady.max():.4f}")
    return EXIT_OK


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _fmt(value) -> str:
    return "" if not np.isfinite(value) else repr(float(value))


def _write_trajectories(path, trajectories):
    n = trajectories[0].x.shape[1]
    m = trajectories[0].u.shape[1]
    header = (["run", "k", "eta"]
              + [f"x{i + 1}" for i in range(n)]
              + [f"xh{i + 1}" for i in range(n)]
              + [f"u{i + 1}" for i in range(m)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for run, traj in enumerate(trajectories):
            steps = traj.eta.size
            for k in range(steps + 1):
                eta = str(traj.eta[k]) if k < steps else ""
                u = traj.u[k] if k < steps else np.full(m, np.nan)
                writer.writerow([run, k, eta]
                                + [repr(float(v)) for v in traj.x[k]]
                                + [repr(float(v)) for v in traj.xhat[k]]
                                + [_fmt(v) for v in u])


def _write_ensemble(path, stats):
    n = stats.mean.shape[1]
    header = ["k"] + [f"mean_x{i + 1}" for i in range(n)] + ["violation_fraction"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(stats.mean.shape[0]):
            viol = "" if stats.violation is None else repr(float(stats.violation[k]))
            writer.writerow([k] + [repr(float(v)) for v in stats.mean[k]] + [viol])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensact",
        description="Periodic sensing/actuation schedules for linear systems "
                    "that cannot sense and actuate in the same time step.",
    )
    parser.add_argument("--version", action="version", version=f"sensact {__version__}")
    top = parser.add_subparsers(dest="group", required=True)

    model = top.add_parser("model", help="model construction").add_subparsers(
        dest="cmd", required=True)
    build = model.add_parser("build", help="build a model file from a config")
    build.add_argument("config", help="config JSON (also searched in $SENSACT_CONFIG_DIR)")
    build.add_argument("-o", "--out", default="model.json", help="output model file")
    build.set_defaults(func=cmd_model_build)

    seq = top.add_parser("seq", help="sequence analysis").add_subparsers(
        dest="cmd", required=True)
    check = seq.add_parser("check", help="admissibility of one sequence")
    check.add_argument("model")
    check.add_argument("bits", help="bitstring, leftmost bit is eta_0 (1 = actuate)")
    check.add_argument("--dwell", action="store_true", help="also run the dwell screen")
    check.add_argument("--chance", action="store_true", help="also verify chance constraints")
    check.add_argument("--bound", type=float, default=None, help="box half-width")
    check.add_argument("--delta", type=float, default=None, help="violation budget")
    check.add_argument("--json", default=None, help="also write a JSON report here")
    check.set_defaults(func=cmd_seq_check)

    dwell = seq.add_parser("dwell", help="dwell-time screen values")
    dwell.add_argument("model")
    dwell.add_argument("bits")
    dwell.add_argument("--kstar", type=int, default=1)
    dwell.add_argument("--family", default="control",
                       choices=["control", "observer", "all"])
    dwell.add_argument("--search-kstar", action="store_true",
                       help="scan kstar <= 20 for the smallest growth constant")
    dwell.set_defaults(func=cmd_seq_dwell)

    search = seq.add_parser("search", help="exhaustive schedule search")
    search.add_argument("model")
    group = search.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int, default=None, help="search one fixed length")
    group.add_argument("--n-max", type=int, default=None,
                       help="search lengths 1..N until one is feasible")
    search.add_argument("--prefilter", default="off",
                        choices=["off", "screen", "heuristic"])
    search.add_argument("--all-lengths", action="store_true",
                        help="with --n-max, keep searching all lengths for the global optimum")
    search.add_argument("--table", action="store_true", help="include the per-word cost table")
    search.add_argument("--threads", type=int, default=1,
                        help="worker pool size for core evaluation")
    search.add_argument("--json", default=None)
    search.set_defaults(func=cmd_seq_search)

    cov = top.add_parser("cov", help="covariance analysis").add_subparsers(
        dest="cmd", required=True)
    steady = cov.add_parser("steady", help="steady periodic covariances")
    steady.add_argument("model")
    steady.add_argument("bits")
    steady.add_argument("--augmented", action="store_true",
                        help="also solve the joint (state, error) system")
    steady.add_argument("--json", default=None)
    steady.set_defaults(func=cmd_cov_steady)

    chance = top.add_parser("chance", help="chance constraints").add_subparsers(
        dest="cmd", required=True)
    verify = chance.add_parser("verify", help="steady-state chance-constraint test")
    verify.add_argument("model")
    verify.add_argument("bits")
    verify.add_argument("--bound", type=float, default=None)
    verify.add_argument("--delta", type=float, default=None)
    verify.add_argument("--json", default=None)
    verify.set_defaults(func=cmd_chance_verify)

    sim = top.add_parser("sim", help="Monte-Carlo simulation").add_subparsers(
        dest="cmd", required=True)
    run = sim.add_parser("run", help="seeded ensemble simulation")
    run.add_argument("model")
    run.add_argument("bits")
    run.add_argument("--steps", type=int, default=None)
    run.add_argument("--runs", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--bound", type=float, default=None)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=cmd_sim_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, DomainError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StabilityError, NumericsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SensactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
