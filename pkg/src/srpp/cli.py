"""Command-line front end.

Subcommands: gen-profile, calibrate, caps, account, sweep, bench.  Every
command resolves its parameters, emits a run manifest next to its
results, and exits 0 on success, 2 on usage errors, 3 on data errors,
4 on infeasible confidence/bracketing, 5 on capacity limits.  All
randomness derives from --seed / --master-seed, and reruns with the
same arguments produce byte-identical outputs.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from srpp import accountant, bench, calibrate, caps, pipelines, scenario, sensitivity
from srpp.errors import CapacityError, DataError, InfeasibleError
from srpp.svgplot import line_chart

SCHEMA_VERSION = 1


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _outdir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, args: argparse.Namespace) -> None:
    params = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    }
    _write_json(
        out / "run_manifest.json",
        {"schema_version": SCHEMA_VERSION, "command": command, "params": params},
    )


def _parse_floats(text: str):
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError("expected a comma-separated list of numbers")
    return values


def _parse_ints(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def _load_profile(args) -> scenario.SliceProfile:
    if args.profile is not None:
        return scenario.read_profile(args.profile)
    if args.dim is None or args.m is None:
        raise ValueError("pass --profile FILE or both --dim and --m")
    return scenario.sample_slice_profile(args.dim, args.m, args.seed)


def cmd_gen_profile(args) -> int:
    out = Path(args.out)
    if out.exists() and out.stat().st_size > 0 and not args.force:
        raise ValueError(f"refusing to overwrite non-empty {out} without --force")
    profile = scenario.sample_slice_profile(args.dim, args.m, args.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    scenario.write_profile(profile, out)
    _write_json(
        out.with_name(out.name + ".manifest.json"),
        {
            "schema_version": SCHEMA_VERSION,
            "command": "gen-profile",
            "params": {"dim": args.dim, "m": args.m, "seed": args.seed},
        },
    )
    print(f"wrote {profile.m} directions in R^{profile.dim} to {out}")
    return 0


def cmd_calibrate(args) -> int:
    data = scenario.load_scenario(args.manifest)
    profile = _load_profile(args)
    out = _outdir(args.out)
    _manifest(out, "calibrate", args)

    pac = args.mode in ("ave_pac", "joint_pac")
    if pac:
        if args.delta0 is None:
            raise ValueError(f"mode {args.mode} requires --delta0")
        if args.gamma is None and args.rho is None:
            raise ValueError(f"mode {args.mode} requires --gamma (or --rho)")
        if args.rho is not None:
            sens = sensitivity.build_profile(
                data, profile, "dkw", rho=args.rho, delta0=args.delta0
            )
        else:
            sens = sensitivity.build_profile(
                data,
                profile,
                "dkw",
                delta0=args.delta0,
                gamma=args.gamma,
                joint_union=True,
            )
    else:
        sens = sensitivity.build_profile(data, profile, "exact")

    spec = calibrate.CalibrationSpec(
        alpha=args.alpha, epsilon=args.epsilon, mode=args.mode, gamma=args.gamma
    )
    if args.mode == "ave":
        noise = calibrate.calibrate_ave(sens.mean_square, spec, dim=data.dim)
    elif args.mode == "joint":
        noise = calibrate.calibrate_joint(sens.worst, spec, dim=data.dim)
    elif args.mode == "ave_pac":
        noise = calibrate.calibrate_ave_pac(sens, spec, profile.m)
    else:
        noise = calibrate.calibrate_joint_pac(sens, spec, profile.m)

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "calibrate",
        "mode": args.mode,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
        "instances": data.instance_count,
        "per_slice": sens.per_slice.tolist(),
        "mean_square": sens.mean_square,
        "worst": sens.worst,
        "sigma2": noise.sigma2,
        "sigma": noise.sigma,
        "zero_noise_warning": noise.sigma2 == 0.0,
    }
    if pac:
        report["confidence"] = {
            "gamma": args.gamma,
            "rho_per_estimate": sens.rho,
            "delta0": sens.delta0,
            "m": profile.m,
        }
    _write_json(out / "report.json", report)
    _write_json(
        out / "noise.json",
        {
            "sigma2": noise.sigma2,
            "dim": noise.dim,
            "mode": args.mode,
            "alpha": args.alpha,
            "epsilon": args.epsilon,
        },
    )
    print(f"sigma2 = {noise.sigma2!r} (sigma = {noise.sigma!r}) -> {out}")
    return 0


def cmd_caps(args) -> int:
    out = _outdir(args.out)
    _manifest(out, "caps", args)
    if args.method == "tv":
        est = caps.caps_from_tv(args.tau, args.batch, args.delta, scheme=args.scheme)
    elif args.method == "hypergeometric":
        mean, var, m2 = caps.hypergeometric_k2(
            args.population, args.differing, args.batch
        )
        est = caps.CapEstimate(
            tail_cap=float(min(args.batch, args.differing)),
            delta=0.0,
            ms_cap=min(m2, float(args.batch**2)),
            gamma=0.0,
            batch=args.batch,
            method="hypergeometric",
        )
    elif args.method == "localized":
        est = caps.localized_cap(args.dmax, args.batch)
    else:  # mc over the recordwise Bernoulli mismatch model
        sub = caps.SubsamplingSpec(
            scheme=args.scheme,
            population=args.population,
            batch=args.batch,
            rate=args.rate,
        )
        sampler = caps.bernoulli_mismatch_coupling(
            lambda rng: np.zeros(args.population, dtype=np.int64),
            args.tau,
            lambda rng, rows: np.ones(rows.shape[0], dtype=np.int64),
        )
        est = caps.mc_caps(sampler, sub, args.draws, args.delta, args.gamma, args.seed)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "caps",
        "method": est.method,
        "tail_cap": est.tail_cap,
        "delta": est.delta,
        "ms_cap": est.ms_cap,
        "gamma": est.gamma,
        "batch": est.batch,
    }
    _write_json(out / "caps.json", report)
    print(f"tail_cap = {est.tail_cap!r}, ms_cap = {est.ms_cap!r} -> {out}")
    return 0


def cmd_account(args) -> int:
    out = _outdir(args.out)
    _manifest(out, "account", args)
    profile = _load_profile(args)
    lips = np.full(profile.m, args.lipschitz)

    deltas, gammas = [], []
    if args.cap_source == "hypergeometric":
        k_cap = float(min(args.batch, args.differing))
        _, _, k2 = caps.hypergeometric_k2(args.population, args.differing, args.batch)
    elif args.cap_source == "localized":
        est = caps.localized_cap(args.dmax, args.batch)
        k_cap, k2 = est.tail_cap, est.ms_cap
    elif args.cap_source == "tv":
        est = caps.caps_from_tv(args.tau, args.batch, args.delta)
        k_cap, k2 = est.tail_cap, est.ms_cap
        deltas = [args.delta] * args.iterations
    else:  # fixed
        if args.k_cap is None and args.k2 is None:
            raise ValueError("--cap-source fixed needs --k-cap and/or --k2")
        k_cap = args.k_cap if args.k_cap is not None else 0.0
        k2 = args.k2 if args.k2 is not None else k_cap**2

    if args.mode.startswith("sa"):
        h = accountant.sa_huc_from_k2(k2, args.batch, args.clip, lips)
    else:
        h = accountant.huc_from_cap(k_cap, args.batch, args.clip, lips)
    ledger = np.tile(h, (args.iterations, 1))

    table = []
    for eps in sorted(_parse_floats(args.epsilons)):
        noise = accountant.sigma_for_budget(
            ledger, profile, args.alpha, eps, args.mode
        )
        table.append({"epsilon": eps, "sigma2": noise.sigma2, "sigma": noise.sigma})

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "account",
        "mode": args.mode,
        "alpha": args.alpha,
        "cap_source": args.cap_source,
        "k_cap": k_cap,
        "k2": k2,
        "ledger": {
            "iterations": args.iterations,
            "h_per_slice": h.tolist(),
        },
        "sigma_table": table,
        "residual_success_probability": caps.delta_gamma_bookkeeping(deltas, gammas),
    }
    if args.compose_epsilons:
        budgets = [
            (args.alpha, e, args.mode) for e in _parse_floats(args.compose_epsilons)
        ]
        composed = accountant.compose(budgets)
        report["composition"] = {
            "epsilons": list(composed.epsilons),
            "total": composed.total,
        }
    _write_json(out / "account.json", report)
    print(f"{len(table)} sigma rows -> {out}")
    return 0


def _write_rows_csv(path: Path, rows) -> None:
    header = "epsilon,mode,mse,mae,attack_acc,advantage,auc,sigma"
    lines = [header]
    for r in rows:
        auc = "" if r.auc is None else repr(r.auc)
        lines.append(
            f"{r.epsilon!r},{r.mode},{r.mse!r},{r.mae!r},"
            f"{r.attack_acc!r},{r.advantage!r},{auc},{r.sigma!r}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_sweep_svgs(out: Path, rows) -> None:
    eps = [r.epsilon for r in rows]
    metrics = {
        "mse": [r.mse for r in rows],
        "mae": [r.mae for r in rows],
        "attack_acc": [r.attack_acc for r in rows],
        "advantage": [r.advantage for r in rows],
        "sigma": [r.sigma for r in rows],
    }
    if all(r.auc is not None for r in rows):
        metrics["auc"] = [r.auc for r in rows]
    mode = rows[0].mode if rows else ""
    for name, values in metrics.items():
        svg = line_chart(
            {mode: (eps, values)},
            title=f"{name} vs epsilon",
            xlabel="epsilon",
            ylabel=name,
            logx=True,
        )
        (out / f"{name}.svg").write_text(svg, encoding="utf-8")


def cmd_sweep(args) -> int:
    out = _outdir(args.out)
    _manifest(out, "sweep", args)
    epsilons = _parse_floats(args.epsilons)
    if args.kind == "static":
        if args.manifest is None:
            raise ValueError("--kind static requires --manifest")
        data = scenario.load_scenario(args.manifest)
        profile = _load_profile(args)
        rows, info = pipelines.static_sweep(
            data, profile, args.mode, args.alpha, epsilons, args.trials,
            args.master_seed,
        )
    else:
        cfg = pipelines.SgdSweepConfig(
            n=args.n,
            d=args.d,
            test_n=args.test_n,
            separation=args.separation,
            secret_class=args.secret_class,
            p_low=args.p_low,
            p_high=args.p_high,
            iterations=args.iterations,
            batch=args.batch,
            clip=args.clip,
            lr=args.lr,
            alpha=args.alpha,
            mode=args.mode,
            slices=args.slices,
            attack_trials=args.attack_trials,
            master_seed=args.master_seed,
        )
        rows, info = pipelines.sgd_sweep(cfg, epsilons)
    _write_rows_csv(out / "results.csv", rows)
    _write_sweep_svgs(out, rows)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "rows": [dataclasses.asdict(r) for r in rows],
        "info": info,
    }
    _write_json(out / "report.json", report)
    print(f"{len(rows)} sweep rows -> {out}")
    return 0


def cmd_bench(args) -> int:
    out = _outdir(args.out)
    _manifest(out, "bench", args)
    lines = ["kind,n,seconds"]
    report = {"schema_version": SCHEMA_VERSION, "command": "bench", "suite": args.suite}
    if args.suite == "scaling":
        sliced = bench.bench_sliced(
            _parse_ints(args.sliced_ns), args.d, args.m, args.instances, args.seed
        )
        oracle = bench.bench_oracle(_parse_ints(args.oracle_ns), args.d, args.seed)
        for n, t in sliced:
            lines.append(f"sliced,{n},{t!r}")
        for n, t in oracle:
            lines.append(f"oracle,{n},{t!r}")
        report["sliced_slope"] = bench.fit_loglog_slope(
            [n for n, _ in sliced], [t for _, t in sliced]
        )
        report["oracle_slope"] = bench.fit_loglog_slope(
            [n for n, _ in oracle], [t for _, t in oracle]
        )
        print(
            f"sliced slope {report['sliced_slope']:.3f}, "
            f"oracle slope {report['oracle_slope']:.3f}"
        )
    else:
        lines = ["backend,n,seconds"]
        for name, n, t in bench.bench_backends(
            _parse_ints(args.oracle_ns), args.d, args.seed
        ):
            lines.append(f"{name},{n},{t!r}")
    (out / "timings.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "report.json", report)
    print(f"timings -> {out}")
    return 0


def _add_profile_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", help="slice-profile CSV (u0..u{d-1},weight)")
    p.add_argument("--dim", type=int, help="ambient dimension for a sampled profile")
    p.add_argument("--m", type=int, help="number of sampled directions")
    p.add_argument("--seed", type=int, default=0, help="profile sampling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srpp",
        description="Sliced Renyi Pufferfish privacy: calibration, accounting, auditing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-profile", help="sample a slice profile to CSV")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_profile)

    p = sub.add_parser("calibrate", help="sensitivity estimation plus noise calibration")
    p.add_argument("--manifest", required=True)
    _add_profile_options(p)
    p.add_argument(
        "--mode", required=True, choices=["ave", "joint", "ave_pac", "joint_pac"]
    )
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta0", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("caps", help="discrepancy-cap estimation")
    p.add_argument(
        "--method",
        required=True,
        choices=["mc", "tv", "hypergeometric", "localized"],
    )
    p.add_argument("--scheme", default="WOR", choices=list(caps.SCHEMES))
    p.add_argument("--population", type=int, default=1000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--differing", type=int, default=0)
    p.add_argument("--dmax", type=int, default=0)
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_caps)

    p = sub.add_parser("account", help="sigma(epsilon) table from cap ledgers")
    _add_profile_options(p)
    p.add_argument(
        "--cap-source",
        required=True,
        choices=["hypergeometric", "localized", "tv", "fixed"],
    )
    p.add_argument("--population", type=int, default=50000)
    p.add_argument("--differing", type=int, default=0)
    p.add_argument("--dmax", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--k-cap", type=float)
    p.add_argument("--k2", type=float)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--clip", type=float, required=True)
    p.add_argument("--lipschitz", type=float, required=True)
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--epsilons", required=True)
    p.add_argument(
        "--mode", default="sa_ave", choices=["ave", "joint", "sa_ave", "sa_joint"]
    )
    p.add_argument("--compose-epsilons")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("sweep", help="end-to-end privatize/train + audit sweep")
    p.add_argument("--kind", required=True, choices=["static", "sgd"])
    p.add_argument("--manifest", help="scenario manifest (static)")
    _add_profile_options(p)
    p.add_argument("--mode", default="ave")
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--epsilons", required=True)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--test-n", type=int, default=500)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--secret-class", type=int, default=1)
    p.add_argument("--p-low", type=float, default=0.5)
    p.add_argument("--p-high", type=float, default=0.502)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--clip", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--slices", type=int, default=8)
    p.add_argument("--attack-trials", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="runtime benchmarks and slope fits")
    p.add_argument("--suite", default="scaling", choices=["scaling", "backends"])
    p.add_argument("--sliced-ns", default="1000,2000,4000,8000")
    p.add_argument("--oracle-ns", default="16,32,64")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--m", type=int, default=128)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
