"""End-to-end sweep pipelines shared by the CLI and the test suite.

``static_sweep`` privatizes per-record query outputs over a budget grid
and audits them with the prior-aware MAP attack.  ``sgd_sweep`` trains
clipped noisy SGD runs calibrated by the cap accountant over a budget
grid, checks the per-iteration shift bound against the counterfactual
world, and audits with world-inference and membership attacks.
"""

from dataclasses import asdict, dataclass

import numpy as np

from srpp.accountant import SgdHyper, huc_from_cap, sa_huc_from_k2, sigma_for_budget
from srpp.audit import AttackSpec, attack_metrics, loss_threshold_mia, map_attack, monotone_violations
from srpp.calibrate import CalibrationSpec, NoiseSpec, calibrate_ave, calibrate_joint
from srpp.caps import SubsamplingSpec, hypergeometric_k2
from srpp.rng import rng_stream
from srpp.scenario import ScenarioDataset, SliceProfile, sample_slice_profile
from srpp.sensitivity import build_profile
from srpp.sgdsim import LabeledDataset, build_two_world, evaluate, make_synthetic, run_sgd


@dataclass(frozen=True)
class SweepRow:
    """One budget point of a sweep; matches the results.csv schema."""

    epsilon: float
    mode: str
    mse: float
    mae: float
    attack_acc: float
    advantage: float
    auc: float | None
    sigma: float


def _trends(rows):
    eps_order = np.argsort([r.epsilon for r in rows])
    ordered = [rows[i] for i in eps_order]
    return {
        "mse_violations": monotone_violations(
            [r.mse for r in ordered], "nonincreasing"
        ),
        "attack_acc_violations": monotone_violations(
            [r.attack_acc for r in ordered], "nondecreasing"
        ),
        "advantage_violations": monotone_violations(
            [r.advantage for r in ordered], "nondecreasing"
        ),
    }


def static_sweep(
    data: ScenarioDataset,
    profile: SliceProfile,
    mode: str,
    alpha: float,
    epsilons,
    trials: int,
    master_seed: int,
):
    """Privatize-and-attack sweep on a loaded scenario.

    Per budget: calibrate the variance from exact sensitivities, then
    over `trials` draws sample a secret from the empirical prior, pick
    one conditional query output, privatize it, and attack.  Returns
    (rows, info) with trend diagnostics in info.
    """
    if mode not in ("ave", "joint"):
        raise ValueError("static sweep supports modes 'ave' and 'joint'")
    if trials < 1:
        raise ValueError("trials must be positive")
    sens = build_profile(data, profile, "exact")
    prior_id = data.priors[0]
    secrets = sorted({s for pair in data.secret_space.pairs for s in pair})
    worlds = [data.world(prior_id, s) for s in secrets]
    counts = np.array([w.n for w in worlds], dtype=np.float64)
    prior = counts / counts.sum()
    means = np.stack([w.samples.mean(axis=0) for w in worlds])

    rows = []
    mean_l2 = []
    for j, eps in enumerate(sorted(epsilons)):
        spec = CalibrationSpec(alpha=alpha, epsilon=float(eps), mode=mode)
        if mode == "ave":
            noise = calibrate_ave(sens.mean_square, spec, dim=data.dim)
        else:
            noise = calibrate_joint(sens.worst, spec, dim=data.dim)
        if noise.sigma2 == 0:
            raise ValueError("zero sensitivity: nothing to sweep")
        rng = rng_stream(master_seed, 0xA7, j)
        truth = rng.choice(len(secrets), size=trials, p=prior)
        xs = np.empty((trials, data.dim))
        for i, s_idx in enumerate(truth):
            w = worlds[s_idx]
            xs[i] = w.samples[rng.integers(w.n)]
        ys = xs + rng.normal(0.0, noise.sigma, size=xs.shape)
        spec_attack = AttackSpec(group_means=means, prior=prior, sigma2=noise.sigma2)
        report = attack_metrics(map_attack(ys, spec_attack), truth, prior)
        err = ys - xs
        mean_l2.append(float(np.mean(np.linalg.norm(err, axis=1))))
        rows.append(
            SweepRow(
                epsilon=float(eps),
                mode=mode,
                mse=float(np.mean(np.sum(err**2, axis=1))),
                mae=float(np.mean(np.abs(err))),
                attack_acc=report.accuracy,
                advantage=report.advantage,
                auc=None,
                sigma=noise.sigma,
            )
        )
    info = {
        "kind": "static",
        "prior_id": prior_id,
        "secrets": secrets,
        "mean_l2": mean_l2,
    }
    info.update(_trends(rows))
    return rows, info


@dataclass(frozen=True)
class SgdSweepConfig:
    """Resolved parameters of an iterative sweep."""

    n: int = 2000
    d: int = 20
    test_n: int = 500
    separation: float = 3.0
    secret_class: int = 1
    p_low: float = 0.5
    p_high: float = 0.502
    iterations: int = 300
    batch: int = 64
    clip: float = 1.0
    lr: float = 0.2
    alpha: float = 16.0
    mode: str = "sa_ave"
    slices: int = 8
    attack_trials: int = 16
    reference_runs: int = 16
    scheme: str = "WOR"
    master_seed: int = 0


def _flat(W: np.ndarray) -> np.ndarray:
    return np.asarray(W, dtype=np.float64).ravel()


def sgd_sweep(config: SgdSweepConfig, epsilons):
    """Accountant-calibrated SGD runs over a budget grid with audits.

    Per budget: calibrate sigma from the two-world discrepancy caps, run
    on the realized world with the counterfactual shift check, report
    mechanism error against the noiseless twin run, test accuracy,
    membership AUC, and MAP world-inference advantage over repeated
    trials.
    """
    cfg = config
    if cfg.mode not in ("ave", "joint", "sa_ave", "sa_joint"):
        raise ValueError(f"unsupported accountant mode {cfg.mode!r}")
    data = make_synthetic(
        cfg.n + cfg.test_n, cfg.d, 2, cfg.separation, cfg.master_seed
    )
    train = LabeledDataset(data.features[: cfg.n], data.labels[: cfg.n])
    test = LabeledDataset(data.features[cfg.n :], data.labels[cfg.n :])
    pair = build_two_world(
        train.labels, cfg.secret_class, cfg.p_low, cfg.p_high, cfg.master_seed + 1
    )
    world0 = LabeledDataset(train.features, pair.y0)
    world1 = LabeledDataset(train.features, pair.y1)
    k = max(world0.num_classes, world1.num_classes, test.num_classes)
    dim = k * cfg.d
    profile = sample_slice_profile(dim, cfg.slices, cfg.master_seed + 2)
    hyper = SgdHyper(
        iterations=cfg.iterations, clip=cfg.clip, batch=cfg.batch, lipschitz=cfg.lr
    )
    sub = SubsamplingSpec(scheme=cfg.scheme, population=cfg.n, batch=cfg.batch)

    k_cap = min(cfg.batch, pair.edit_count)
    _, _, k2 = hypergeometric_k2(cfg.n, pair.edit_count, cfg.batch)
    lips = np.full(cfg.slices, cfg.lr)
    if cfg.mode.startswith("sa"):
        h = sa_huc_from_k2(k2, cfg.batch, cfg.clip, lips)
    else:
        h = huc_from_cap(k_cap, cfg.batch, cfg.clip, lips)
    ledger = np.tile(h, (cfg.iterations, 1))

    zero_noise = NoiseSpec(sigma2=0.0, dim=dim)
    # group means over several noiseless reference runs: the attacker's
    # per-world expected release, free of single-run subsampling noise
    refs = []
    for world in (world0, world1):
        finals = [
            _flat(run_sgd(world, hyper, sub, zero_noise, cfg.master_seed + 10 + r).final)
            for r in range(cfg.reference_runs)
        ]
        refs.append(np.mean(finals, axis=0))
    group_means = np.stack(refs)

    rows = []
    shift_violations = 0
    max_shift_ratio = 0.0
    test_accs = []
    mean_l2 = []
    for j, eps in enumerate(sorted(epsilons)):
        noise = sigma_for_budget(ledger, profile, cfg.alpha, float(eps), cfg.mode)
        traj = run_sgd(
            world0, hyper, sub, noise, cfg.master_seed + 10, counterfactual_labels=pair.y1
        )
        bound = 2.0 * cfg.lr * cfg.clip * traj.k_realized / cfg.batch
        over = traj.shift_norms > bound + 1e-12
        shift_violations += int(np.sum(over))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(bound > 0, traj.shift_norms / np.maximum(bound, 1e-300), 0.0)
        max_shift_ratio = max(max_shift_ratio, float(ratios.max()))

        twin = run_sgd(world0, hyper, sub, zero_noise, cfg.master_seed + 10)
        err = _flat(traj.final) - _flat(twin.final)
        mean_l2.append(float(np.linalg.norm(err)))
        acc, _, member_losses = evaluate(traj, world0)
        test_acc, _, nonmember_losses = evaluate(traj, test)
        test_accs.append(test_acc)
        auc = loss_threshold_mia(member_losses, nonmember_losses)

        eff_var = noise.sigma2 * cfg.lr**2 * cfg.iterations
        spec_attack = AttackSpec(
            group_means=group_means,
            prior=np.array([0.5, 0.5]),
            sigma2=max(eff_var, 1e-300),
        )
        rng = rng_stream(cfg.master_seed, 0x44A, j)
        truth = rng.integers(0, 2, size=cfg.attack_trials)
        outputs = np.empty((cfg.attack_trials, dim))
        for i, w in enumerate(truth):
            world = world0 if w == 0 else world1
            t = run_sgd(
                world, hyper, sub, noise, int(rng.integers(2**62))
            )
            outputs[i] = _flat(t.final)
        report = attack_metrics(
            map_attack(outputs, spec_attack), truth, spec_attack.prior
        )

        rows.append(
            SweepRow(
                epsilon=float(eps),
                mode=cfg.mode,
                mse=float(np.mean(err**2)),
                mae=float(np.mean(np.abs(err))),
                attack_acc=report.accuracy,
                advantage=report.advantage,
                auc=auc,
                sigma=noise.sigma,
            )
        )

    info = {
        "kind": "sgd",
        "config": asdict(cfg),
        "edit_count": pair.edit_count,
        "k_cap": k_cap,
        "k2": k2,
        "shift_violations": shift_violations,
        "max_shift_ratio": max_shift_ratio,
        "test_accuracy": test_accs,
        "mean_l2": mean_l2,
        "test_acc_violations": monotone_violations(test_accs, "nondecreasing"),
        "auc_violations": monotone_violations(
            [r.auc for r in rows], "nondecreasing"
        ),
    }
    info.update(_trends(rows))
    return rows, info
