"""Command-line harness: dataset generation, training runs, diagnostics,
bound-verification suites, and plot-ready output emission.

Subcommands: generate, train, diagnose, verify <suite>, plotdata.
Exit codes: 0 pass, 1 suite failure, 2 usage/config error, 3 numeric failure.

File-writing commands refuse to overwrite existing outputs unless --force is
given; with identical inputs plus --force every command is idempotent.  The
environment variable TWOLAYER_OPT_THREADS caps how many repetitions of a
training command run in parallel.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import diagnostics, model, optimizer
from .activations import ACTIVATION_NAMES, builtin_activation
from .errors import ConfigError, FormatError, IoError, NumericsError
from .optimizer import TRAJECTORY_COLUMNS, RunConfig, TrajectoryRecord

SUITES = ("gradcheck", "rank", "lipschitz", "theorem1", "theorem2", "certify")


# ----------------------------------------------------------------- file io

def _ensure_writable(paths, force: bool):
    clashes = [str(p) for p in paths if Path(p).exists()]
    if clashes and not force:
        raise ConfigError(
            f"refusing to overwrite existing output ({', '.join(clashes)}); "
            "pass --force to allow")


def write_trajectory_csv(path, record: TrajectoryRecord) -> None:
    cols = record.columns()
    try:
        with open(path, "w") as fh:
            fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
            for i in range(len(record)):
                fields = []
                for name in TRAJECTORY_COLUMNS:
                    val = cols[name][i]
                    fields.append(str(int(val)) if name in ("k", "inner_steps")
                                  else "%.17g" % val)
                fh.write(",".join(fields) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write trajectory to {path}: {exc}") from exc


def read_trajectory_csv(path) -> dict:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read trajectory from {path}: {exc}") from exc
    if not lines or lines[0].split(",") != list(TRAJECTORY_COLUMNS):
        raise FormatError(f"{path} does not look like a trajectory CSV", line=1)
    data = {name: [] for name in TRAJECTORY_COLUMNS}
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(TRAJECTORY_COLUMNS):
            raise FormatError(
                f"expected {len(TRAJECTORY_COLUMNS)} columns, found {len(fields)}",
                line=i)
        try:
            for name, tok in zip(TRAJECTORY_COLUMNS, fields):
                data[name].append(float(tok))
        except ValueError:
            raise FormatError("non-numeric token", line=i) from None
    return {name: np.array(vals) for name, vals in data.items()}


# ------------------------------------------------------------ spec loading

def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


@dataclass(frozen=True)
class ExperimentSpec:
    """JSON experiment description; CLI flags override individual fields.

    dataset is either {"path": <csv>} or an inline recipe
    {"d", "N", "dist", "seed", "teacher_seed", "noise_std"}.
    """

    name: str = "run"
    dataset: dict = field(default_factory=dict)
    activation: str = "sigmoid"
    run: dict = field(default_factory=dict)
    repetitions: int = 1
    out_dir: str = "."
    suites: tuple = ()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        spec = cls(
            name=data.get("name", "run"),
            dataset=dict(data.get("dataset", {})),
            activation=data.get("activation", "sigmoid"),
            run=dict(data.get("run", {})),
            repetitions=int(data.get("repetitions", 1)),
            out_dir=data.get("out_dir", "."),
            suites=tuple(data.get("suites", ())),
        )
        if spec.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {spec.repetitions}")
        path = spec.dataset.get("path")
        if path and not Path(path).exists():
            raise ConfigError(f"referenced dataset {path} does not exist")
        for suite in spec.suites:
            if suite not in SUITES:
                raise ConfigError(f"unknown suite {suite!r} in config")
        return spec


def _load_spec(args) -> ExperimentSpec:
    cfg = _load_config_file(args.config) if args.config else {}
    return ExperimentSpec.from_dict(cfg)


def _activation_name(args, spec: ExperimentSpec) -> str:
    return args.activation or spec.activation


def _dataset_from_args(args, spec: ExperimentSpec, activation: str):
    """Dataset from --data path, the spec's dataset entry, or inline flags."""
    recipe = spec.dataset
    path = args.data or recipe.get("path")
    if path:
        return ds_mod.load(path), str(path)
    d = args.d if args.d is not None else recipe.get("d")
    N = args.n_samples if args.n_samples is not None else recipe.get("N")
    if d is None or N is None:
        raise ConfigError("no dataset: pass --data or (--d and --n-samples)")
    dist = args.dist or recipe.get("dist", "uniform_cube")
    seed = args.data_seed if args.data_seed is not None else recipe.get("seed", 0)
    teacher_seed = (args.teacher_seed if args.teacher_seed is not None
                    else recipe.get("teacher_seed"))
    noise = (args.noise_std if args.noise_std is not None
             else recipe.get("noise_std", 0.0))
    ds = ds_mod.make_realizable(int(d), int(N), dist, int(seed),
                                activation=activation,
                                teacher_seed=teacher_seed, noise_std=float(noise))
    return ds, f"inline(d={d}, N={N}, dist={dist}, seed={seed})"


def _run_config_from_args(args, spec: ExperimentSpec) -> RunConfig:
    run_cfg = dict(spec.run)
    overrides = {
        "N_o": args.n_outer, "N_i": args.n_inner, "R": args.r_ball,
        "sigma": args.sigma, "beta": args.beta, "gamma": args.gamma,
        "seed": args.seed,   # None when the flag was omitted
    }
    for key, val in overrides.items():
        if val is not None:
            run_cfg[key] = val
    if args.gamma is not None:
        run_cfg["gamma_policy"] = "fixed"
    if args.beta is not None:
        run_cfg["beta_policy"] = "fixed"
    if args.theorem2_preset:
        run_cfg["theorem2_preset"] = True
    if args.early_exit:
        run_cfg["early_exit"] = True
    init = dict(run_cfg.get("init", {}))
    if args.w_scale is not None:
        init["W_scale"] = args.w_scale
    if args.theta_scale is not None:
        init["theta_scale"] = args.theta_scale
    if init:
        run_cfg["init"] = init
    run_cfg.setdefault("N_o", 50)
    run_cfg.setdefault("N_i", 20)
    run_cfg.setdefault("seed", 0)
    return RunConfig.from_dict(run_cfg)


# ------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    spec = _load_spec(args)
    recipe = spec.dataset
    d = args.d if args.d is not None else recipe.get("d")
    N = args.n_samples if args.n_samples is not None else recipe.get("N")
    if d is None or N is None:
        raise ConfigError("generate needs --d and --n-samples")
    d, N = int(d), int(N)
    if args.warn_overparam and N > d * d:
        print(f"warning: N={N} exceeds d^2={d * d}; the full-column-rank "
              "certificate needs the number of samples to stay below the "
              "number of parameters (N <= n*d)", file=sys.stderr)
    dist = args.dist or recipe.get("dist", "uniform_cube")
    seed = args.data_seed if args.data_seed is not None else (args.seed or 0)
    ds = ds_mod.make_realizable(
        d, N, dist, int(seed), activation=_activation_name(args, spec),
        teacher_seed=args.teacher_seed,
        noise_std=args.noise_std if args.noise_std is not None else 0.0)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.name}.csv"
    _ensure_writable([path, path.with_suffix(".meta.json")], args.force)
    ds_mod.save(ds, path)
    print(f"wrote {path} and {path.with_suffix('.meta.json')} "
          f"(d={d}, N={N}, dist={dist})")
    return 0


def _train_one(name, rep, base_seed, activation, ds, cfg, out_dir):
    repcfg = RunConfig.from_dict({**cfg.to_dict(), "seed": base_seed + rep})
    act = builtin_activation(activation)
    t0 = time.perf_counter()
    params, record = optimizer.run(act, ds, repcfg)
    wall = time.perf_counter() - t0
    traj_path = out_dir / f"{name}_rep{rep}.trajectory.csv"
    write_trajectory_csv(traj_path, record)
    manifest = {
        "name": name, "rep": rep, "activation": activation,
        "config": repcfg.to_dict(), "derived": record.derived,
        "wall_time_s": wall,
        "final_f": float(record.f[-1]),
        "min_grad_norm": float(record.grad_norm.min()),
        "min_sigma_min_D": float(record.sigma_min_d.min()),
    }
    with open(out_dir / f"{name}_rep{rep}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def cmd_train(args) -> int:
    spec = _load_spec(args)
    name = args.name or spec.name
    reps = args.reps if args.reps is not None else spec.repetitions
    if reps < 1:
        raise ConfigError(f"repetitions must be >= 1, got {reps}")
    activation = _activation_name(args, spec)
    ds, ds_desc = _dataset_from_args(args, spec, activation)
    cfg = _run_config_from_args(args, spec)
    out_dir = Path(args.out or spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for rep in range(reps):
        outputs += [out_dir / f"{name}_rep{rep}.trajectory.csv",
                    out_dir / f"{name}_rep{rep}.manifest.json"]
    _ensure_writable(outputs, args.force)

    env_cap = os.environ.get("TWOLAYER_OPT_THREADS", "")
    workers = min(reps, int(env_cap)) if env_cap.strip() else min(reps, os.cpu_count() or 1)
    workers = max(1, workers)
    if workers == 1:
        manifests = [_train_one(name, rep, cfg.seed, activation, ds, cfg, out_dir)
                     for rep in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_train_one, name, rep, cfg.seed,
                                   activation, ds, cfg, out_dir)
                       for rep in range(reps)]
            manifests = [f.result() for f in futures]

    print(f"# {name}: {reps} repetition(s), dataset {ds_desc}")
    print(f"{'rep':>4} {'final_f':>14} {'min_grad_norm':>14} {'min_sigma_min_D':>16}")
    for m in manifests:
        print(f"{m['rep']:>4} {m['final_f']:>14.6e} "
              f"{m['min_grad_norm']:>14.6e} {m['min_sigma_min_D']:>16.6e}")
    return 0


def cmd_diagnose(args) -> int:
    spec = _load_spec(args)
    data = args.data or spec.dataset.get("path")
    if not data:
        raise ConfigError("diagnose needs --data")
    ds = ds_mod.load(data)
    act = builtin_activation(_activation_name(args, spec))
    if args.params:
        params, _ = model.load_params(args.params)
    else:
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        d = ds.dim
        params = model.NetworkParams(
            rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)), rng.normal(size=d))

    w_rank = diagnostics.svd_rank(params.W, args.rank_tol)
    coll = diagnostics.collection_rank(act, params.W, ds.inputs, args.rank_tol)
    lips = diagnostics.lipschitz_estimates(params, act, ds)
    cert = diagnostics.certify(params, act, ds, args.rank_tol)
    report = {
        "activation": act.name,
        "rank_tol": args.rank_tol,
        "W_rank": w_rank.to_dict(),
        "collection_rank": coll.to_dict(),
        "lipschitz": lips.to_dict(),
        "certificate": cert.to_dict(),
    }

    print(f"{'quantity':<28} {'value'}")
    print(f"{'rank(W)':<28} {w_rank.numerical_rank} / {min(w_rank.matrix_dims)}")
    print(f"{'sigma_min(W)':<28} {w_rank.sigma_min:.6e}")
    print(f"{'rank(collection)':<28} {coll.numerical_rank} / {min(coll.matrix_dims)}")
    print(f"{'sigma_min(collection)':<28} {coll.sigma_min:.6e}")
    print(f"{'L_W_bound':<28} {lips.l_w_bound:.6e}")
    print(f"{'L_theta_exact':<28} {lips.l_theta_exact:.6e}")
    if lips.l_theta_bound_analytic is not None:
        print(f"{'L_theta_analytic':<28} {lips.l_theta_bound_analytic:.6e}")
    print(f"{'grad_norm_F':<28} {cert.grad_norm:.6e}")
    print(f"{'sigma_min(D)':<28} {cert.sigma_min_D:.6e}")
    print(f"{'residual_norm':<28} {cert.residual_norm:.6e}")
    print(f"{'certified_bound':<28} {cert.certified_bound:.6e}")
    print(f"{'verdict':<28} {cert.verdict}")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{args.name or 'diagnose'}.json"
        _ensure_writable([path], args.force)
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


# -------------------------------------------------------- verify suites

def _check(name, measured, threshold, comparison, ok):
    return {"check": name, "measured": measured, "threshold": threshold,
            "comparison": comparison, "pass": bool(ok)}


def _fd_grad_check(params, act, ds, step=1e-5):
    """Max relative error of the analytic gradients against central
    finite differences of the loss."""
    def fd(get, setp, shape):
        g = np.zeros(shape)
        it = np.nditer(g, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            for sign in (+1.0, -1.0):
                pert = get().copy()
                pert[idx] += sign * step
                g[idx] += sign * model.loss(setp(pert), act, ds)
        return g / (2.0 * step)

    gw = model.grad_W(params, act, ds)
    gt = model.grad_theta(params, act, ds)
    fw = fd(lambda: params.W, lambda W: model.NetworkParams(W, params.theta),
            params.W.shape)
    ft = fd(lambda: params.theta, lambda t: model.NetworkParams(params.W, t),
            params.theta.shape)
    err_w = np.linalg.norm(fw - gw) / max(np.linalg.norm(gw), 1e-12)
    err_t = np.linalg.norm(ft - gt) / max(np.linalg.norm(gt), 1e-12)
    return max(float(err_w), float(err_t))


def suite_gradcheck(activation: str, seed: int = 0, instances: int = 5) -> list:
    act = builtin_activation(activation)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d = int(rng.integers(2, 6))
        n = int(rng.integers(1, d + 1))
        N = int(rng.integers(2, 26))
        params = model.NetworkParams(rng.normal(size=(n, d)), rng.normal(size=n))
        ds = ds_mod.Dataset(rng.uniform(-1, 1, size=(N, d)), rng.normal(size=N),
                            ds_mod.Provenance("uniform_cube", seed))
        worst = max(worst, _fd_grad_check(params, act, ds))
    return [_check("max_fd_relative_error", worst, 1e-6, "<=", worst <= 1e-6)]


def suite_rank(activation: str, seed: int = 0, seeds: int = 25,
               rank_tol: float = 1e-10) -> list:
    act = builtin_activation(activation)
    checks = []
    expect_full = act.claimed_c1
    for d in (2, 3):
        N = d * d
        full = 0
        max_rank = 0
        for s in range(seeds):
            rng = np.random.default_rng((seed + 1) * 10_000 + 97 * d + s)
            inputs = rng.uniform(-1.0, 1.0, size=(N, d))
            W = rng.normal(size=(d, d))
            rep = diagnostics.collection_rank(act, W, inputs, rank_tol)
            max_rank = max(max_rank, rep.numerical_rank)
            full += rep.is_full_rank()
        if expect_full:
            frac = full / seeds
            checks.append(_check(f"full_rank_fraction_d{d}", frac, 1.0, ">=",
                                 frac >= 1.0))
        else:
            # negative control: deficiency must be detected every time
            checks.append(_check(f"control_max_rank_d{d}", max_rank, N, "<",
                                 max_rank < N))
    return checks


def suite_lipschitz(activation: str, seed: int = 0, samples: int = 200) -> list:
    act = builtin_activation(activation)
    rng = np.random.default_rng(seed)
    viol_w = viol_t = viol_order = 0
    for _ in range(samples):
        d = int(rng.integers(2, 5))
        n = int(rng.integers(1, d + 1))
        N = int(rng.integers(2, 17))
        U = rng.uniform(-1, 1, size=(N, d))
        v = rng.normal(size=N)
        ds = ds_mod.Dataset(U, v, ds_mod.Provenance("uniform_cube", seed))
        theta = rng.normal(size=n)
        W1 = rng.normal(size=(n, d))
        W2 = rng.normal(size=(n, d))
        p1 = model.NetworkParams(W1, theta)
        est = diagnostics.lipschitz_estimates(p1, act, ds)
        lhs = np.linalg.norm(model.grad_W(p1, act, ds)
                             - model.grad_W(model.NetworkParams(W2, theta), act, ds))
        if lhs > est.l_w_bound * np.linalg.norm(W1 - W2) * (1 + 1e-9):
            viol_w += 1
        t2 = rng.normal(size=n)
        dgt = np.linalg.norm(model.grad_theta(p1, act, ds)
                             - model.grad_theta(model.NetworkParams(W1, t2), act, ds))
        if dgt > est.l_theta_exact * np.linalg.norm(theta - t2) * (1 + 1e-9):
            viol_t += 1
        if (est.l_theta_bound_analytic is not None
                and est.l_theta_exact > est.l_theta_bound_analytic * (1 + 1e-12)):
            viol_order += 1
    return [
        _check("grad_W_lipschitz_violations", viol_w, 0, "==", viol_w == 0),
        _check("grad_theta_lipschitz_violations", viol_t, 0, "==", viol_t == 0),
        _check("l_theta_ordering_violations", viol_order, 0, "==", viol_order == 0),
    ]


def suite_theorem1(activation: str, seed: int = 0, seeds: int = 200,
                   inner_counts=(10, 50), sigma: float = 1.0) -> list:
    act = builtin_activation(activation)
    rng = np.random.default_rng(seed)
    d, N, R = 3, 9, 4.0
    ds = ds_mod.make_realizable(d, N, seed=seed + 5, activation=activation)
    W = rng.normal(0, 1 / np.sqrt(d), size=(d, d))
    theta0 = rng.normal(size=d)
    theta0 = theta0 / max(1.0, np.linalg.norm(theta0) / (R / 2))
    params = model.NetworkParams(W, theta0)
    theta_star = optimizer.solve_theta_star(params, act, ds, R / 2)
    f_star = model.loss(model.NetworkParams(W, theta_star), act, ds)
    checks = []
    for n_i in inner_counts:
        cfg = RunConfig(n_outer=1, n_inner=n_i, R=R, sigma=sigma)
        gaps = []
        beta = None
        for s in range(seeds):
            theta_av, summary = optimizer.inner_sgd(
                params, act, ds, cfg, np.random.default_rng(1000 + s))
            gaps.append(model.loss(model.NetworkParams(W, theta_av), act, ds) - f_star)
            beta = summary.beta
        dist2 = float(np.sum((theta0 - theta_star) ** 2))
        k0 = dist2 / (n_i * beta) + sigma ** 2 * beta
        ratio = float(np.mean(gaps)) / k0
        checks.append(_check(f"mean_gap_over_K0_Ni{n_i}", ratio, 1.1, "<=",
                             ratio <= 1.1))
    return checks


def suite_theorem2(activation: str, seed: int = 0, seeds: int = 5,
                   outer_counts=(30,)) -> list:
    act = builtin_activation(activation)
    d, N, R = 3, 9, 4.0
    ds = ds_mod.make_realizable(d, N, seed=seed + 5, activation=activation)
    u = act.value_bound
    if u is None:
        raise ConfigError("theorem2 suite needs a bounded activation")
    l_theta_analytic = u * u * d
    checks = []
    for n_o in outer_counts:
        mins, bounds = [], []
        for s in range(seeds):
            cfg = RunConfig(n_outer=n_o, n_inner=1, R=R, theorem2_preset=True,
                            seed=seed * 1000 + s)
            _, rec = optimizer.run(act, ds, cfg)
            mins.append(float(np.min(rec.grad_norm[:n_o] ** 2)))
            L = rec.derived["L_ball"]
            bounds.append(2 * L * (rec.derived["f_init"]
                                   + R * R * (l_theta_analytic + 0.5) + 1) / n_o)
        ratio = float(np.mean(mins) / np.mean(bounds))
        checks.append(_check(f"mean_min_grad_sq_over_bound_No{n_o}", ratio, 1.0,
                             "<=", ratio <= 1.0))
    return checks


def suite_certify(activation: str, seed: int = 0, n_outer: int = 150,
                  rank_tol: float = 1e-10) -> list:
    act = builtin_activation(activation)
    ds = ds_mod.make_realizable(3, 9, seed=seed + 5, activation=activation)
    cfg = RunConfig(n_outer=n_outer, n_inner=20, R=4.0, sigma=0.0, seed=seed)
    params, _ = optimizer.run(act, ds, cfg)
    cert = diagnostics.certify(params, act, ds, rank_tol)
    ratio = (cert.residual_norm / cert.certified_bound
             if np.isfinite(cert.certified_bound) and cert.certified_bound > 0
             else float("inf"))
    return [
        _check("residual_over_certified_bound", ratio, 1 + 1e-8, "<=",
               ratio <= 1 + 1e-8),
        _check("sigma_min_D_positive", cert.sigma_min_D, 0.0, ">",
               cert.sigma_min_D > 0.0),
    ]


def cmd_verify(args) -> int:
    spec = _load_spec(args)
    activation = _activation_name(args, spec)
    seed = 0 if args.seed is None else args.seed
    runners = {
        "gradcheck": lambda: suite_gradcheck(activation, seed,
                                             args.instances),
        "rank": lambda: suite_rank(activation, seed, args.trials,
                                   args.rank_tol),
        "lipschitz": lambda: suite_lipschitz(activation, seed,
                                             args.trials),
        "theorem1": lambda: suite_theorem1(activation, seed, args.seeds),
        "theorem2": lambda: suite_theorem2(activation, seed, args.seeds),
        "certify": lambda: suite_certify(activation, seed,
                                         rank_tol=args.rank_tol),
    }
    checks = runners[args.suite]()
    verdict = {"suite": args.suite, "activation": activation,
               "checks": checks, "pass": all(c["pass"] for c in checks)}
    print(json.dumps(verdict, indent=2))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"verify_{args.suite}.json"
        _ensure_writable([path], args.force)
        with open(path, "w") as fh:
            json.dump(verdict, fh, indent=2)
            fh.write("\n")
    return 0 if verdict["pass"] else 1


def cmd_plotdata(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise IoError(f"run directory {run_dir} does not exist")
    traj_paths = sorted(run_dir.glob("*.trajectory.csv"))
    if not traj_paths:
        raise IoError(f"no *.trajectory.csv files under {run_dir}")
    runs = [read_trajectory_csv(p) for p in traj_paths]
    n_rows = {len(r["k"]) for r in runs}
    if len(n_rows) != 1:
        raise FormatError(f"trajectories under {run_dir} have differing lengths")
    k = runs[0]["k"]
    metrics = [c for c in TRAJECTORY_COLUMNS if c != "k"]

    out_dir = Path(args.out) if args.out else run_dir / "plotdata"
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [out_dir / f"{m}.dat" for m in metrics] + [out_dir / "combined.csv"]
    _ensure_writable(outputs, args.force)

    multi = len(runs) > 1
    combined_header = ["k"]
    combined_cols = [k]
    for m in metrics:
        stacked = np.vstack([r[m] for r in runs])
        series = stacked.mean(axis=0) if multi else stacked[0]
        with open(out_dir / f"{m}.dat", "w") as fh:
            for ki, vi in zip(k, series):
                fh.write("%d %.17g\n" % (int(ki), vi))
        if multi:
            combined_header += [f"{m}_mean", f"{m}_min", f"{m}_max"]
            combined_cols += [stacked.mean(axis=0), stacked.min(axis=0),
                              stacked.max(axis=0)]
        else:
            combined_header.append(m)
            combined_cols.append(series)
    with open(out_dir / "combined.csv", "w") as fh:
        fh.write(",".join(combined_header) + "\n")
        for i in range(len(k)):
            fh.write(",".join("%.17g" % col[i] for col in combined_cols) + "\n")
    print(f"wrote {len(metrics)} metric files and combined.csv to {out_dir} "
          f"({len(runs)} repetition(s))")
    return 0


# ------------------------------------------------------------------ parser

def _add_common(sp):
    sp.add_argument("--config", help="experiment spec JSON")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--activation", default=None, choices=ACTIVATION_NAMES,
                    help="activation name (default: config value or sigmoid)")
    sp.add_argument("--rank-tol", type=float, default=1e-10)
    sp.add_argument("--force", action="store_true",
                    help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twolayer-opt",
        description="Two-layer network SGD-GD trainer with global-optimality "
                    "certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a teacher-labeled dataset")
    _add_common(gen)
    gen.add_argument("--d", type=int)
    gen.add_argument("--n-samples", type=int)
    gen.add_argument("--dist", choices=ds_mod.DISTRIBUTIONS)
    gen.add_argument("--data-seed", type=int)
    gen.add_argument("--teacher-seed", type=int)
    gen.add_argument("--noise-std", type=float)
    gen.add_argument("--name", default="data")
    gen.add_argument("--warn-overparam", action="store_true")
    gen.set_defaults(func=cmd_generate, out=".")

    tr = sub.add_parser("train", help="run SGD-GD repetitions")
    _add_common(tr)
    tr.add_argument("--data", help="dataset CSV path")
    tr.add_argument("--d", type=int)
    tr.add_argument("--n-samples", type=int)
    tr.add_argument("--dist", choices=ds_mod.DISTRIBUTIONS)
    tr.add_argument("--data-seed", type=int)
    tr.add_argument("--teacher-seed", type=int)
    tr.add_argument("--noise-std", type=float)
    tr.add_argument("--name")
    tr.add_argument("--reps", type=int)
    tr.add_argument("--n-outer", type=int)
    tr.add_argument("--n-inner", type=int)
    tr.add_argument("--r-ball", type=float, help="ball diameter parameter R")
    tr.add_argument("--sigma", type=float)
    tr.add_argument("--beta", type=float)
    tr.add_argument("--gamma", type=float)
    tr.add_argument("--theorem2-preset", action="store_true")
    tr.add_argument("--early-exit", action="store_true")
    tr.add_argument("--w-scale", type=float)
    tr.add_argument("--theta-scale", type=float)
    tr.set_defaults(func=cmd_train)

    di = sub.add_parser("diagnose", help="rank/Lipschitz/certificate report")
    _add_common(di)
    di.add_argument("--data", required=True)
    di.add_argument("--params", help="NetworkParams CSV (see model.save_params)")
    di.add_argument("--name")
    di.set_defaults(func=cmd_diagnose)

    ve = sub.add_parser("verify", help="run a bound-verification suite")
    _add_common(ve)
    ve.add_argument("suite", choices=SUITES)
    ve.add_argument("--seeds", type=int, default=200,
                    help="Monte-Carlo seed count (theorem suites)")
    ve.add_argument("--trials", type=int, default=25,
                    help="trial count (rank/lipschitz suites)")
    ve.add_argument("--instances", type=int, default=5,
                    help="instance count (gradcheck)")
    ve.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plotdata", help="emit plot-ready metric files")
    _add_common(pl)
    pl.add_argument("--run-dir", required=True)
    pl.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ConfigError, IoError, FormatError, ValueError, NameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    console_main()
