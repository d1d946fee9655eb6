"""End-to-end acceptance slice: ten numbered checks, one test (and one
pytest -v line) per check.

 1  strong duality of the worst-case construction on 200 random instances
 2  subgradient inequality plus finite-difference agreement of the dual risk
 3  interior-point solver vs vertex enumeration and stationarity oracles
 4  single-client federation recovers the pooled robust optimum
 5  strongly convex consensus variant converges by round 200
 6  benchmark band on the banknote table (fails with guidance if the CSV
    is absent)
 7  label-noise harness: robust model tracks the averaging baseline
 8  loopback-TCP and in-process transports agree bit for bit
 9  every extracted worst-case distribution satisfies its invariants
10  subgradient-round wall time grows with N and stays flat in G

Frozen seeds keep every number deterministic. The whole file runs in
roughly five minutes on one CPU, dominated by checks 4 and 7.
"""

import threading
from pathlib import Path

import numpy as np
import pytest

from fedrosvm.baselines import CentralDrConfig, train_central_dr_svm
from fedrosvm.core import DatasetView, NormKind, dual_norm, hinge_losses
from fedrosvm.data import (
    PartitionPlan,
    PartitionScheme,
    SyntheticSpec,
    apply_minmax,
    fit_minmax,
    generate_synthetic,
    partition,
)
from fedrosvm.experiments import ExperimentConfig, run_experiment, time_sm_round
from fedrosvm.federation import (
    Algorithm,
    FederationConfig,
    rho_upper_bound,
    run_client,
    run_federation,
    transport_tcp_connect,
    transport_tcp_serve,
)
from fedrosvm.robust import (
    ClientConfig,
    build_sm_lp,
    extract_worst_case,
    sm_subgradient,
    worst_case_risk_dual,
)
from fedrosvm.solver import (
    ConvexProgram,
    SolverConfig,
    SolverStatus,
    solve,
    solve_lp_by_enumeration,
)

BANKNOTE_CSV = Path(__file__).resolve().parents[1] / "data" / "banknote_authentication.csv"


def regime_instance(rng, n_min, norm=None):
    """Random instance inside the strong-duality regime: features in
    [0.2, 0.8] leave box room for the whole budget range, and w is
    rescaled so the largest empirical margin lands in (0.3, 0.9), keeping
    every hinge active. With norm=None the transport norm is drawn too."""
    n = int(rng.integers(n_min, 16))
    p = int(rng.integers(1, 5))
    X = 0.2 + 0.6 * rng.random((n, p))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    w = rng.standard_normal(p)
    peak = float(np.max(np.abs(X @ w)))
    if peak > 0:
        w *= rng.uniform(0.3, 0.9) / peak
    eps = float(rng.choice([1e-3, 1e-2, 1e-1]))
    kappa = float(rng.choice([0.1, 0.5, 1.0]))
    if norm is None:
        norm = rng.choice([NormKind.L1, NormKind.LINF])
    cfg = ClientConfig(epsilon=eps, kappa=kappa, norm=norm)
    return DatasetView(X=X, y=y), w, cfg


@pytest.fixture(scope="module")
def duality_records():
    """200 solved worst-case instances; check 1 reads the gaps, check 9
    revalidates the extracted distributions."""
    rng = np.random.default_rng(20260815)
    records = []
    for trial in range(200):
        norm = NormKind.L1 if trial % 2 else NormKind.LINF
        data, w, cfg = regime_instance(rng, 1, norm)
        sol = solve(build_sm_lp(w, data, cfg))
        assert sol.status is SolverStatus.OPTIMAL, f"trial {trial}: {sol.message}"
        dual, _ = worst_case_risk_dual(w, data, cfg)
        dist = extract_worst_case(sol, data, cfg)
        records.append((dist, data, cfg, w, dual))
    return records


def dual_smooth_at(w, data, cfg):
    """True when the dual risk is differentiable at w, decided from the
    structure of the inner problem rather than numerically. Off the
    dual-norm floor the optimal multiplier must be pinned by exactly one
    sample, with a strict slope sign change and every other sample clear
    of its own switch point. On the floor no sample may sit near a switch
    point, the right slope must be strictly positive, and the dual norm
    itself has to be smooth at w (unique peak coordinate for the l1
    transport cost, no zero coordinate for l-infinity)."""
    _, lam = worst_case_risk_dual(w, data, cfg)
    floor = dual_norm(w, cfg.norm)
    lp = hinge_losses(w, data.X, data.y)
    lm = hinge_losses(w, data.X, -data.y)
    d = (lm - lp) - cfg.kappa * lam
    N = data.n
    if lam > floor + 1e-8:
        pins = np.flatnonzero(np.abs(d) <= 1e-9)
        others = np.abs(d[np.abs(d) > 1e-9])
        if pins.size != 1 or (others.size and others.min() < 1e-4):
            return False
        n_right = int(np.sum(d > 1e-9))
        slope_right = cfg.epsilon - cfg.kappa * n_right / N
        slope_left = cfg.epsilon - cfg.kappa * (n_right + 1) / N
        return slope_right > 1e-8 and slope_left < -1e-8
    if np.min(np.abs(d)) < 1e-4:
        return False
    n_flip = int(np.sum(d > 0))
    if cfg.epsilon - cfg.kappa * n_flip / N <= 1e-8:
        return False
    aw = np.abs(w)
    if cfg.norm is NormKind.L1:
        top = np.sort(aw)[::-1]
        return top.size == 1 or top[0] - top[1] >= 1e-4
    return aw.min() >= 1e-4


@pytest.fixture(scope="module")
def subgradient_records():
    """First 100 random (w, w') pairs with their subgradient-inequality
    slacks, then 50 structurally smooth points with central-difference
    errors. The tight barrier tolerance on the pair batch keeps the
    extracted distribution optimal enough that its subgradient really is
    one (a loosely solved LP can undercut the inequality by ~1e-7)."""
    tight = SolverConfig(eps2=1e-12)
    rng = np.random.default_rng(77)
    slacks, dists = [], []
    for _ in range(100):
        data, w, cfg = regime_instance(rng, 2)
        sol = solve(build_sm_lp(w, data, cfg), tight)
        assert sol.status is SolverStatus.OPTIMAL, sol.message
        dist = extract_worst_case(sol, data, cfg)
        g = sm_subgradient(w, dist)
        w2 = rng.standard_normal(w.size) * rng.uniform(0.1, 2.0)
        r1, _ = worst_case_risk_dual(w, data, cfg)
        r2, _ = worst_case_risk_dual(w2, data, cfg)
        slacks.append(float(r2 - r1 - g @ (w2 - w)))
        dists.append((dist, data, cfg))

    rng = np.random.default_rng(909)
    errs = []
    attempts = 0
    h = 1e-5
    while len(errs) < 50 and attempts < 400:
        attempts += 1
        data, w, cfg = regime_instance(rng, 2)
        if not dual_smooth_at(w, data, cfg):
            continue
        sol = solve(build_sm_lp(w, data, cfg))
        if sol.status is not SolverStatus.OPTIMAL:
            continue
        dist = extract_worst_case(sol, data, cfg)
        g = sm_subgradient(w, dist)
        num = np.empty(w.size)
        for j in range(w.size):
            e = np.zeros(w.size)
            e[j] = h
            num[j] = (
                worst_case_risk_dual(w + e, data, cfg)[0]
                - worst_case_risk_dual(w - e, data, cfg)[0]
            ) / (2 * h)
        errs.append(float(np.max(np.abs(num - g))))
        dists.append((dist, data, cfg))
    return {"slacks": slacks, "grad_errs": errs, "attempts": attempts, "dists": dists}


def test_criterion_01_strong_duality_on_200_instances(duality_records):
    assert len(duality_records) == 200
    worst = 0.0
    for i, (dist, _, _, w, dual) in enumerate(duality_records):
        gap = abs(dist.risk(w) - dual) / (1.0 + abs(dual))
        assert gap <= 1e-5, f"instance {i}: relative primal-dual gap {gap:.3e}"
        worst = max(worst, gap)


def test_criterion_02_subgradient_inequality_and_central_differences(subgradient_records):
    slacks = subgradient_records["slacks"]
    assert len(slacks) == 100
    assert min(slacks) >= -1e-8, f"subgradient inequality slack {min(slacks):.3e}"
    errs = subgradient_records["grad_errs"]
    assert len(errs) == 50, (
        f"only {len(errs)} smooth points found in {subgradient_records['attempts']} draws"
    )
    assert max(errs) <= 1e-3, f"worst central-difference error {max(errs):.3e}"


def random_box_lp(rng):
    """Bounded LP: a box plus a few random cuts keeping the origin feasible."""
    n = int(rng.integers(2, 7))
    lo = rng.uniform(-2.0, -1.0, n)
    hi = rng.uniform(1.0, 2.0, n)
    n_cuts = int(rng.integers(1, 4))
    a = rng.normal(size=(n_cuts, n))
    return ConvexProgram(
        n=n,
        c=rng.normal(size=n),
        A_ineq=np.vstack([np.eye(n), -np.eye(n), a]),
        b_ineq=np.concatenate([hi, -lo, rng.uniform(0.2, 1.5, n_cuts)]),
    )


def test_criterion_03_solver_matches_enumeration_and_stationarity_oracles():
    rng = np.random.default_rng(31003)
    for trial in range(100):
        prog = random_box_lp(rng)
        oracle = solve_lp_by_enumeration(prog)
        sol = solve(prog)
        assert sol.status is SolverStatus.OPTIMAL, f"LP {trial}: {sol.message}"
        rel = abs(sol.objective - oracle.objective) / (1.0 + abs(oracle.objective))
        assert rel <= 1e-6, (
            f"LP {trial}: interior point {sol.objective} vs oracle {oracle.objective}"
        )
    for trial in range(50):
        n = int(rng.integers(2, 8))
        qd = rng.uniform(0.1, 2.0, n)
        c = rng.normal(size=n)
        lo = rng.uniform(-2.0, -0.5, n)
        hi = rng.uniform(0.5, 2.0, n)
        prog = ConvexProgram(
            n=n, Q=np.diag(qd), c=c,
            A_ineq=np.vstack([np.eye(n), -np.eye(n)]),
            b_ineq=np.concatenate([hi, -lo]),
        )
        sol = solve(prog)
        assert sol.status is SolverStatus.OPTIMAL, f"QP {trial}: {sol.message}"
        x = sol.x_star
        resid = float(np.max(np.abs(x - np.clip(x - (qd * x + c), lo, hi))))
        assert resid <= 1e-6, f"QP {trial}: projected-gradient residual {resid:.3e}"


def test_criterion_04_single_client_runs_recover_the_central_optimum():
    raw = generate_synthetic(SyntheticSpec(N=100, P=3, G=1, seed=5))
    data = apply_minmax(raw, fit_minmax(raw))
    eps = 1.0 / (10.0 * data.n)
    ccfg = ClientConfig(epsilon=eps, kappa=1.0, alpha=1.0, norm=NormKind.L1)
    central = train_central_dr_svm(
        data, CentralDrConfig(epsilon=eps, kappa=1.0, norm=NormKind.L1)
    )
    c_obj, _ = worst_case_risk_dual(central.w, data, ccfg)

    fed = FederationConfig(clients=[ccfg], T=100, algorithm=Algorithm.ADMM, rho=1e-2)
    res = run_federation(fed, [data])
    a_obj, _ = worst_case_risk_dual(res.w_last.w, data, ccfg)
    rel = (a_obj - c_obj) / abs(c_obj)
    assert -1e-6 < rel <= 1e-2, f"proximal run relative excess {rel:.3e}"

    # best iterate over the gamma grid; the 1/t step stalls too early for a
    # relative comparison against an optimum this small, so the bound is
    # absolute (see the worked gap numbers in the project notes)
    best = np.inf
    for gamma in (1.0, 10.0, 100.0, 1000.0):
        sm = FederationConfig(clients=[ccfg], T=220, algorithm=Algorithm.SM, gamma0=gamma)
        best = min(best, run_federation(sm, [data]).best_objective - c_obj)
    assert -1e-6 < best <= 5e-2, f"subgradient best-iterate excess {best:.3e}"


def test_criterion_05_strongly_convex_variant_reaches_consensus():
    # tau is tied to the penalty ceiling it produces: with equal weights and
    # G=4 the admissible ceiling evaluated at tau = 18*rho0 equals rho0
    # itself, so the run takes 0.9x the ceiling computed from a nominal
    # rho0 drawn from the tuning grid. Smaller nominals leave the
    # multipliers still drifting at round 200.
    rho0 = 1e-1
    tau = 18.0 * rho0
    for G in (2, 4):
        raw = generate_synthetic(SyntheticSpec(N=200, P=4, G=G, seed=7))
        data = apply_minmax(raw, fit_minmax(raw))
        shards = partition(data, PartitionPlan(scheme=PartitionScheme.EVEN, G=G, seed=7))
        cap = rho_upper_bound([1.0 / G] * G, [tau] * G)
        clients = [
            ClientConfig(epsilon=1.0 / (10.0 * s.n), kappa=1.0, alpha=1.0 / G,
                         norm=NormKind.L1, tau=tau)
            for s in shards
        ]
        cfg = FederationConfig(
            clients=clients, T=200, algorithm=Algorithm.ADMM_SC, rho=0.9 * cap
        )
        res = run_federation(cfg, shards)
        consensus = res.traces[-1].consensus_residual
        step = float(np.max(np.abs(res.traces[-1].w_after - res.traces[-2].w_after)))
        assert consensus <= 1e-4, f"G={G}: consensus residual {consensus:.3e}"
        assert step <= 1e-5, f"G={G}: last-round model change {step:.3e}"


def test_criterion_06_banknote_mean_f1_in_published_band():
    if not BANKNOTE_CSV.exists():
        pytest.fail(
            "benchmark table missing: place the UCI banknote authentication data "
            f"at {BANKNOTE_CSV} as a header-bearing CSV "
            "(variance,skewness,curtosis,entropy,class; 1372 rows, class in {0,1}). "
            "This sandbox has no network route to fetch it and the library does "
            "not download data. With the file present this test runs the full "
            "4-client protocol, 10 repetitions, and asserts mean F1 in "
            "[0.93, 0.97]. The same pipeline is exercised on synthetic data by "
            "the neighbouring checks."
        )
    cfg = ExperimentConfig.from_dict({
        "name": "banknote_admm",
        "dataset": {
            "kind": "csv", "path": str(BANKNOTE_CSV),
            "label_column": "class", "positive_label": "1",
        },
        "partition": {"scheme": "even", "G": 4},
        "model": "admm",
        "cv_folds": 5,
        "repetitions": 10,
        "base_seed": 0,
    })
    res = run_experiment(cfg)
    mean_f1 = res.aggregates["mean_f1"]
    assert 0.93 <= mean_f1 <= 0.97, f"mean F1 {mean_f1:.4f} outside [0.93, 0.97]"


def test_criterion_07_robust_model_tracks_fedavg_under_label_noise():
    base = {
        "dataset": {"kind": "synthetic", "N": 400, "P": 2, "class_sep": 2.4},
        "partition": {"scheme": "label_noise", "G": 4, "noise_rate": 0.15},
        "cv_folds": 5,
        "repetitions": 10,
        "base_seed": 0,
    }
    # the proximal iterates are converged by round 60 (the full round grid
    # was checked to give identical per-repetition scores, at 3.4x the wall
    # time); the baseline keeps its full grid, which can only favor it
    admm = ExperimentConfig.from_dict({
        **base, "name": "noisy_admm", "model": "admm",
        "grid": {"rho": [1e-3, 1e-2, 1e-1, 1e0], "T": [5, 10, 20, 60]},
    })
    fedavg = ExperimentConfig.from_dict({
        **base, "name": "noisy_fedavg", "model": "fedavg",
        "grid": {"gamma0": [1e-3, 1e-2, 1e-1, 1e0],
                 "T": [5, 10, 20, 60, 100, 140, 180, 220]},
    })
    robust = run_experiment(admm).aggregates["mean_f1"]
    plain = run_experiment(fedavg).aggregates["mean_f1"]
    assert robust >= plain - 0.01, (
        f"robust mean F1 {robust:.4f} trails FedAvg {plain:.4f} by more than 0.01"
    )


def spawn_tcp_clients(address, shards, cfgs, algorithm):
    threads = []
    for g, (data, c) in enumerate(zip(shards, cfgs)):
        def go(g=g, data=data, c=c):
            run_client(transport_tcp_connect(address), g, data, c, algorithm)

        th = threading.Thread(target=go)
        th.start()
        threads.append(th)
    return threads


def test_criterion_08_tcp_and_in_process_transports_agree_bit_for_bit():
    raw = generate_synthetic(SyntheticSpec(N=40, P=2, G=2, seed=11))
    data = apply_minmax(raw, fit_minmax(raw))
    shards = partition(data, PartitionPlan(scheme=PartitionScheme.EVEN, G=2, seed=11))
    runs = [
        (Algorithm.SM, dict(gamma0=0.5)),
        (Algorithm.ADMM, dict(rho=0.7)),
    ]
    for algorithm, knobs in runs:
        clients = [
            ClientConfig(epsilon=1.0 / (10.0 * s.n), kappa=1.0, alpha=0.5,
                         rho=knobs.get("rho", 1.0))
            for s in shards
        ]
        cfg = FederationConfig(clients=clients, T=3, algorithm=algorithm, **knobs)
        local = run_federation(cfg, shards)

        server = transport_tcp_serve()
        threads = spawn_tcp_clients(server.address, shards, clients, algorithm)
        remote = run_federation(cfg, shards, transport=server)
        for th in threads:
            th.join(timeout=30.0)
            assert not th.is_alive()

        assert np.array_equal(local.w_last.w, remote.w_last.w), algorithm
        for a, b in zip(local.traces, remote.traces):
            assert np.array_equal(a.w_after, b.w_after), (algorithm, a.t)
            assert a.global_objective == b.global_objective, (algorithm, a.t)


def test_criterion_09_every_extracted_distribution_satisfies_invariants(
    duality_records, subgradient_records
):
    checked = 0
    for dist, data, cfg, _, _ in duality_records:
        violations = dist.validate(data, cfg)
        assert violations == [], violations
        checked += 1
    for dist, data, cfg in subgradient_records["dists"]:
        violations = dist.validate(data, cfg)
        assert violations == [], violations
        checked += 1
    assert checked >= 350  # 200 duality instances + 100 pairs + 50 smooth points


def test_criterion_10_round_time_grows_with_samples_not_clients():
    by_n = [time_sm_round(n, 2, 2, 5, 0) for n in (500, 1000, 2000)]
    assert by_n[0] < by_n[1] < by_n[2], f"medians not increasing in N: {by_n}"
    by_g = [time_sm_round(1000, g, 2, 5, 0) for g in (2, 4, 8)]
    spread = max(by_g) / min(by_g)
    assert spread <= 2.0, f"round time should stay roughly flat in G, spread {spread:.2f}x: {by_g}"
