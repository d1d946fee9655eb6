"""Client-side distributionally robust operations.

Everything a participant computes against its own data lives here: the
worst-case distribution LP over a Wasserstein ball (with label flips priced
at kappa), extraction of the extremal distribution from the LP solution, the
subgradient of the worst-case risk used by the subgradient-method (SM)
rounds, the closed dual form of the worst-case risk used as the objective
oracle, the proximal QP solved inside ADMM rounds, and the
measure-concentration radius rule.

Conventions used throughout (and relied on by the tests):

* the adversary moves mass from the empirical point (x_i, y_i) to two atoms,
  one keeping the label and one flipping it;
* the kept-label atom carries mass beta_plus_i and sits at
  z_plus_i = x_i - q_plus_i / beta_plus_i, the flipped atom carries
  beta_minus_i and sits at z_minus_i = x_i - q_minus_i / beta_minus_i;
* transport is paid as ||z - x|| (feature norm from the config) plus kappa
  per unit of flipped mass, and the average over samples must stay within
  epsilon.

The LP objective is the affine surrogate of the hinge (each atom pays
1 -+ y<w, z> without the max against zero), so the LP value lower-bounds
the worst-case risk; re-evaluating true hinges on the extracted atoms
closes the gap whenever the extremal configuration keeps every hinge
active, which is the regime the duality tests sample from.

The LP requires features in the unit box; the box constraints on q are what
keep the atoms inside the support, so feeding unnormalized data would
silently change the geometry. We refuse instead.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .core import (
    DatasetView,
    NormKind,
    dual_norm,
    feature_norm,
    hinge_losses,
)
from .solver import ConvexProgram, SolverConfig, SolverStatus, solve

# Mass below this is treated as a degenerate (empty) atom when extracting the
# worst-case distribution; the division by beta is not meaningful there.
MASS_DROP_TOL = 1e-9

# Tolerance for deciding a hinge sits exactly at its kink when forming the
# subgradient. At the kink we take the active endpoint of the subdifferential
# interval, which keeps runs reproducible.
KINK_TOL = 1e-10


@dataclass(frozen=True)
class ClientConfig:
    """Per-client robustness knobs.

    epsilon  radius of the local Wasserstein ball (> 0)
    kappa    price of flipping one unit of label mass (>= 0)
    alpha    mixture weight of this client in the global objective
    norm     feature-space transport norm (its dual prices the regularizer)
    tau      extra strong-convexity weight used by the ADMM-SC variant
    rho      ADMM penalty; must agree across clients of one federation
    """

    epsilon: float
    kappa: float = 1.0
    alpha: float = 1.0
    norm: NormKind = NormKind.L1
    tau: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if self.kappa < 0.0 or not np.isfinite(self.kappa):
            raise ValueError(f"kappa must be nonnegative and finite, got {self.kappa}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tau < 0.0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.rho <= 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass
class ClientModel:
    """Local consensus state: the client's weight vector and its scaled
    multipliers against the global model."""

    w_g: np.ndarray
    mu_g: np.ndarray

    def __post_init__(self):
        self.w_g = np.asarray(self.w_g, dtype=float)
        self.mu_g = np.asarray(self.mu_g, dtype=float)
        if not (np.isfinite(self.w_g).all() and np.isfinite(self.mu_g).all()):
            raise ValueError("client model state must be finite")
        if self.w_g.shape != self.mu_g.shape:
            raise ValueError("w_g and mu_g must have matching shapes")


def _require_unit_box(X, tol=1e-9):
    if X.size and (X.min() < -tol or X.max() > 1.0 + tol):
        raise ValueError(
            "features must lie in [0, 1]; normalize first "
            f"(observed range [{X.min():.4g}, {X.max():.4g}])"
        )


def build_sm_lp(w, data, cfg):
    """LP over adversary mass splits and transport vectors at fixed w,
    whose maximizers define the worst-case distribution for an SM round.

    Decision variables, in column order (N samples, P features):

      L-inf transport norm:  [beta+ (N)] [beta- (N)] [t+ (N)] [t- (N)]
                             [q+ (N*P)] [q- (N*P)]
      L1 transport norm:     [beta+ (N)] [beta- (N)] [u+ (N*P)] [u- (N*P)]
                             [q+ (N*P)] [q- (N*P)]

    where t_i (resp. the row-sum of u_i) upper-bounds ||q_i|| so the single
    budget row sum_i(||q+_i|| + ||q-_i|| + kappa*beta-_i) <= N*epsilon stays
    linear. q blocks are stored row-major (sample-major).

    Sizes as built here:

      L-inf: n = 4N + 2NP   variables
             m = 1 + 8NP + 2N inequalities (budget, 4NP norm-epigraph,
                 4NP support box, 2N mass nonnegativity)
             k = N equalities (beta+_i + beta-_i = 1)
      L1:    n = 2N + 4NP, same m and k.

    The program minimizes the negated adversary gain
    (1/N) sum_i [(beta+_i - beta-_i) y_i<w, x_i> - y_i<w, q+_i - q-_i>],
    so the surrogate worst-case risk is 1 - solution.objective. Solve with
    `solve` and feed the result to `extract_worst_case`.
    """
    w = np.asarray(w, dtype=float)
    X, y = data.X, data.y
    N, P = data.n, data.p
    if w.shape != (P,):
        raise ValueError(f"w has shape {w.shape}, expected ({P},)")
    _require_unit_box(X)

    NP = N * P
    if cfg.norm is NormKind.LINF:
        n_aux = 2 * N  # one t per atom
    else:
        n_aux = 2 * NP  # one u per atom coordinate
    n = 2 * N + n_aux + 2 * NP

    off_bp = 0
    off_bm = N
    off_aux = 2 * N
    off_qp = 2 * N + n_aux
    off_qm = off_qp + NP

    # --- objective: minimize (beta+ - beta-) y<w,x> - y<w, q+ - q->
    # (the negation of the adversary's surrogate gain, averaged over N).
    margins = y * (X @ w)  # y_i <w, x_i>
    c = np.zeros(n)
    c[off_bp:off_bp + N] = margins / N
    c[off_bm:off_bm + N] = -margins / N
    yw = (y[:, None] * w[None, :]).ravel()  # row-major (i, p) -> y_i w_p
    c[off_qp:off_qp + NP] = -yw / N
    c[off_qm:off_qm + NP] = yw / N

    rows, cols, vals = [], [], []
    b = []
    r = 0

    def put(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # --- budget row
    if cfg.norm is NormKind.LINF:
        for i in range(N):
            put(r, off_aux + i, 1.0)  # t+_i
            put(r, off_aux + N + i, 1.0)  # t-_i
    else:
        for j in range(NP):
            put(r, off_aux + j, 1.0)  # u+ coords
            put(r, off_aux + NP + j, 1.0)  # u- coords
    if cfg.kappa != 0.0:
        for i in range(N):
            put(r, off_bm + i, cfg.kappa)
    b.append(N * cfg.epsilon)
    r += 1

    # --- norm epigraphs: +-q <= t (or u), per coordinate, both atom signs
    idx = np.arange(NP)
    samp = idx // P  # sample index of each q coordinate
    for sgn_block, q_off in ((0, off_qp), (1, off_qm)):
        if cfg.norm is NormKind.LINF:
            aux_col = off_aux + sgn_block * N + samp
        else:
            aux_col = off_aux + sgn_block * NP + idx
        for j in range(NP):
            put(r, q_off + j, 1.0)
            put(r, int(aux_col[j]), -1.0)
            b.append(0.0)
            r += 1
        for j in range(NP):
            put(r, q_off + j, -1.0)
            put(r, int(aux_col[j]), -1.0)
            b.append(0.0)
            r += 1

    # --- support box: 0 <= beta*x - q <= beta, coordinatewise
    xflat = X.ravel()
    for beta_off, q_off in ((off_bp, off_qp), (off_bm, off_qm)):
        for j in range(NP):
            # q - beta*x <= 0
            put(r, q_off + j, 1.0)
            put(r, beta_off + int(samp[j]), -xflat[j])
            b.append(0.0)
            r += 1
        for j in range(NP):
            # beta*(x - 1) - q <= 0
            put(r, q_off + j, -1.0)
            put(r, beta_off + int(samp[j]), xflat[j] - 1.0)
            b.append(0.0)
            r += 1

    # --- beta >= 0
    for off in (off_bp, off_bm):
        for i in range(N):
            put(r, off + i, -1.0)
            b.append(0.0)
            r += 1

    m = r
    A_ineq = sparse.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=(m, n)
    )

    # --- mass conservation: beta+_i + beta-_i = 1
    er = np.repeat(np.arange(N), 2)
    ec = np.column_stack([np.arange(N), N + np.arange(N)]).ravel()
    A_eq = sparse.csr_matrix((np.ones(2 * N), (er, ec)), shape=(N, n))
    b_eq = np.ones(N)

    return ConvexProgram(
        n=n, c=c, A_ineq=A_ineq, b_ineq=np.asarray(b), A_eq=A_eq, b_eq=b_eq
    )


@dataclass
class WorstCaseDistribution:
    """Extremal distribution: two atoms per sample, one per label sign.

    Atoms with mass below the drop tolerance are removed and their mass is
    folded into the surviving sibling atom, so per-sample mass always sums
    to one. Rows of z_plus / z_minus are only meaningful where the
    corresponding mask is set.
    """

    y: np.ndarray  # original labels, shape (N,)
    beta_plus: np.ndarray  # kept-label mass, shape (N,)
    beta_minus: np.ndarray  # flipped-label mass, shape (N,)
    z_plus: np.ndarray  # kept-label atom locations, shape (N, P)
    z_minus: np.ndarray  # flipped-label atom locations, shape (N, P)
    has_plus: np.ndarray = field(default=None)
    has_minus: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.has_plus is None:
            self.has_plus = self.beta_plus > 0.0
        if self.has_minus is None:
            self.has_minus = self.beta_minus > 0.0

    @property
    def n(self):
        return self.y.shape[0]

    def risk(self, w):
        """Expected hinge loss of w under this distribution (true hinges,
        not the LP surrogate)."""
        total = 0.0
        if self.has_plus.any():
            lp = hinge_losses(w, self.z_plus[self.has_plus], self.y[self.has_plus])
            total += float(self.beta_plus[self.has_plus] @ lp)
        if self.has_minus.any():
            lm = hinge_losses(w, self.z_minus[self.has_minus], -self.y[self.has_minus])
            total += float(self.beta_minus[self.has_minus] @ lm)
        return total / self.n

    def transport_spent(self, data, cfg):
        """Average transport cost from the empirical points, feature moves
        plus kappa per unit of flipped mass."""
        spent = 0.0
        for i in range(self.n):
            if self.has_plus[i]:
                spent += self.beta_plus[i] * feature_norm(
                    self.z_plus[i] - data.X[i], cfg.norm
                )
            if self.has_minus[i]:
                spent += self.beta_minus[i] * (
                    feature_norm(self.z_minus[i] - data.X[i], cfg.norm) + cfg.kappa
                )
        return spent / self.n

    def validate(self, data, cfg, mass_tol=1e-7, support_tol=1e-7, budget_tol=1e-6):
        """Return a list of violation messages (empty when the distribution
        is a certified member of the ambiguity ball)."""
        problems = []
        mass = self.beta_plus + self.beta_minus
        worst = float(np.max(np.abs(mass - 1.0))) if self.n else 0.0
        if worst > mass_tol:
            problems.append(f"per-sample mass deviates from 1 by {worst:.3e}")
        if (self.beta_plus < -mass_tol).any() or (self.beta_minus < -mass_tol).any():
            problems.append("negative atom mass")
        for mask, z, tag in (
            (self.has_plus, self.z_plus, "kept"),
            (self.has_minus, self.z_minus, "flipped"),
        ):
            if mask.any():
                zz = z[mask]
                if zz.min() < -support_tol or zz.max() > 1.0 + support_tol:
                    problems.append(f"{tag}-label atom escapes the unit box")
        spent = self.transport_spent(data, cfg)
        if spent > cfg.epsilon + budget_tol:
            problems.append(
                f"transport budget exceeded: {spent:.6g} > {cfg.epsilon:.6g}"
            )
        return problems


def extract_worst_case(solution, data, cfg, drop_tol=MASS_DROP_TOL):
    """Recover the extremal distribution from a solved worst-case LP.

    Atom locations are x_i - q_i / beta_i per label sign. Where beta is
    (numerically) zero the atom is dropped and its residual mass is handed
    to the sibling so each sample still carries unit mass. Both masses
    vanishing would contradict the mass-conservation constraint, so that
    case is reported as a solver failure.
    """
    if solution.status is not SolverStatus.OPTIMAL:
        raise ValueError(f"cannot extract from a non-optimal solve: {solution.message}")
    N, P = data.n, data.p
    NP = N * P
    x = solution.x_star
    if cfg.norm is NormKind.LINF:
        off_qp = 4 * N
    else:
        off_qp = 2 * N + 2 * NP
    bp = x[:N].copy()
    bm = x[N:2 * N].copy()
    qp = x[off_qp:off_qp + NP].reshape(N, P).copy()
    qm = x[off_qp + NP:off_qp + 2 * NP].reshape(N, P).copy()

    has_p = bp > drop_tol
    has_m = bm > drop_tol
    if not (has_p | has_m).all():
        raise RuntimeError(
            "both atom masses vanished for some sample; the solver output "
            "violates mass conservation"
        )
    # fold dropped slivers into the surviving sibling
    bp_eff = np.where(has_p, bp, 0.0)
    bm_eff = np.where(has_m, bm, 0.0)
    bp_eff = np.where(has_p & ~has_m, 1.0 - bm_eff, bp_eff)
    bm_eff = np.where(has_m & ~has_p, 1.0 - bp_eff, bm_eff)

    z_p = data.X.copy()
    z_m = data.X.copy()
    np.divide(qp, bp[:, None], out=qp, where=has_p[:, None])
    np.divide(qm, bm[:, None], out=qm, where=has_m[:, None])
    z_p[has_p] -= qp[has_p]
    z_m[has_m] -= qm[has_m]
    # the LP box keeps beta*z inside [0,1]*beta; after dividing, clip the
    # solver's last-digit noise so downstream support checks stay clean
    np.clip(z_p, 0.0, 1.0, out=z_p)
    np.clip(z_m, 0.0, 1.0, out=z_m)

    return WorstCaseDistribution(
        y=data.y.copy(),
        beta_plus=bp_eff,
        beta_minus=bm_eff,
        z_plus=z_p,
        z_minus=z_m,
        has_plus=has_p,
        has_minus=has_m,
    )


def sm_subgradient(w, dist, kink_tol=KINK_TOL):
    """Subgradient of the worst-case risk at w, built from the extremal
    distribution's active hinges.

    Each atom contributes -beta*y*z (kept label) or +beta*y*z (flipped)
    when its hinge residual exceeds -kink_tol; at an exact kink this takes
    the active endpoint of the subdifferential interval. Averaged over
    samples. Only valid at the w the distribution was extracted for.
    """
    w = np.asarray(w, dtype=float)
    v = np.zeros_like(w)
    if dist.has_plus.any():
        mask = dist.has_plus
        r = 1.0 - dist.y[mask] * (dist.z_plus[mask] @ w)
        act = r >= -kink_tol
        if act.any():
            coef = -dist.beta_plus[mask][act] * dist.y[mask][act]
            v += coef @ dist.z_plus[mask][act]
    if dist.has_minus.any():
        mask = dist.has_minus
        r = 1.0 + dist.y[mask] * (dist.z_minus[mask] @ w)
        act = r >= -kink_tol
        if act.any():
            coef = dist.beta_minus[mask][act] * dist.y[mask][act]
            v += coef @ dist.z_minus[mask][act]
    return v / dist.n


def worst_case_risk_dual(w, data, cfg):
    """Worst-case hinge risk at w through its dual form.

    The dual is min over lam >= dualnorm(w) of
    eps*lam + mean_i max(l_plus_i, l_minus_i - kappa*lam), where l_plus /
    l_minus are the hinge losses at the sample with its label kept /
    flipped. The objective is piecewise linear in lam, so the minimum sits
    at the dual-norm floor or at one of the crossing points
    (l_minus_i - l_plus_i) / kappa; we evaluate all candidates exactly
    rather than searching. Returns (value, argmin lam).

    Assumes unbounded support, which upper-bounds the boxed primal; the two
    agree whenever the extremal atoms stay interior with active hinges, and
    the acceptance instances are drawn in that regime.
    """
    w = np.asarray(w, dtype=float)
    lam_floor = dual_norm(w, cfg.norm)
    lp = hinge_losses(w, data.X, data.y)
    lm = hinge_losses(w, data.X, -data.y)
    if cfg.kappa == 0.0:
        cands = np.array([lam_floor])
    else:
        cross = (lm - lp) / cfg.kappa
        cands = np.unique(np.concatenate([[lam_floor], cross[cross > lam_floor]]))
    inner = np.maximum(lp[None, :], lm[None, :] - cfg.kappa * cands[:, None])
    vals = cfg.epsilon * cands + inner.mean(axis=1)
    best = int(np.argmin(vals))
    return float(vals[best]), float(cands[best])


def build_risk_epigraph_qp(data, cfg, rho=0.0, tau=0.0, anchor=None):
    """Epigraph program for the client's (optionally proximal) worst-case
    risk minimization.

    minimize  eps*lam + mean(s) + (rho/2)||w - anchor||^2 + tau*||w||^2
    subject to  s_i >= 1 - y_i<w, x_i>,  s_i >= 1 + y_i<w, x_i> - kappa*lam,
                s_i >= 0,  lam >= dualnorm(w).

    With rho = tau = 0 this is the plain robust SVM (an LP, used by the
    central baseline); with rho > 0 and anchor = w_global - mu it is the
    ADMM proximal step (see build_admm_qp). The program objective omits the
    constant (rho/2)||anchor||^2.

    Column order: [w (P)] [lam] [u (P), L-inf norm only] [s (N)]. The dual
    norm constraint is 2P rows (+-w_p <= lam) for the L1 transport norm and
    2P + 1 rows (+-w_p <= u_p, sum(u) <= lam) for L-inf. Keeping s last
    leaves the dense solver's independent-column detection free to pick up
    the slack block.
    """
    X, y = data.X, data.y
    N, P = data.n, data.p
    has_u = cfg.norm is NormKind.LINF
    off_lam = P
    off_u = P + 1
    off_s = P + 1 + (P if has_u else 0)
    n = off_s + N

    qd = np.zeros(n)
    qd[:P] = rho + 2.0 * tau
    Q = sparse.diags(qd).tocsr() if (rho or tau) else None

    c = np.zeros(n)
    c[off_lam] = cfg.epsilon
    c[off_s:] = 1.0 / N
    if rho:
        if anchor is None:
            raise ValueError("anchor is required when rho > 0")
        c[:P] = -rho * np.asarray(anchor, dtype=float)

    rows, cols, vals = [], [], []
    b = []
    r = 0

    def put(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    yx = y[:, None] * X
    # 1 - y<w,x> <= s
    for i in range(N):
        for p in range(P):
            if yx[i, p] != 0.0:
                put(r, p, -yx[i, p])
        put(r, off_s + i, -1.0)
        b.append(-1.0)
        r += 1
    # 1 + y<w,x> - kappa*lam <= s
    for i in range(N):
        for p in range(P):
            if yx[i, p] != 0.0:
                put(r, p, yx[i, p])
        put(r, off_lam, -cfg.kappa)
        put(r, off_s + i, -1.0)
        b.append(-1.0)
        r += 1
    # s >= 0
    for i in range(N):
        put(r, off_s + i, -1.0)
        b.append(0.0)
        r += 1
    # dual norm epigraph
    if has_u:
        for p in range(P):
            put(r, p, 1.0)
            put(r, off_u + p, -1.0)
            b.append(0.0)
            r += 1
            put(r, p, -1.0)
            put(r, off_u + p, -1.0)
            b.append(0.0)
            r += 1
        for p in range(P):
            put(r, off_u + p, 1.0)
        put(r, off_lam, -1.0)
        b.append(0.0)
        r += 1
    else:
        for p in range(P):
            put(r, p, 1.0)
            put(r, off_lam, -1.0)
            b.append(0.0)
            r += 1
            put(r, p, -1.0)
            put(r, off_lam, -1.0)
            b.append(0.0)
            r += 1

    A = sparse.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=(r, n)
    )
    prog = ConvexProgram(n=n, c=c, Q=Q, A_ineq=A, b_ineq=np.asarray(b))
    prog.w_dim = P  # stashed for callers peeling w off the solution
    return prog


def build_admm_qp(w_global, client, data, cfg):
    """Proximal QP for one ADMM round: the worst-case risk epigraph plus
    (rho/2)||w_g - w_global + mu_g||^2 and the tau*||w_g||^2 boost of the
    strongly convex variant (tau = 0 recovers the plain step)."""
    anchor = np.asarray(w_global, dtype=float) - client.mu_g
    return build_risk_epigraph_qp(
        data, cfg, rho=cfg.rho, tau=cfg.tau, anchor=anchor
    )


def admm_client_step(
    w_global, client, data, cfg, solver_cfg=None, cache=None, client_id=None
):
    """One client proximal step: solve the local QP anchored at
    w_global - mu_g and return a ClientModel with w_g updated and mu_g
    untouched.

    When `cache` (a dict) is supplied, the assembled program and the last
    primal-dual point are kept in it, so repeated rounds reuse the solver's
    factorization backend and warm-start. Only the linear term changes
    between rounds, which the solver's program-structure contract allows.
    """
    anchor = np.asarray(w_global, dtype=float) - client.mu_g
    P = data.p
    if cache is not None and "program" in cache:
        prog = cache["program"]
        prog.c[:P] = -cfg.rho * anchor
        warm = cache.get("warm")
    else:
        prog = build_admm_qp(w_global, client, data, cfg)
        warm = None
        if cache is not None:
            cache["program"] = prog
    sol = solve(prog, solver_cfg, warm=warm)
    if sol.status is not SolverStatus.OPTIMAL and warm is not None:
        # a stale warm point can stall the solver when the anchor jumps far
        # between rounds (small rho lets the multipliers drift); retry cold
        sol = solve(prog, solver_cfg)
    if sol.status is not SolverStatus.OPTIMAL:
        who = "client" if client_id is None else f"client {client_id}"
        raise RuntimeError(f"{who}: proximal QP failed to converge: {sol.message}")
    if cache is not None:
        cache["warm"] = (sol.x_star, sol.z_star)
    return ClientModel(w_g=sol.x_star[:P].copy(), mu_g=client.mu_g)


def admm_multiplier_update(client, w_global):
    """Scaled dual ascent after the broadcast: mu_g <- mu_g + w_g - w."""
    w_global = np.asarray(w_global, dtype=float)
    return ClientModel(w_g=client.w_g, mu_g=client.mu_g + client.w_g - w_global)


def wasserstein_radius(eta, N, a=2.0, c1=1.0, c2=1.0, c3=1.0, P=1):
    """Measure-concentration radius giving the local ball confidence
    1 - eta with N samples in P dimensions.

    Below the sample-count threshold log(c1/eta)/(c2*c3) the radius decays
    like N^(-1/a); at or above it, like N^(-1/P). The constants c1, c2, c3
    and the light-tail exponent a > 1 are distribution-dependent inputs.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if N < 1:
        raise ValueError("N must be at least 1")
    if P < 1:
        raise ValueError("P must be at least 1")
    if min(c1, c2, c3) <= 0.0:
        raise ValueError("c1, c2, c3 must all be positive")
    if a <= 1.0:
        raise ValueError(f"the light-tail exponent a must exceed 1, got {a}")
    if c1 < eta:
        raise ValueError("c1 < eta makes the concentration bound vacuous")
    ratio = np.log(c1 / eta) / (c2 * N)
    if N < np.log(c1 / eta) / (c2 * c3):
        return float(ratio ** (1.0 / a))
    return float(ratio ** (1.0 / P))


def radius_heuristic(n_samples, beta=10.0):
    """Practical default radius 1/(beta * n): shrinks with local sample
    size so data-rich clients trust their empirical distribution more."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return 1.0 / (beta * n_samples)
