"""
Anatomy of a worst-case distribution
====================================

Solve the inner adversary problem for one small client and look at what
the adversary actually does with its transport budget. The flip price
kappa decides the attack: cheap labels get flipped, expensive labels make
the adversary push features across the margin instead.
"""

import numpy as np

from fedrosvm.core import DatasetView, NormKind, hinge_losses
from fedrosvm.robust import (
    ClientConfig,
    build_sm_lp,
    extract_worst_case,
    worst_case_risk_dual,
)
from fedrosvm.solver import solve

rng = np.random.default_rng(3)

# ------------------------------------------------------------ a tiny client
# Six points in the unit square, labels split by the diagonal.
X = rng.random((6, 2))
y = np.where(X[:, 0] - X[:, 1] > 0, 1, -1)
data = DatasetView(X=X, y=y)
w = np.array([1.5, -1.5])

print("empirical hinge risk:", float(np.mean(hinge_losses(w, X, y))))

# ------------------------------------------------------------ two adversaries
for kappa in (0.5, 2.0):
    cfg = ClientConfig(epsilon=5e-2, kappa=kappa, norm=NormKind.L1)
    sol = solve(build_sm_lp(w, data, cfg))
    dist = extract_worst_case(sol, data, cfg)
    dual_value, lam = worst_case_risk_dual(w, data, cfg)

    print()
    print(f"flip price kappa = {kappa}")
    print(f"  worst-case risk: {dist.risk(w):.6f} (atoms)  {dual_value:.6f} (dual)")
    print(f"  optimal dual multiplier: {lam:.4f}")

    # Each empirical point splits into a kept-label atom (mass beta+) and a
    # flipped-label atom (mass beta-). Movement spends the feature norm,
    # a flip spends kappa.
    print("   i  y_i   beta+  beta-   moved by   flip?")
    for i in range(dist.n):
        shift = 0.0
        if dist.has_plus[i]:
            shift = float(np.abs(dist.z_plus[i] - X[i]).sum())
        print(f"  {i:2d}  {int(y[i]):+d}   {dist.beta_plus[i]:5.2f}  "
              f"{dist.beta_minus[i]:5.2f}   {shift:8.4f}   "
              f"{'yes' if dist.has_minus[i] and dist.beta_minus[i] > 1e-9 else 'no'}")

    spent = dist.transport_spent(data, cfg)
    print(f"  budget spent: {spent:.6f} of {cfg.epsilon}")
    print(f"  invariant violations: {dist.validate(data, cfg) or 'none'}")
