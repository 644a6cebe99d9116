"""Exact optimal transport with dual certificates, and its entropic cousin.

Every exact solve returns the optimal coupling together with c-concave
Kantorovich potentials whose duality gap certifies optimality to 1e-8. The
Sinkhorn route trades exactness for speed through an epsilon-scaled
regularization; on a seeded 16-point instance it lands within 1% of the
exact value.
"""
import numpy as np

import heatmetric as hm

rng = np.random.default_rng(0)
_, space = hm.model_circle(1.0, 16)
mu = rng.random(16) + 0.05
nu = rng.random(16) + 0.05
mu, nu = mu / mu.sum(), nu / nu.sum()

res = hm.w2_exact(mu, nu, space.dist)
gap = hm.dual_gap(mu, nu, res.value, res.potentials, dist=space.dist)
print(f"exact W2 = {res.value:.8f}")
print(f"duality gap = {gap:.2e} (certified <= 1e-8)")
print(f"plan marginal violation = {res.plan.marginal_violation():.2e}")
print(f"potential feasibility slack = {res.potentials.feasibility_violation(space.dist):.2e}")

# the returned potentials are c-concave: one more c-transform is idempotent
back = hm.c_transform(res.potentials.phi_c, space.dist)
print(f"c-concavity residual |phi^cc - phi| = {np.abs(back - res.potentials.phi).max():.2e}")

print()
print("entropic approximation with epsilon scaling:")
for eps_rel in (1e-2, 1e-3):
    eps = eps_rel * space.dist.max() ** 2
    approx = hm.w2_sinkhorn(mu, nu, space.dist, eps_final=eps)
    print(f"  eps = {eps_rel:.0e} * max d^2: value {approx:.8f} "
          f"(rel error {abs(approx - res.value) / res.value:.2e})")

print()
print("c-transform on a small smooth function (involution on its domain):")
# the amplitude must stay small against the squared-distance curvature scale
phi = 1e-3 * np.sin(2 * np.pi * np.arange(16) / 16)
phi_c = hm.c_transform(phi, space.dist)
phi_cc = hm.c_transform(phi_c, space.dist)
print(f"  |phi^cc - phi| = {np.abs(phi_cc - phi).max():.2e}")

print()
print("delta-to-delta transport recovers the ground metric:")
for x, y in ((0, 8), (3, 5)):
    val = hm.w2_exact(space.delta(x), space.delta(y), space.dist).value
    print(f"  W2(delta_{x}, delta_{y}) = {val:.6f}   d({x},{y}) = {space.dist[x, y]:.6f}")
