"""End-to-end smoke test for the pylangevin extension module.

Checks the bindings against values the Rust test suite pins down exactly:
closed-form tuning rules, exact Gaussian chain laws, the one-step descent
audit, and a short sampling run. Run after `pip install -e crates/langevin-py`.
"""

import math

import pylangevin as lv


def check(name, ok):
    status = "ok" if ok else "FAIL"
    print(f"{status:4} {name}")
    if not ok:
        raise SystemExit(f"smoke test failed at: {name}")


# Tuning: the convex-KL rule at eps=0.1, d=10, L=1, W0^2=1 has the closed
# form gamma = eps/(2Ld) = 0.005 and n = ceil(W0^2/(gamma eps)) = 2000.
rep = lv.tune("ula-convex", {"dim": 10, "l": 1.0, "w0_sq": 1.0}, 0.1)
check("tune ula-convex gamma", rep["outputs"]["gamma_eps"] == 0.005)
check("tune ula-convex n", rep["outputs"]["n_eps"] == 2000.0)
check("tune report is valid", rep["valid"] and rep["warnings"] == [])

# Strong-convexity rule on the standard 2-D Gaussian from a point start at
# (1, 0): W0^2 = 1 + 2 = 3, and the tuned pair must actually deliver eps.
q = lv.Quadratic.isotropic(2, 1.0)
pi = lv.GaussianLaw.target_of(q)
mu0 = lv.GaussianLaw.point([1.0, 0.0])
w0_sq = lv.w2_squared(mu0, pi)
check("point-start W2^2 is exact", abs(w0_sq - 3.0) < 1e-12)

eps = 0.5
rep = lv.tune("ula-strong-w2", {"dim": 2, "m": 1.0, "l": 1.0, "w0_sq": w0_sq}, eps)
gamma, n = rep["outputs"]["gamma_eps"], int(rep["outputs"]["n_eps"])
law = lv.ula_law(q, gamma, n, mu0)
check("tuned pair reaches eps", lv.w2_squared(law, pi) <= eps)

# One-step descent inequality, exact at a non-stationary start.
report = lv.one_step_report(q, 0.1, mu0)
check("one-step descent margin >= 0", report["descent_margin"] >= -1e-9)
check(
    "heat energy gain matches trace form",
    abs(report["heat_energy_gain"] - report["heat_energy_trace"]) < 1e-10,
)

# Stationary bias of the discretized chain sits under the Ld*gamma budget.
st = lv.ula_stationary(q, 0.1)
kl = lv.kl_divergence(st, pi)
check("stationary KL under step budget", 0.0 < kl <= 1.0 * 2 * 0.1)
check("pinsker bound", lv.pinsker_tv_bound(kl) == min(math.sqrt(2.0 * kl), 1.0))
check("free energy gap equals KL", abs(lv.free_energy_gap(q, st) - kl) < 1e-12)

# A theorem evaluator consumes a plan and echoes its inputs.
plan = lv.StepPlan.constant(0.1)
rep = lv.bound_rhs("step-bias", {"dim": 2, "m": 1.0, "l": 1.0}, plan, 1)
check("step-bias kl output", abs(rep["outputs"]["kl"] - 0.2) < 1e-15)
check("inputs are echoed", rep["inputs"]["constants"]["dim"] == 2)

# Sampling: a ULA chain on the 1.9-curvature scalar target; the weighted
# average of ||x||^2 should sit near the exact stationary second moment
# 2/(1.9*(2 - 0.1*1.9)).
q1 = lv.Quadratic.diagonal([1.9, 1.9])
st1 = lv.ula_stationary(q1, 0.1)
exact = st1.second_moment_about([0.0, 0.0])
out = lv.sample("ula", q1, plan.with_burn_in(1000), 20_000, seed=7)
check("chain mean_square near exact law", abs(out["estimates"]["mean_square"] - exact) < 0.15)
check("no chain warnings", out["warnings"] == [])

# Determinism: same seed, same estimates, bit for bit.
out2 = lv.sample("ula", q1, plan.with_burn_in(1000), 20_000, seed=7)
check("runs are reproducible", out2["estimates"] == out["estimates"])

# Nonsmooth target: SSGLD and SPGLD on the double-exponential (a1=1 with a
# zero quadratic part). Stationary variance is 2; both chains should land
# within Monte Carlo distance of it, and their traces should differ.
flat = lv.Quadratic.diagonal([0.0])
small = lv.StepPlan.constant(0.01).with_burn_in(10_000)
ss = lv.sample("ssgld", flat, small, 200_000, seed=11, a1=1.0)
sp = lv.sample("spgld", flat, small, 200_000, seed=11, a1=1.0)
check("ssgld hits laplace variance", abs(ss["estimates"]["mean_square"] - 2.0) < 0.6)
check("spgld hits laplace variance", abs(sp["estimates"]["mean_square"] - 2.0) < 0.6)

# Empirical transport distance: thinned trace of the ULA chain against an
# equal-size reference grid is finite and small-ish; identical samples give 0.
xs = [x[0] for _, x in lv.sample("ula", q1, small, 50_000, seed=3, thin=10)["trace"]]
check("thinned trace recorded", len(xs) == 5000)
check("empirical w2 to itself is zero", lv.empirical_w2_squared(xs, xs) == 0.0)

print("all smoke checks passed")
