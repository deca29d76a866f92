"""Smoke test for the renewinv extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""
import math

import renewinv as ri

exp = ri.GammaMixture.exponential(1.0)
model = ri.RiskModel(exp, 0.9)
approx = model.approximate_nonruin(5.0, 40.0)

points = approx.lattice()
assert len(points) == 201
for u, v in points:
    assert abs(v - ri.exact_nonruin_exponential(0.9, 1.0, u)) < 2e-5, (u, v)
assert abs(approx.nonruin_lstar(0.8) - (1 - 0.9 * (5 / 5.1) ** 5)) < 1e-12
assert abs(approx.ruin(10.0) + approx.nonruin(10.0) - 1.0) < 1e-15

same = ri.RiskModel.from_rates(exp, 0.45, 0.5).approximate_nonruin(5.0, 40.0)
assert same.lattice() == points

gamma = ri.RiskModel(ri.GammaMixture.gamma(1.5, 1.0), 0.9).approximate_nonruin(5.0, 40.0)
assert abs(gamma.nonruin(10.0) - 0.5949) < 1e-4

bound = model.error_bound(5.0)
assert abs(bound["m1_norm_bound"] - 0.9) < 1e-12
assert bound["total_bound"] >= max(abs(v - ri.exact_nonruin_exponential(0.9, 1.0, u)) for u, v in points)

weights = ri.discretize_equilibrium(exp, 5.0, 3)
assert abs(weights[0] - 1 / 6) < 1e-15 and abs(weights[1] - 5 / 36) < 1e-15
compound = ri.panjer_geometric(ri.discretize_equilibrium(exp, 5.0, 200), 5.0, 0.9, 200)
assert abs(compound[0] - 0.1 / 0.85) < 1e-15

assert abs(ri.invert("test_function", 0.1, "m2", 5.0, [1.0])[0] - 0.185642) < 1e-6
assert abs(ri.invert("exp_decay", 1.0, "postwidder", 10, [1.0])[0] - 1.1 ** -10) < 1e-14
assert abs(ri.log_gamma(0.5) - 0.5 * math.log(math.pi)) < 1e-15
assert abs(ri.negbin_cdf(10, 1.0, 1 / 6) - (1 - (5 / 6) ** 11)) < 1e-14

for bad in (lambda: ri.RiskModel(exp, 1.0), lambda: ri.GammaMixture.gamma(0.0, 1.0),
            lambda: ri.RiskModel(ri.GammaMixture.gamma(0.5, 1.0), 0.5).error_bound(5.0)):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

print("renewinv smoke test: ok")
