"""
Fitting a two-term Gaussian to a temperature profile
====================================================

A slowly rising and falling motor temperature is well described by the sum
of two Gaussians. Here a profile is synthesized from the fitted joint 4
coefficients, corrupted with sensor noise and fitted back by
Levenberg-Marquardt.
"""

import numpy as np

from jointtherm.gauss2 import (PUBLISHED_COEFFICIENTS, PUBLISHED_RMSE, PUBLISHED_R_SQUARED,
                               Gauss2Coefficients, eval_gauss2, fit_gauss2)

x = np.arange(2000.0)
truth = eval_gauss2(PUBLISHED_COEFFICIENTS, x)
print(f"profile spans {truth.min():.2f} to {truth.max():.2f} degC")

rng = np.random.default_rng(0)
y = truth + rng.normal(0.0, 0.08, x.size)

# Start 20 % away from the true coefficients in every direction.
start = Gauss2Coefficients.from_array(PUBLISHED_COEFFICIENTS.as_array() * (1 + rng.uniform(-0.2, 0.2, 6)))
report = fit_gauss2(x, y, init=start)
c = report.coefficients
print(f"fit: a1={c.a1:.2f} b1={c.b1:.1f} c1={c.c1:.1f} a2={c.a2:.3f} b2={c.b2:.2f} c2={c.c2:.1f}")
print(f"RMSE {report.rmse:.4f} degC (reported for the robot: {PUBLISHED_RMSE})")
print(f"R^2  {report.r_squared:.5f} (reported for the robot: {PUBLISHED_R_SQUARED})")
print(f"{report.iterations} LM iterations, converged={report.converged}")

# Without a starting point the fitter guesses one from the data.
auto = fit_gauss2(x, y)
print(f"automatic start: RMSE {auto.rmse:.4f}, R^2 {auto.r_squared:.5f}")
