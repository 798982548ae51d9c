"""Cavity equation: the logistic fixed point and tail shapes at q = 2."""
import numpy as np

from rdelab.cavity import (CavityParams, cavity_step, fit_lower_envelope, fit_upper_envelope,
                           logistic_tail, measure_to_tail, solve_cavity)
from rdelab.measure import Grid

p = CavityParams(1, 1, grid=Grid(-20.0, 20.0, 0.005))
f = logistic_tail(p.grid.points)
print("logistic residual under one step: %.2e" % np.max(np.abs(cavity_step(f, p) - f)))

xs = np.array([2.0, 2.5, 3.0])
for k in (1, 2):
    params = CavityParams(2, k)
    mu, info = solve_cavity(params, return_info=True)
    tail = measure_to_tail(mu)
    vals = np.interp(xs, params.grid.points, tail)
    print("q=2 k=%d: %d iterations, residual %.1e" % (k, info["iterations"], info["residual_sup"]))
    print("  f(x) at", xs, "=", vals)
    print("  upper C = %.2f, lower C = %.2f" % (fit_upper_envelope(tail, params)[0],
                                               fit_lower_envelope(tail, params)[0]))
    # against e^{-x^q/q} the ratio moves slowly; against e^{-x^q} it would grow like e^{x^q/2}
    print("  f(x) exp(x^2/2) / x^{2(k-1)} =", vals * np.exp(xs ** 2 / 2) / xs ** (2 * (k - 1)))
