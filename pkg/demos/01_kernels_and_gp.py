#!/usr/bin/env python3
"""Kernels and the reward surrogate.

Fits a Gaussian process to a handful of noisy-free observations of a bumpy
1-D function and shows interpolation, uncertainty growth away from data,
and likelihood-driven length-scale adaptation.
"""

import numpy as np

from racebo import (
    KernelFamily,
    KernelSpec,
    adapt_hyperparams,
    gp_fit,
    gp_posterior,
    kernel_eval,
    log_marginal_likelihood,
)

# --- kernel shapes -----------------------------------------------------------
spec3 = KernelSpec(KernelFamily.MATERN3, length_scales=np.array([0.1]))
spec1 = KernelSpec(KernelFamily.MATERN1, length_scales=np.array([0.1]))
print("kernel correlation vs distance (length-scale 0.1):")
print(f"{'dist':>6} {'matern3':>9} {'matern1':>9}")
for d in (0.0, 0.05, 0.1, 0.2, 0.4):
    k3 = kernel_eval(spec3, [0.0], [d])
    k1 = kernel_eval(spec1, [0.0], [d])
    print(f"{d:6.2f} {k3:9.4f} {k1:9.4f}")

# --- GP regression -----------------------------------------------------------
def f(x):
    return np.sin(6 * x) + 0.5 * np.sin(23 * x)

rng = np.random.default_rng(0)
train_x = rng.uniform(0, 1, size=(9, 1))
train_y = f(train_x[:, 0])

model = gp_fit(KernelSpec(KernelFamily.MATERN1, 1.0, np.array([0.5])), 0.0,
               train_x, train_y)
print("\nlog marginal likelihood at length-scale 0.5:",
      round(log_marginal_likelihood(model), 3))
model = adapt_hyperparams(model)
print("after one adaptation sweep: length-scale",
      round(float(model.kernel.length_scales[0]), 4),
      "lml", round(log_marginal_likelihood(model), 3))

queries = np.linspace(0, 1, 11)[:, None]
mean, var = gp_posterior(model, queries)
print("\nposterior over [0, 1]:")
print(f"{'x':>5} {'truth':>8} {'mean':>8} {'sigma':>8}")
for q, m, v in zip(queries[:, 0], mean, var):
    print(f"{q:5.2f} {f(q):8.3f} {m:8.3f} {np.sqrt(v):8.3f}")

far_mean, far_var = gp_posterior(model, [[25.0]])
print("\nfar from the data the prior takes over: mean %.4f, var %.4f"
      % (far_mean[0], far_var[0]))
