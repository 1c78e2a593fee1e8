"""How fast does the error fall for GHZ versus a generic random state?

Both targets are real three-qubit states of bond dimension 2, and x mixes
them: x = 0 is GHZ, x = 1 the random state. The generic state's infidelity
falls roughly like N^-1/2, while the GHZ state, a stabilizer state, is
learned at close to N^-1. Expect a few minutes.
"""

import numpy as np

from mpstomo import EnsembleSpec, ScalingCurve, TrainConfig, fidelity, fit_power_law, generate_dataset, interpolated_state, train
from mpstomo.training import SgdConfig

grid = (300, 1000, 3000, 10_000)
for x in (1.0, 0.0):
    target = interpolated_state(x, seed=0, n=3)
    medians = []
    for n_samples in grid:
        errs = []
        for seed in range(5):
            ds = generate_dataset(target, EnsembleSpec("random-xz", 3), n_samples, seed)
            model, _ = train(TrainConfig(chi=2, seed=seed, n_restarts=3, sgd=SgdConfig(epochs=20)), ds)
            errs.append(1 - fidelity(model, target))
        medians.append(float(np.median(errs)))
    fit = fit_power_law(ScalingCurve(grid, medians))
    kind = "random" if x == 1.0 else "GHZ"
    print(f"x={x:g} ({kind}): medians {np.round(medians, 5)}, alpha={fit.alpha:.2f}")
