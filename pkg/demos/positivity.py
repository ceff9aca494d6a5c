"""Lyapunov exponents of lambda exp(2 pi i (x + theta(x))) across energies and couplings."""
# %%
import numpy as np

from quasicmv.frequency import GOLDEN
from quasicmv.lab import constant_phase_lyapunov, exact_resonances, positivity_scan
from quasicmv.sampling import cosine_phase

ts = np.linspace(0, 1, 41, endpoint=False)
lams = [0.5, 0.9, 0.99]

# %% theta = 0: compare with the closed form and mark the zero-exponent band
scan = positivity_scan(1, None, lams, [GOLDEN], ts, n=512, grid=64)
exact = np.array([[constant_phase_lyapunov(l, 1, GOLDEN, t) for t in ts] for l in lams])
print("max deviation from closed form:", np.abs(scan.values[:, 0] - exact).max())
print("resonance t:", exact_resonances(1, GOLDEN))
print("flagged t at lambda 0.99:", ts[scan.flagged[2, 0]])
print("offset L + log(1 - lambda)/2 at t = 0.35:", np.round(scan.offsets[:, 0, 14], 4))

# %% a perturbed phase
scan = positivity_scan(1, cosine_phase(0.2), lams, [GOLDEN], ts, n=512, grid=64)
print(scan.summary())
