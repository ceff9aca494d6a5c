"""Eigenvector decay of a quasi-periodic CMV restriction against the Lyapunov exponent."""
# %%
import numpy as np

from quasicmv.cmv import build
from quasicmv.frequency import GOLDEN
from quasicmv.lab import decay_rate, localization_report, spectrum
from quasicmv.sampling import ZhangForm, cosine_phase, sequence

f = ZhangForm(0.99, k=1, theta=cosine_phase(0.1))

# %% one eigenvector up close
seq = sequence(f, GOLDEN, 0.0, (0, 999))
E = build(seq, (0, 999), beta=1, gamma=1)
pairs = spectrum(E)
p = pairs[len(pairs) // 3]
fit = decay_rate(p.xi)
print(f"z = {p.z:.6f}, peak at site {fit.center}, rate {fit.rate:.3f}, R^2 {fit.r2:.3f}")
lo = max(fit.center - 30, 0)
for n in range(lo, min(fit.center + 31, 1000), 5):
    print(f"  {n:4d}  {np.log10(abs(p.xi[n]) + 1e-300):8.2f}")

# %% the whole arc
rep = localization_report(f, GOLDEN, 0.0, (0, 999), arc=(-1.6, -0.5), lyap_n=256, lyap_grid=64)
print(rep.summary())
ratios = np.array([e.ratio for e in rep.entries if e.passed])
print("rate / L quartiles:", np.round(np.percentile(ratios, [25, 50, 75]), 3))
