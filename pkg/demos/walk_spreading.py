"""Spreading of a coined quantum walk: free shift versus quasi-periodic coins."""
# %%
import numpy as np

from quasicmv.frequency import GOLDEN
from quasicmv.sampling import ZhangForm, cosine_phase
from quasicmv.walk import (CoinSequence, build_walk, coins_from_alpha_function, gauge_residual,
                           simulate, walk_to_cmv)

T = 300
window = (-T - 10, T + 10)


def start(U):
    psi = np.zeros(U.size, complex)
    psi[U.flat_index(0, 0)] = 1
    return psi


# %% identity coins move ballistically
n = window[1] - window[0] + 1
free = build_walk(CoinSequence(*window, np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()))
tr = simulate(free, start(free), T)
print("free walk, second moment / t^2 at t = T:", tr.second_moment[-1] / T ** 2)

# %% coins from lambda exp(2 pi i h(x)) at lambda = 0.99
# h(x) = x is gauge equivalent to constant coefficients, so it still spreads
# ballistically; a cosine perturbation of the phase stops the spreading
for label, theta in (("h = x", None), ("h = x + 0.1 cos", cosine_phase(0.1))):
    coins = coins_from_alpha_function(ZhangForm(0.99, theta=theta), GOLDEN, 0.0, window)
    U = build_walk(coins)
    print(label, "| gauge residual to the CMV form:", gauge_residual(U, walk_to_cmv(coins)))
    tr = simulate(U, start(U), T)
    for t in (10, 50, 100, 200, 300):
        print(f"  t = {t:3d}  second moment {tr.second_moment[t]:9.3f}  "
              f"return {tr.return_probability[t]:.3f}  participation {tr.participation[t]:.2f}")
    print("  norm drift:", tr.norm_drift)
