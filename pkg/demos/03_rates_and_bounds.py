# coding: utf-8
# %% [markdown]
# # Entanglement rate, spectrum and closed-form bounds
#
# The approach to the singlet is exponential at late times. Its rate equals
# the slowest nonzero relaxation rate of the Liouvillian, so rates can be read
# off the spectrum without any time integration. A closed-form rate estimate
# is tabulated alongside for comparison.

# %%
import numpy as np

from rydberg_dark import dynamics, model, observables, reduced
from rydberg_dark.qcore import ket, projector


def relaxation_rate(p):
    ev = np.linalg.eigvals(dynamics.build_liouvillian(p).matrix)
    return np.sort(-ev.real)[1]


base = model.ModelParams.from_mhz(omega1=10, omega2=20, omega_raman=0.1, delta=0,
                                  gamma0=3, gamma1=3, gammaR=0, vrr=10)

# %% [markdown]
# ## Rate versus Raman coupling

# %%
print("omega/2pi (MHz)  rate/2pi (MHz)  closed form/2pi   ratio")
ws = np.array([0.025, 0.05, 0.1, 0.2, 0.4])
rates = []
for w in ws:
    p = base.replace(omega_raman=model.TWO_PI * w)
    g = relaxation_rate(p)
    b = reduced.gammaE_bound(p)
    rates.append(g)
    print(f"{w:15.3f} {g / model.TWO_PI:15.5f} {b / model.TWO_PI:16.5f} {g / b:7.2f}")
print(f"linear R^2 over the first four points: {observables.linear_r2(ws[:4], rates[:4]):.4f}")

# %% [markdown]
# ## Fit of a full trajectory
#
# The same rate extracted from F(t) by the plateau-plus-log-linear fit.

# %%
p = base
traj = dynamics.integrate(projector(ket(1, 1)), p, 400.0, sample_every=0.5, keep_states=False)
fit = observables.fit_entanglement_rate(traj)
print(f"fit: F_max = {fit.F_max:.5f}, d = {fit.d:.3f}, gammaE/2pi = {fit.gammaE / model.TWO_PI:.5f} MHz, "
      f"window {fit.window[0]:.2f}-{fit.window[1]:.1f} us, rms = {fit.rms_residual:.1e}")
print(f"Liouvillian rate/2pi = {relaxation_rate(p) / model.TWO_PI:.5f} MHz")

# %% [markdown]
# ## Non-Hermitian spectrum
#
# The eigenvector of H - (i/2) sum C^dag C with the smallest decay is almost
# exactly the singlet, and it is separated from the next one by orders of
# magnitude.

# %%
rep = reduced.bounds(p)
for e in rep.spectrum[:4]:
    print(f"  lambda = {e.eigenvalue.real:+10.4f} {e.eigenvalue.imag:+.3e}i   |<DS|v>|^2 = {e.overlap_DS:.6f}")
print(f"gap ratio = {rep.decay_gap_ratio:.0f}, slowest |Im| / (2 xi^2) = {rep.decay_per_2xi2:.2f} rad/us")
print(reduced.format_bounds(rep), end="")
