import numpy as np
import pytest
from scipy import integrate

from conftest import gaussian_case
from stationary_light.model import CFLError, PhysicalParams
from stationary_light.secular import (analytic_gaussian_diffusion, diffusion_time_step_limit,
                                      secular_evolve)
from stationary_light.stencil import first_derivative
from stationary_light.volterra import EvolveOptions, build_kernel_table


def _rel_l2(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(y)


def test_analytic_solution_against_heat_kernel_quadrature():
    L0, D, tau = 3.0, 0.4, 2.5
    xi = np.array([-4.0, 0.0, 1.3, 6.0])
    ana = analytic_gaussian_diffusion(L0, D, tau, xi)

    def conv(x):
        kern = lambda y: np.exp(-y ** 2 / L0 ** 2) * np.exp(-(x - y) ** 2 / (4 * D * tau))
        return integrate.quad(kern, -40, 40, epsabs=1e-13)[0] / np.sqrt(4 * np.pi * D * tau)

    assert np.allclose(ana.real, [conv(x) for x in xi], rtol=1e-10, atol=1e-14)
    assert np.allclose(analytic_gaussian_diffusion(L0, D, 0.0, xi).real, np.exp(-xi ** 2 / L0 ** 2))


def test_analytic_solution_validation():
    with pytest.raises(ValueError):
        analytic_gaussian_diffusion(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        analytic_gaussian_diffusion(1.0, 1.0, -1.0, 0.0)


def test_diffusion_mode_matches_heat_kernel():
    p, g, init = gaussian_case(L0=3.0, a=0.5, n_xi=361, tau_max=4.0, d_tau=0.05)
    traj, d = secular_evolve(init, p, g, "adiabatic-diffusion")
    ana = analytic_gaussian_diffusion(3.0, p.cos2theta, traj.final.tau, g.xi)
    assert _rel_l2(traj.final.Es, ana) < 1e-3
    D = first_derivative(g.n_xi, g.d_xi)
    assert np.array_equal(traj.final.Ed, -(D @ traj.final.Es))
    assert np.all(np.diff(d.I_total) < 0)


def test_full_pair_slaves_to_diffusion():
    # At large tan^2 the difference mode follows -d_xi Es after a unit-rate transient.
    p, g, init = gaussian_case(L0=5.0, a=0.02, n_xi=721, tau_max=20.0)
    traj, _ = secular_evolve(init, p, g, "full-pair")
    ana = analytic_gaussian_diffusion(5.0, p.cos2theta, 20.0, g.xi)
    assert _rel_l2(traj.final.Es, ana) < 0.05
    D = first_derivative(g.n_xi, g.d_xi)
    assert _rel_l2(traj.final.Ed, -(D @ traj.final.Es)) < 0.1


def test_full_pair_parity_and_snapshots():
    p, g, init = gaussian_case(a=2.0, tau_max=4.0)
    traj, d = secular_evolve(init, p, g, "full-pair", EvolveOptions(output_every=g.n_steps // 5))
    assert len(traj.snapshots) == 6
    Es, Ed = traj.final.Es, traj.final.Ed
    assert np.max(np.abs(Es - Es[::-1])) < 1e-13
    assert np.max(np.abs(Ed + Ed[::-1])) < 1e-13
    assert len(d) == g.n_steps + 1


def test_diffusion_step_limit():
    p, g, init = gaussian_case(a=2.0, tau_max=1.0)
    assert diffusion_time_step_limit(p, g) == pytest.approx(g.d_xi ** 2 / (2 * p.cos2theta))
    with pytest.raises(CFLError):
        secular_evolve(init, p, g, "adiabatic-diffusion")


def test_argument_validation():
    p, g, init = gaussian_case(tau_max=1.0)
    with pytest.raises(ValueError):
        secular_evolve(init, p, g, "sideways")
    with pytest.raises(ValueError):
        secular_evolve(init, p, g, options=EvolveOptions(kernel=build_kernel_table(p, g)))
