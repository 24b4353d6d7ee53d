import math

import numpy as np
import pytest

from whomog.errors import StabilityWarning
from whomog.geometry import Y1, Y2, build_epsilon_tiling
from whomog.micro import (
    MICRO_COLUMNS,
    MicroState,
    build_wentzell_system,
    default_trace_constant,
    initial_micro_state,
    micro_run,
    micro_step,
    reaction_loads,
)
from whomog.models import (
    constant_diffusion,
    constant_initial_data,
    exchange,
    logistic_truncated,
    no_reaction,
    periodic_diffusion,
    smooth_initial_data,
)


@pytest.fixture(scope="module")
def system(coarse_cell):
    return build_wentzell_system(build_epsilon_tiling(coarse_cell, 0.25), constant_diffusion())


def _masses(sys_, st):
    return [float(np.sum(sys_.sides[j].A @ u)) for j, u in ((Y1, st.u1), (Y2, st.u2))]


def test_operators_are_symmetric(system):
    for j in (Y1, Y2):
        s = system.sides[j]
        assert abs(s.A - s.A.T).max() < 1e-15
        assert abs(s.S - s.S.T).max() < 1e-12
        assert np.abs(s.S @ np.ones(s.mesh.n_vertices)).max() < 1e-10


def test_weighted_mass_of_constant(system, coarse_cell):
    # A carries |Omega_eps^j| + eps |Gamma_eps| = |Y_j| + |Gamma|
    st = initial_micro_state(system, constant_initial_data(1.0, 1.0))
    gamma = system.tiling.surfaces[Y1].length
    m1, m2 = _masses(system, st)
    assert m1 == pytest.approx(coarse_cell.area(Y1) + system.epsilon * gamma, rel=1e-12)
    assert m2 == pytest.approx(coarse_cell.area(Y2) + system.epsilon * gamma, rel=1e-12)


def test_constants_are_steady_without_reaction(system):
    st = initial_micro_state(system, constant_initial_data(0.7, -0.2))
    for _ in range(3):
        st = micro_step(st, 1e-2, system, no_reaction())
    assert np.allclose(st.u1, 0.7, atol=1e-10) and np.allclose(st.u2, -0.2, atol=1e-10)


def test_exchange_conserves_total_mass(system):
    st = initial_micro_state(system, smooth_initial_data())
    R = exchange(1.0, 0.4)
    loads = reaction_loads(st, system, R)
    assert abs(loads[Y1].sum() + loads[Y2].sum()) < 1e-13
    m0 = sum(_masses(system, st))
    for _ in range(20):
        st = micro_step(st, 1e-2, system, R)
    assert sum(_masses(system, st)) == pytest.approx(m0, rel=1e-10)


def test_exchange_relaxes_the_jump(system):
    st = initial_micro_state(system, constant_initial_data(1.0, 0.0))
    for _ in range(50):
        st = micro_step(st, 2e-2, system, exchange(1.0))
    jump = np.abs(st.trace(system, Y1) - st.trace(system, Y2)).max()
    assert jump < 0.5


def test_run_norms_of_constant_field(system, coarse_cell):
    T = 0.1
    st = initial_micro_state(system, constant_initial_data(2.0, 1.0))
    run = micro_run(system, no_reaction(), st, 1e-2, T, [0.0, T])
    gamma = system.epsilon * system.tiling.surfaces[Y1].length
    assert run.hje_l2[0] == pytest.approx(2.0 * math.sqrt(T * (coarse_cell.area(Y1) + gamma)), rel=1e-9)
    assert run.hje_l2[1] == pytest.approx(math.sqrt(T * (coarse_cell.area(Y2) + gamma)), rel=1e-9)
    assert run.grad2_l2 < 1e-6
    assert set(run.diagnostics[0]) == set(MICRO_COLUMNS)
    assert [s.t for s in run.states] == pytest.approx([0.0, T])


def test_trace_inequality_ratio_below_one(system):
    C = default_trace_constant(system.tiling)
    run = micro_run(system, exchange(), initial_micro_state(system, smooth_initial_data()), 1e-2, 0.05,
                    trace_constant=C)
    assert all(d["trace_check_ratio"] <= 1.0 for d in run.diagnostics)


def test_periodic_diffusion_runs(coarse_cell):
    sys_ = build_wentzell_system(build_epsilon_tiling(coarse_cell, 0.5), periodic_diffusion(amplitude=0.3))
    st = initial_micro_state(sys_, smooth_initial_data())
    st = micro_step(st, 1e-2, sys_, logistic_truncated())
    assert np.all(np.isfinite(st.u1)) and np.all(np.isfinite(st.u2))


def test_stability_warning_and_bad_step(system):
    st = initial_micro_state(system, constant_initial_data())
    with pytest.warns(StabilityWarning):
        micro_step(st, 0.5, system, exchange(10.0))
    with pytest.raises(ValueError):
        micro_step(st, -1.0, system, no_reaction())


def test_initial_state_uses_surface_profile_on_interface(system):
    from whomog.models import InitialData, constant_profile

    data = InitialData(constant_profile(1.0), constant_profile(3.0), constant_profile(0.0), constant_profile(-1.0))
    st = initial_micro_state(system, data)
    ids = system.sides[Y1].node_ids
    assert np.all(st.u1[ids] == 3.0)
    mask = np.ones(len(st.u1), bool)
    mask[ids] = False
    assert np.all(st.u1[mask] == 1.0)
    assert isinstance(st, MicroState)
