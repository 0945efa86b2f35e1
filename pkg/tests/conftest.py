import numpy as np
import pytest

import blowuplab as bl


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the jit kernels once so per-test timings measure stepping only
    dom = bl.Domain.interval(0.0, 1.0)
    grid = bl.build_grid(dom, 11)
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power(1.0, 1.0, 1),
        sigma=bl.SigmaSpec.dynamical(1.0),
        initial=bl.InitialDataSpec.constant(0.5),
    )
    bl.run(ps, grid, bl.StepPolicy(t_horizon=1e-3, dt_max=1e-4))
    dom2 = bl.Domain.rectangle(0.0, 1.0, 0.0, 1.0)
    grid2 = bl.build_grid(dom2, (7, 7))
    ps2 = bl.ProblemSpec(
        domain=dom2,
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power(1.0, 1.0, 2),
        sigma=bl.SigmaSpec.dynamical(1.0),
        initial=bl.InitialDataSpec.constant(0.5),
    )
    bl.run(ps2, grid2, bl.StepPolicy(t_horizon=1e-3, dt_max=1e-4))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_problem(
    bounds=(0.0, 1.0),
    reaction=None,
    convection=None,
    sigma=None,
    initial=None,
):
    dom = bl.Domain.interval(*bounds)
    return bl.ProblemSpec(
        domain=dom,
        reaction=reaction or bl.ReactionSpec.zero(),
        convection=convection or bl.ConvectionSpec.zero(1),
        sigma=sigma or bl.SigmaSpec.neumann(),
        initial=initial or bl.InitialDataSpec.constant(1.0),
    )
