import numpy as np
import pytest

from medshift import SimScenario, carna_scenario, generate_dataset, sca_scenario


def scenario_variant(base, **overrides):
    """Copy of a built-in scenario with fields replaced."""
    d = base.to_dict()
    d.update(overrides)
    return SimScenario.from_dict(d)


@pytest.fixture(scope="session")
def carna_data_n500():
    """One medium censored sample from the cell-associated-RNA setting."""
    return generate_dataset(carna_scenario(n=500), seed=20240501)


@pytest.fixture(scope="session")
def uncensored_data_n2000():
    """Large sample with the assay limit far below all measurements."""
    scen = scenario_variant(carna_scenario(n=2000), assay_limit=-100.0)
    return generate_dataset(scen, seed=915)


@pytest.fixture(scope="session")
def exact_data_n4000():
    """Large error-free, uncensored sample (sigma_u = 0)."""
    scen = scenario_variant(carna_scenario(n=4000), assay_limit=-100.0, sigma_u=0.0)
    return generate_dataset(scen, seed=4242)


@pytest.fixture(scope="session")
def carna_truth():
    """Generating parameters of the cell-associated-RNA setting."""
    s = carna_scenario()
    return {
        "alpha": np.array(s.alpha),
        "beta": np.array(s.beta),
        "sigma_m": s.sigma_m,
        "sigma_u": s.sigma_u,
        "p_c1": s.p_c1,
        "assay_limit": s.assay_limit,
    }


@pytest.fixture(scope="session")
def sca_truth():
    s = sca_scenario()
    return {
        "alpha": np.array(s.alpha),
        "beta": np.array(s.beta),
        "sigma_m": s.sigma_m,
        "sigma_u": s.sigma_u,
        "p_c1": s.p_c1,
        "assay_limit": s.assay_limit,
    }
