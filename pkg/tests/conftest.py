import pytest

from spadrate import er


@pytest.fixture(scope="session")
def paper_params() -> er.ErParams:
    return er.ErParams(eta0=0.19117, tau_d=80.09205e-6, tau_r=112.5e-9)
