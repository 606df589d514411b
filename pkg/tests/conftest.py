import pytest

from owcrelay import (
    ApConfig,
    Scenario,
    UserConfig,
    build_link_budget,
    default_scenario,
)
from owcrelay.outage import ensure_marginals


@pytest.fixture(scope="session")
def default_sc():
    return default_scenario()


@pytest.fixture(scope="session")
def budget(default_sc):
    return build_link_budget(default_sc)


@pytest.fixture(scope="session")
def marginals(budget):
    return ensure_marginals(budget)


def make_single_link_scenario() -> Scenario:
    """One ceiling source straight above one user; no relays.

    The unblocked SINR is far above threshold, so outage happens exactly
    when the vertical link is blocked.
    """
    return Scenario(
        name="single-link",
        aps=(ApConfig(id="ap1", position_m=(1.0, 1.0, 3.0)),),
        relays=(),
        users=(UserConfig(id="u1", position_m=(1.0, 1.0, 1.0)),),
    )


@pytest.fixture(scope="session")
def single_link_budget():
    return build_link_budget(make_single_link_scenario())
