import warnings

import pytest

from dyksplit import ScheduleGrowthWarning


@pytest.fixture(autouse=True)
def _quiet_growth_advisory():
    # the advisory fires on every product-space run; individual tests that
    # care about it use pytest.warns, which re-enables it locally
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScheduleGrowthWarning)
        yield
