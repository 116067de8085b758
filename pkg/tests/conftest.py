import datetime as dt

import numpy as np
import pytest

from firecast.grid import GridSpec, Indicator, RasterFrame

DAY0 = dt.date(2018, 7, 1)


def small_spec(rows=4, cols=5):
    return GridSpec(34.0, 34.0 + rows * 0.02, -118.0, -118.0 + cols * 0.025, 1.38, rows, cols)


def frame(spec, values, indicator=Indicator.TEMPERATURE, date=DAY0, **kw):
    return RasterFrame(spec, indicator, date, np.asarray(values, dtype=np.float64), **kw)


@pytest.fixture
def spec44():
    return small_spec(4, 4)
