import numpy as np
import pytest
from hypothesis import given, strategies as st

from fgbm.grid import TimeGrid


def test_uniform():
    g = TimeGrid.uniform(4, 2.0)
    np.testing.assert_allclose(g.times, [0, 0.5, 1, 1.5, 2])
    assert g.n == 4 and g.horizon == 2.0 and g.mesh == 0.5
    assert g.is_uniform()


@pytest.mark.parametrize("times", [[0.0], [0.1, 0.5], [0.0, 0.5, 0.5], [0.0, 1.0, 0.5]])
def test_rejects_bad(times):
    with pytest.raises(ValueError):
        TimeGrid(times)


def test_index_of():
    g = TimeGrid.uniform(8)
    assert g.index_of(0.25) == 2
    assert g.index_of(1.0) == 8
    with pytest.raises(ValueError):
        g.index_of(0.3)


def test_coarsen_and_eq():
    g = TimeGrid.uniform(8)
    assert g.coarsen(2) == TimeGrid.uniform(4)
    assert hash(g.coarsen(2)) == hash(TimeGrid.uniform(4))
    with pytest.raises(ValueError):
        g.coarsen(3)


@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=30))
def test_mesh_is_max_step(steps):
    g = TimeGrid(np.r_[0.0, np.cumsum(steps)])
    assert g.mesh == pytest.approx(max(np.diff(g.times)))
    assert g.times[0] == 0.0
    with pytest.raises(ValueError):
        g.times[0] = 1.0
