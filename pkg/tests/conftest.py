import pytest

from whomog.geometry import UnitCellGeometry, build_cell_mesh


@pytest.fixture(scope="session")
def coarse_cell():
    return build_cell_mesh(UnitCellGeometry(), 0.1)


@pytest.fixture(scope="session")
def cell():
    return build_cell_mesh(UnitCellGeometry(), 0.05)
