import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskplan.errors import NoSuchLayerError, OutOfBoundsError
from riskplan.grid_map import (
    CellIndex,
    MultiLayerGridMap,
    Path,
    Pose,
    load_map,
    save_map,
    wrap_angle,
)


def make_grid(rows=4, cols=5, res=0.5, origin=(0.0, 0.0)):
    return MultiLayerGridMap(rows, cols, res, origin)


class TestWorldToCell:
    def test_interior_point_floors_toward_lower_index(self):
        grid = make_grid()
        assert grid.world_to_cell((0.74, 0.2)) == CellIndex(0, 1)

    def test_point_at_origin_is_cell_zero(self):
        grid = make_grid()
        assert grid.world_to_cell((0.0, 0.0)) == CellIndex(0, 0)

    def test_point_outside_extent_raises(self):
        grid = make_grid()
        with pytest.raises(OutOfBoundsError):
            grid.world_to_cell((-0.1, 0.0))

    def test_point_past_far_edge_raises(self):
        grid = make_grid(rows=2, cols=2, res=0.5)
        with pytest.raises(OutOfBoundsError):
            grid.world_to_cell((1.0, 0.5))

    @given(
        row=st.integers(min_value=0, max_value=7),
        col=st.integers(min_value=0, max_value=9),
        res=st.sampled_from([0.1, 0.25, 0.5, 1.0]),
        ox=st.floats(min_value=-5, max_value=5, allow_nan=False),
        oy=st.floats(min_value=-5, max_value=5, allow_nan=False),
    )
    def test_cell_center_round_trip(self, row, col, res, ox, oy):
        grid = MultiLayerGridMap(8, 10, res, (ox, oy))
        center = grid.cell_center(CellIndex(row, col))
        assert grid.world_to_cell(center) == CellIndex(row, col)


class TestLayerAccess:
    def test_known_cell_returns_value(self):
        grid = make_grid()
        grid.layers["elevation"][1, 2] = 1.5
        grid.known_mask[1, 2] = True
        assert grid.get_layer_value("elevation", CellIndex(1, 2)) == 1.5

    def test_unknown_cell_returns_none(self):
        grid = make_grid()
        grid.layers["elevation"][1, 2] = 1.5
        assert grid.get_layer_value("elevation", CellIndex(1, 2)) is None

    def test_missing_layer_raises(self):
        grid = make_grid()
        with pytest.raises(NoSuchLayerError):
            grid.get_layer_value("no_such", CellIndex(0, 0))

    def test_layer_write_does_not_touch_other_cells(self):
        grid = make_grid()
        before = grid.layers["elevation"].copy()
        grid.layers["elevation"][2, 3] = 9.0
        after = grid.layers["elevation"]
        mask = np.ones_like(after, dtype=bool)
        mask[2, 3] = False
        assert np.array_equal(before[mask], after[mask], equal_nan=True)

    def test_add_layer_rejects_wrong_shape(self):
        grid = make_grid()
        with pytest.raises(ValueError):
            grid.add_layer("bad", np.zeros((2, 2)))


class TestNeighborhood:
    def test_radius_zero_is_self(self):
        grid = make_grid()
        assert grid.neighborhood(CellIndex(2, 2), 0.0) == [CellIndex(2, 2)]

    def test_radius_one_resolution_interior(self):
        # Center plus 4-neighborhood: diagonals sit at res*sqrt(2) > res.
        grid = make_grid()
        cells = grid.neighborhood(CellIndex(2, 2), grid.resolution)
        assert len(cells) == 5
        assert set(cells) == {(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)}

    def test_corner_cell_clips_to_bounds(self):
        grid = make_grid()
        cells = grid.neighborhood(CellIndex(0, 0), grid.resolution)
        assert len(cells) == 3
        assert set(cells) == {(0, 0), (0, 1), (1, 0)}

    @given(
        r1=st.integers(0, 3),
        c1=st.integers(0, 4),
        r2=st.integers(0, 3),
        c2=st.integers(0, 4),
        radius=st.floats(min_value=0.0, max_value=3.0, allow_nan=False),
    )
    def test_symmetry(self, r1, c1, r2, c2, radius):
        grid = make_grid()
        a, b = CellIndex(r1, c1), CellIndex(r2, c2)
        assert (b in grid.neighborhood(a, radius)) == (a in grid.neighborhood(b, radius))


class TestPoseAndPath:
    def test_heading_normalized(self):
        pose = Pose(np.zeros(3), heading=3 * math.pi)
        assert -math.pi <= pose.heading <= math.pi
        assert pose.heading == pytest.approx(math.pi)

    def test_non_finite_position_rejected(self):
        with pytest.raises(ValueError):
            Pose(np.array([np.nan, 0.0, 0.0]))

    def test_empty_path_rejected(self):
        with pytest.raises(ValueError):
            Path([])

    @given(angle=st.floats(min_value=-50, max_value=50, allow_nan=False))
    def test_wrap_angle_range(self, angle):
        assert -math.pi <= wrap_angle(angle) <= math.pi


class TestMapFile:
    def test_round_trip_preserves_unknown_cells(self, tmp_path):
        grid = make_grid(rows=3, cols=4)
        heights = np.arange(12, dtype=float).reshape(3, 4) * 0.1
        grid.set_known_elevation(heights)
        grid.known_mask[1, 2] = False
        grid.layers["elevation"][1, 2] = np.nan

        target = tmp_path / "world.map"
        save_map(grid, target)
        loaded = load_map(target)

        assert loaded.resolution == grid.resolution
        assert np.array_equal(loaded.origin, grid.origin)
        assert np.array_equal(loaded.known_mask, grid.known_mask)
        known = loaded.known_mask
        assert np.array_equal(
            loaded.layers["elevation"][known], grid.layers["elevation"][known]
        )

    def test_unknown_token_in_file(self, tmp_path):
        grid = make_grid(rows=2, cols=2)
        grid.set_known_elevation(np.zeros((2, 2)))
        grid.known_mask[0, 1] = False
        target = tmp_path / "w.map"
        save_map(grid, target)
        text = target.read_text()
        assert "?" in text.splitlines()[5]

    def test_missing_header_rejected(self, tmp_path):
        target = tmp_path / "bad.map"
        target.write_text("resolution 0.5\norigin_x 0\n")
        with pytest.raises(ValueError):
            load_map(target)
