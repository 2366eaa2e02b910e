import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorroute.hexgrid import SQRT3, HexGrid, cells_along
from anchorroute.netgraph import Edge, RoadNetwork

from reference import nearest_center_cell

finite_coord = st.floats(-50_000.0, 50_000.0, allow_nan=False, allow_infinity=False)


class TestCellAssignment:
    def test_origin_maps_to_origin_cell(self):
        grid = HexGrid(radius=500.0)
        assert grid.cell_of((0.0, 0.0)) == (0, 0)

    def test_nearby_points_share_cell(self):
        grid = HexGrid(radius=500.0)
        a = grid.cell_of((100.0, 50.0))
        b = grid.cell_of((101.0, 50.0))
        assert a == b

    def test_point_two_radii_along_axis_changes_cell(self):
        grid = HexGrid(radius=500.0)
        # along the axis toward a neighboring center (distance sqrt(3) r),
        # a point 2r out is well past the shared boundary
        cx, cy = grid.center((1, 0))
        norm = math.hypot(cx, cy)
        p = (2 * grid.radius * cx / norm, 2 * grid.radius * cy / norm)
        assert grid.cell_of(p) != (0, 0)

    def test_neighbor_centers_at_sqrt3_r(self):
        grid = HexGrid(radius=500.0, origin=(120.0, -40.0))
        for cell in grid.neighbors((3, -2)):
            d = math.dist(grid.center((3, -2)), grid.center(cell))
            assert d == pytest.approx(SQRT3 * 500.0, rel=1e-12)

    @given(x=finite_coord, y=finite_coord)
    @settings(max_examples=150, deadline=None)
    def test_matches_nearest_center(self, x, y):
        grid = HexGrid(radius=500.0)
        cell = grid.cell_of((x, y))
        ref = nearest_center_cell((x, y), grid)
        # ties on exact boundaries are broken deterministically either way
        d_cell = math.dist((x, y), grid.center(cell))
        d_ref = math.dist((x, y), grid.center(ref))
        assert d_cell <= d_ref + 1e-9

    @given(x=finite_coord, y=finite_coord)
    @settings(max_examples=100, deadline=None)
    def test_point_within_circumradius_of_its_center(self, x, y):
        grid = HexGrid(radius=500.0)
        cell = grid.cell_of((x, y))
        assert math.dist((x, y), grid.center(cell)) <= 500.0 + 1e-6

    def test_polygon_is_regular_hexagon(self):
        grid = HexGrid(radius=500.0)
        poly = grid.polygon((2, 1))
        center = grid.center((2, 1))
        for corner in poly:
            assert math.dist(center, corner) == pytest.approx(500.0)
        assert grid.cell_area == pytest.approx(1.5 * SQRT3 * 500.0**2)

    def test_positive_radius_required(self):
        with pytest.raises(ValueError):
            HexGrid(radius=0.0)


def line_net(points, lengths=None):
    """Chain network along the given points, one edge per consecutive pair."""
    nodes = {i: p for i, p in enumerate(points)}
    edges = {}
    for i in range(len(points) - 1):
        length = (
            lengths[i] if lengths is not None else math.dist(points[i], points[i + 1])
        )
        edges[i] = Edge(i, i + 1, length, 10.0)
    return RoadNetwork(nodes, edges)


class TestCellsAlong:
    def test_route_inside_one_cell(self):
        grid = HexGrid(radius=500.0)
        net = line_net([(-400.0, 0.0), (400.0, 0.0)])
        out = cells_along([0], grid, net)
        assert out == [((0, 0), pytest.approx(800.0))]

    def test_straight_edge_split_at_midpoint(self):
        grid = HexGrid(radius=500.0)
        # two neighbor centers on the x axis: (0,0) at x=0 and (1,0) at
        # x=sqrt(3)*500; their shared boundary bisects the segment
        c0 = grid.center((0, 0))
        c1 = grid.center((1, 0))
        net = line_net([c0, c1])
        out = dict(cells_along([0], grid, net))
        total = math.dist(c0, c1)
        assert out[(0, 0)] == pytest.approx(total / 2, rel=1e-9)
        assert out[(1, 0)] == pytest.approx(total / 2, rel=1e-9)

    def test_l_shaped_route_conserves_length(self):
        grid = HexGrid(radius=300.0)
        net = line_net([(-700.0, -100.0), (650.0, -100.0), (650.0, 900.0)])
        out = cells_along([0, 1], grid, net)
        assert len({c for c, _ in out}) >= 3
        assert sum(w for _, w in out) == pytest.approx(1350.0 + 1000.0, rel=1e-9)

    def test_declared_length_distributed_over_geometry(self):
        grid = HexGrid(radius=500.0)
        c0 = grid.center((0, 0))
        c1 = grid.center((1, 0))
        # curved edge: declared length exceeds the straight geometry
        net = line_net([c0, c1], lengths=[2000.0])
        out = dict(cells_along([0], grid, net))
        assert sum(out.values()) == pytest.approx(2000.0, rel=1e-9)
        assert out[(0, 0)] == pytest.approx(1000.0, rel=1e-9)

    def test_disconnected_route_rejected(self):
        grid = HexGrid(radius=500.0)
        net = line_net([(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)])
        with pytest.raises(ValueError, match="not connected"):
            cells_along([1, 0], grid, net)

    @given(
        coords=st.lists(
            st.tuples(st.floats(-3000, 3000), st.floats(-3000, 3000)),
            min_size=2,
            max_size=6,
        ),
        radius=st.floats(50.0, 800.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_conservation_property(self, coords, radius):
        pts = []
        for p in coords:  # drop consecutive duplicates: zero-length edges
            if not pts or math.dist(pts[-1], p) > 1e-6:
                pts.append(p)
        if len(pts) < 2:
            pts = [(0.0, 0.0), (100.0, 0.0)]
        grid = HexGrid(radius=radius)
        net = line_net(pts)
        out = cells_along(list(range(len(pts) - 1)), grid, net)
        total = sum(math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1))
        assert sum(w for _, w in out) == pytest.approx(total, rel=1e-6)
        assert all(w >= 0 for _, w in out)
