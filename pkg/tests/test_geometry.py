import numpy as np
import pytest

from slpc.geometry import (CellId, PolygonalLine, chain_losses, local_grid,
                           loss, nearest_point_on_chain,
                           observation_neighborhood, project_to_segment,
                           projection_index, projection_segment,
                           voronoi_assign)
from slpc.lattice import LatticeGrid


def rand_line(rng, d=2, max_k=5, scale=3.0):
    while True:
        k = rng.integers(1, max_k + 1)
        v = rng.uniform(-scale, scale, size=(k + 1, d))
        if not np.any(np.all(np.isclose(v[1:], v[:-1]), axis=1)):
            return PolygonalLine(v)


class TestPolygonalLine:
    def test_basic_properties(self):
        f = PolygonalLine([(0, 0), (1, 0), (1, 1)])
        assert f.segment_count == 2
        assert f.length == pytest.approx(2.0)
        assert f.dim == 2

    def test_single_vertex(self):
        f = PolygonalLine([(1.0, 2.0)])
        assert f.segment_count == 0
        assert f.length == 0.0

    def test_rejects_repeated_consecutive_vertices(self):
        with pytest.raises(ValueError):
            PolygonalLine([(0, 0), (0, 0), (1, 1)])

    def test_reversal_canonicalization(self):
        f = PolygonalLine([(0, 0), (1, 0), (2, 1)])
        g = f.reversed()
        assert f == g
        assert hash(f) == hash(g)
        assert f.canonical_key() == g.canonical_key()


class TestProjectToSegment:
    def test_perpendicular_foot(self):
        t, foot, d2 = project_to_segment((1, 3), (0, 0), (2, 0))
        assert t == pytest.approx(0.5)
        assert foot == pytest.approx([1, 0])
        assert d2 == pytest.approx(9.0)

    def test_clamped_to_start(self):
        t, foot, d2 = project_to_segment((-1, 0), (0, 0), (2, 0))
        assert (t, d2) == (0.0, pytest.approx(1.0))
        assert foot == pytest.approx([0, 0])

    def test_clamped_to_end(self):
        t, foot, d2 = project_to_segment((3, 4), (0, 0), (2, 0))
        assert (t, d2) == (1.0, pytest.approx(17.0))
        assert foot == pytest.approx([2, 0])

    def test_degenerate_segment(self):
        t, foot, d2 = project_to_segment((1, 1), (2, 0), (2, 0))
        assert t == 0.0
        assert foot == pytest.approx([2, 0])
        assert d2 == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            project_to_segment((1, 2, 3), (0, 0), (1, 1))


class TestLoss:
    def test_corner_is_nearest(self):
        f = PolygonalLine([(0, 0), (1, 0), (1, 1)])
        assert loss(f, (2, 2)) == pytest.approx(2.0)

    def test_on_curve_point(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        assert loss(f, (0.5, 0)) == pytest.approx(0.0)

    def test_perpendicular(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        assert loss(f, (0.5, -1)) == pytest.approx(1.0)

    def test_matches_dense_arc_sampling(self):
        # oracle: minimize over a dense arc-length sampling of the line
        rng = np.random.default_rng(0)
        for _ in range(300):
            f = rand_line(rng)
            x = rng.uniform(-4, 4, size=2)
            dense = _dense_min_sqdist(f, x, step=1e-3)
            assert loss(f, x) == pytest.approx(dense, abs=1e-6)

    def test_chain_losses_agrees_with_scalar(self):
        rng = np.random.default_rng(1)
        f = rand_line(rng, max_k=4)
        X = rng.uniform(-4, 4, size=(40, 2))
        batch = chain_losses(f.vertices, X)
        for x, b in zip(X, batch):
            assert loss(f, x) == pytest.approx(b, rel=1e-12)


def _dense_min_sqdist(f, x, step):
    best = np.inf
    v = f.vertices
    for a, b in zip(v[:-1], v[1:]):
        seg = np.linalg.norm(b - a)
        n = max(2, int(np.ceil(seg / step)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        pts = a + ts[:, None] * (b - a)
        best = min(best, float(np.min(np.sum((pts - x) ** 2, axis=1))))
    return best


class TestProjectionIndex:
    def test_interior_foot(self):
        f = PolygonalLine([(0, 0), (2, 0)])
        assert projection_index(f, (1, 1)) == pytest.approx(1.0)

    def test_sup_rule_on_tie(self):
        f = PolygonalLine([(0, 0), (1, 0), (1, 1), (0, 1)])
        # (0, 0.5) is equidistant from arc positions 0 and 3
        assert projection_index(f, (0, 0.5)) == pytest.approx(3.0)

    def test_on_curve_point(self):
        f = PolygonalLine([(0, 0), (1, 0), (1, 1)])
        assert projection_index(f, (1, 0.5)) == pytest.approx(1.5)

    def test_sup_rule_random_symmetric_ties(self):
        # symmetric hat: apex projects at equal distance onto both slopes
        f = PolygonalLine([(-1, 0), (0, 1), (1, 0)])
        s = projection_index(f, (0, 0.25))
        feasible = _dense_argmin_positions(f, (0, 0.25))
        # oracle resolution is bounded by its sampling step
        assert s == pytest.approx(max(feasible), abs=5e-4)
        assert s > f.length / 2  # the sup rule picked the later foot

    def test_single_vertex_rejected(self):
        with pytest.raises(ValueError):
            projection_index(PolygonalLine([(0, 0)]), (1, 1))


def _dense_argmin_positions(f, x, step=1e-4):
    v = f.vertices
    seg_len = np.linalg.norm(np.diff(v, axis=0), axis=1)
    offs = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))
    positions, dists = [], []
    for i, (a, b) in enumerate(zip(v[:-1], v[1:])):
        n = max(2, int(np.ceil(seg_len[i] / step)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        pts = a + ts[:, None] * (b - a)
        d = np.sum((pts - np.asarray(x, float)) ** 2, axis=1)
        positions.extend(offs[i] + ts * seg_len[i])
        dists.extend(d)
    dists = np.asarray(dists)
    positions = np.asarray(positions)
    return positions[dists <= dists.min() + 1e-9]


class TestVoronoiAssign:
    @pytest.mark.parametrize("x,expected", [
        ((-1, 1), CellId("vertex", 1)),
        ((0.5, 2), CellId("segment", 1)),
        ((2, 0), CellId("vertex", 2)),
    ])
    def test_two_vertex_line(self, x, expected):
        f = PolygonalLine([(0, 0), (1, 0)])
        assert voronoi_assign(f, x) == expected

    def test_every_point_gets_exactly_one_cell(self):
        rng = np.random.default_rng(2)
        f = rand_line(rng, max_k=4)
        k = f.segment_count
        valid = {CellId("vertex", i) for i in range(1, k + 2)}
        valid |= {CellId("segment", i) for i in range(1, k + 1)}
        for _ in range(200):
            cell = voronoi_assign(f, rng.uniform(-5, 5, 2))
            assert cell in valid

    def test_interior_slab_beats_vertices(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        assert voronoi_assign(f, (1e-4, 5)) == CellId("segment", 1)

    def test_degenerate_line_rejected(self):
        with pytest.raises(ValueError):
            voronoi_assign(PolygonalLine([(0, 0)]), (1, 1))


class TestProjectionSegment:
    def test_shared_vertex_goes_to_later_segment(self):
        f = PolygonalLine([(0, 0), (1, 0), (2, 0)])
        # (1, 1) projects exactly onto the shared vertex v_2
        assert projection_segment(f, (1, 1)) == 2

    def test_final_vertex_maps_to_last_segment(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        assert projection_segment(f, (5, 0)) == 1


class TestObservationNeighborhood:
    def test_cells_near_the_end(self):
        f = PolygonalLine([(0, 0), (1, 0), (2, 0), (3, 0)])
        nb = observation_neighborhood(f, [], (2.5, 1))
        assert nb.cells == frozenset({
            CellId("segment", 2), CellId("vertex", 3),
            CellId("segment", 3), CellId("vertex", 4)})

    def test_cells_near_the_start_against_bruteforce(self):
        f = PolygonalLine([(0, 0), (1, 0), (2, 0), (3, 0)])
        nb = observation_neighborhood(f, [], (0.5, 1))
        assert nb.cells == _bruteforce_cells(f, (0.5, 1))
        assert nb.cells == frozenset({
            CellId("vertex", 1), CellId("segment", 1),
            CellId("vertex", 2), CellId("segment", 2)})

    def test_random_cells_match_bruteforce(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            f = rand_line(rng, max_k=5)
            x = rng.uniform(-4, 4, 2)
            nb = observation_neighborhood(f, [], x)
            assert nb.cells == _bruteforce_cells(f, x)

    def test_members_mean_and_diameter(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        hist = [(0.0, 0.0), (2.0, 0.0)]
        nb = observation_neighborhood(f, hist, (0.5, 0.2))
        assert sorted(map(tuple, nb.members)) == [(0.0, 0.0), (2.0, 0.0)]
        assert nb.mean == pytest.approx([1.0, 0.0])
        assert nb.diameter == pytest.approx(2.0)

    def test_empty_history_falls_back_to_x(self):
        f = PolygonalLine([(0, 0), (1, 0)])
        nb = observation_neighborhood(f, [], (0.3, 0.4))
        assert nb.members.shape == (0, 2)
        assert nb.mean == pytest.approx([0.3, 0.4])
        assert nb.diameter == 0.0

    def test_members_respect_cell_assignment(self):
        rng = np.random.default_rng(4)
        f = rand_line(rng, max_k=4)
        hist = rng.uniform(-4, 4, size=(60, 2))
        x = rng.uniform(-4, 4, 2)
        nb = observation_neighborhood(f, hist, x)
        member_keys = {tuple(m) for m in nb.members}
        for h in hist:
            inside = voronoi_assign(f, h) in nb.cells
            assert (tuple(h) in member_keys) == inside

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            f = rand_line(rng, max_k=4)
            hist = rng.uniform(-3, 3, size=(20, 2))
            x = rng.uniform(-3, 3, 2)
            shift = rng.uniform(-10, 10, 2)
            nb = observation_neighborhood(f, hist, x)
            nb2 = observation_neighborhood(
                PolygonalLine(f.vertices + shift), hist + shift, x + shift)
            assert nb2.cells == nb.cells
            assert nb2.mean == pytest.approx(nb.mean + shift)
            assert nb2.diameter == pytest.approx(nb.diameter)
            assert len(nb2.members) == len(nb.members)


def _bruteforce_cells(f, x):
    """Cells whose closure combinatorially contains one of the two vertices
    adjacent to the projection's segment."""
    i = projection_segment(f, x)
    k = f.segment_count
    adjacent = {i, i + 1}
    cells = set()
    for j in range(1, k + 2):
        if j in adjacent:
            cells.add(CellId("vertex", j))
    for j in range(1, k + 1):
        if {j, j + 1} & adjacent:
            cells.add(CellId("segment", j))
    return frozenset(cells)


class TestLocalGrid:
    def test_small_ball_on_small_grid(self):
        # grid radius sqrt(2)*0.9 < sqrt(2), so (±1, ±1) are not grid points
        grid = LatticeGrid(2, 0.9, 1.0)
        nb = _nb(mean=(0, 0), diameter=1.5)
        pts = sorted(map(tuple, local_grid(grid, nb)))
        assert pts == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]

    def test_ball_on_larger_grid_keeps_diagonals(self):
        # oracle: lattice enumeration; radius 1.5 reaches the diagonals
        grid = LatticeGrid(2, 2.0, 1.0)
        nb = _nb(mean=(0, 0), diameter=1.5)
        assert len(local_grid(grid, nb)) == 9

    def test_zero_radius_on_lattice_point(self):
        grid = LatticeGrid(2, 2.0, 1.0)
        nb = _nb(mean=(1.0, 0.0), diameter=0.0)
        assert [(1.0, 0.0)] == list(map(tuple, local_grid(grid, nb)))

    def test_off_center_ball(self):
        grid = LatticeGrid(2, 2.0, 1.0)
        nb = _nb(mean=(0.4, 0.0), diameter=1.0)
        assert sorted(map(tuple, local_grid(grid, nb))) == [(0, 0), (1, 0)]


def _nb(mean, diameter):
    from slpc.geometry import NeighborhoodInfo
    return NeighborhoodInfo(cells=frozenset(),
                            members=np.empty((0, len(mean))),
                            mean=np.asarray(mean, float),
                            diameter=float(diameter))


class TestNearestPointOnChain:
    def test_matches_loss(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            f = rand_line(rng, max_k=4)
            x = rng.uniform(-4, 4, 2)
            foot = nearest_point_on_chain(f.vertices, x)
            assert float(np.sum((x - foot) ** 2)) == pytest.approx(
                loss(f, x), rel=1e-10, abs=1e-12)
