import math

import pytest

from anchorroute.netgraph import (
    Building,
    Edge,
    NetworkFormatError,
    RoadNetwork,
    Trip,
    filter_trips,
    load_buildings,
    load_network,
    load_pois,
    load_trips,
    save_buildings,
    save_network,
    save_pois,
    save_trips,
)


def write(tmp_path, text, name="net.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadNetwork:
    def test_small_file_readback(self, tmp_path):
        p = write(
            tmp_path,
            "# toy network\n"
            "N 1 0.0 0.0\n"
            "N 2 100.0 0.0\n"
            "N 3 100.0 100.0\n"
            "E 10 1 2 100.0 8.5\n"
            "E 11 2 3 100.0\n",
        )
        net = load_network(p)
        assert net.n_nodes == 3
        assert net.n_edges == 2
        assert net.edges[10].speed == 8.5
        assert net.edges[10].duration == 100.0 / 8.5
        assert net.edges[11].speed is None

    def test_dangling_endpoint(self, tmp_path):
        p = write(tmp_path, "N 1 0 0\nE 5 1 99 10.0\n")
        with pytest.raises(NetworkFormatError, match="missing head node 99"):
            load_network(p)

    def test_nonpositive_length(self, tmp_path):
        p = write(tmp_path, "N 1 0 0\nN 2 1 0\nE 5 1 2 -5\n")
        with pytest.raises(NetworkFormatError, match="nonpositive length"):
            load_network(p)

    def test_parse_error_carries_line_number(self, tmp_path):
        p = write(tmp_path, "N 1 0 0\nE 5 1 bogus\n")
        with pytest.raises(NetworkFormatError, match="line 2"):
            load_network(p)

    def test_roundtrip_bit_exact(self, tmp_path):
        nodes = {1: (0.125, -3.7000000000000002), 2: (1e-9, 2.0**-40), 3: (5.5, 9.1)}
        edges = {
            7: Edge(1, 2, 123.45600000000002, 8.333333333333334),
            8: Edge(2, 3, math.pi * 100, None),
            9: Edge(3, 1, 250.0, 7.7, geometry=((5.5, 9.1), (3.0, 4.0), (0.125, -3.7000000000000002))),
        }
        net = RoadNetwork(nodes, edges)
        p = tmp_path / "round.txt"
        save_network(net, p)
        back = load_network(p)
        assert back.nodes == net.nodes
        for eid in edges:
            assert back.edges[eid] == net.edges[eid]


class TestLayerFiles:
    def test_buildings_roundtrip_and_consistency(self, tmp_path):
        b = Building(footprint=((0.0, 0.0), (20.0, 0.0), (20.0, 10.0), (0.0, 10.0)), floors=4)
        p = tmp_path / "b.jsonl"
        save_buildings([b], p)
        back = load_buildings(p)
        assert back[0].area == pytest.approx(200.0)
        assert back[0].perimeter == pytest.approx(60.0)
        assert back[0].floors == 4

    def test_building_declared_area_mismatch(self, tmp_path):
        p = write(tmp_path, '{"footprint": [[0,0],[10,0],[10,10],[0,10]], "area": 55}\n', "b.jsonl")
        with pytest.raises(NetworkFormatError, match="area"):
            load_buildings(p)

    def test_pois_unknown_category(self, tmp_path):
        p = write(tmp_path, '{"location": [1, 2], "category": "casino"}\n', "p.jsonl")
        with pytest.raises(NetworkFormatError, match="casino"):
            load_pois(p)

    def test_pois_roundtrip(self, tmp_path):
        from anchorroute.netgraph import Poi

        p = tmp_path / "p.jsonl"
        save_pois([Poi((1.5, 2.5), "parks")], p)
        assert load_pois(p)[0] == Poi((1.5, 2.5), "parks")

    def test_trips_roundtrip(self, tmp_path, path_net):
        trips = [
            Trip(edges=(0, 2), depart=27000.0, occupied=True, speed_samples=((0, 8.3), (2, 9.0))),
            Trip(edges=(3,), depart=100.5, occupied=False),
        ]
        p = tmp_path / "t.txt"
        save_trips(trips, p)
        assert load_trips(p, path_net) == trips

    def test_trip_disconnected_edges_rejected(self, tmp_path, path_net):
        p = write(tmp_path, "T 0 1 1,2\n", "t.txt")  # edge 1 heads to node 0, edge 2 leaves node 1
        with pytest.raises(NetworkFormatError, match="not connected"):
            load_trips(p, path_net)


class TestFilterTrips:
    @staticmethod
    def net_with_speed(length, speed):
        nodes = {0: (0.0, 0.0), 1: (length, 0.0)}
        return RoadNetwork(nodes, {0: Edge(0, 1, length, speed)})

    def test_trip_inside_bounds_kept(self):
        net = self.net_with_speed(2000.0, 2000.0 / 600.0)  # 2 km in 600 s
        trips = [Trip(edges=(0,), depart=0.0)]
        assert filter_trips(trips, net) == trips

    def test_short_distance_dropped(self):
        net = self.net_with_speed(500.0, 500.0 / 600.0)  # 0.5 km in 600 s
        assert filter_trips([Trip(edges=(0,), depart=0.0)], net) == []

    def test_long_duration_dropped(self):
        net = self.net_with_speed(10000.0, 10000.0 / 19000.0)  # 10 km in 19000 s
        assert filter_trips([Trip(edges=(0,), depart=0.0)], net) == []

    def test_unknown_edge_rejected(self, path_net):
        with pytest.raises(NetworkFormatError, match="unknown edge"):
            filter_trips([Trip(edges=(42,), depart=0.0)], path_net)
