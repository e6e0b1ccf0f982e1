import numpy as np
import pytest

from snloc.edm_core import kappa
from snloc.errors import InvalidConfig, NotAClique, ParseError
from snloc.instance import (
    Instance,
    PartialEDM,
    average_degree,
    build_partial_edm,
    generate_instance,
    half_range_cliques,
    neighbor_set,
    read_problem,
    read_solution,
    write_problem,
    write_solution,
)

from helpers import complete_pedm, pedm_from_pairs


def test_generate_deterministic():
    a = generate_instance(5, 2, 2, seed=42, radio_range=0.3)
    b = generate_instance(5, 2, 2, seed=42, radio_range=0.3)
    assert np.array_equal(a.points, b.points)


def test_generate_in_unit_box():
    inst = generate_instance(500, 3, 3, seed=1, radio_range=0.2)
    assert np.all(inst.points >= 0.0) and np.all(inst.points <= 1.0)


def test_generate_uniform_mean():
    inst = generate_instance(100_000, 0, 2, seed=7, radio_range=0.1)
    mean = inst.points.mean(axis=0)
    assert np.all(mean > 0.49) and np.all(mean < 0.51)


def test_generate_rejects_bad_config():
    with pytest.raises(InvalidConfig):
        generate_instance(3, 3, 2, seed=0, radio_range=0.1)
    with pytest.raises(InvalidConfig):
        generate_instance(5, 2, 0, seed=0, radio_range=0.1)
    with pytest.raises(InvalidConfig):
        generate_instance(5, 2, 2, seed=0, radio_range=-1.0)


def test_noise_stream_does_not_move_points():
    quiet = generate_instance(50, 4, 2, seed=5, radio_range=0.4)
    noisy = generate_instance(50, 4, 2, seed=5, radio_range=0.4, noise_factor=1e-2)
    assert np.array_equal(quiet.points, noisy.points)


def test_build_exact_when_noiseless():
    inst = generate_instance(60, 4, 2, seed=3, radio_range=0.3)
    pedm = build_partial_edm(inst)
    for i, j, d2 in pedm.known_pairs():
        true = float(np.sum((inst.points[i] - inst.points[j]) ** 2))
        assert d2 == pytest.approx(true, rel=1e-12)


def test_build_threshold_is_strict():
    # two sensors placed just past the radio range stay unknown
    R = 0.5
    pts = np.array([[0.1, 0.1], [0.1 + R + 0.01, 0.1], [0.9, 0.9], [0.2, 0.8]])
    inst = Instance(n=4, m=0, r=2, points=pts, radio_range=R, noise_factor=0.0, seed=0)
    pedm = build_partial_edm(inst)
    assert not pedm.is_known(0, 1)
    pts2 = pts.copy()
    pts2[1, 0] = 0.1 + R - 0.01
    inst2 = Instance(n=4, m=0, r=2, points=pts2, radio_range=R, noise_factor=0.0, seed=0)
    assert build_partial_edm(inst2).is_known(0, 1)


def test_build_anchor_block_always_known_and_exact():
    inst = generate_instance(30, 5, 2, seed=9, radio_range=0.05, noise_factor=1e-2)
    pedm = build_partial_edm(inst)
    for a in pedm.anchor_block:
        for b in pedm.anchor_block:
            if a < b:
                true = float(np.sum((inst.points[a] - inst.points[b]) ** 2))
                assert pedm.value(a, b) == pytest.approx(true, rel=1e-14)


def test_build_symmetry():
    inst = generate_instance(80, 4, 2, seed=2, radio_range=0.3, noise_factor=1e-3)
    pedm = build_partial_edm(inst)
    for i, j, d2 in pedm.known_pairs():
        assert pedm.value(j, i) == d2


def test_noise_magnitude_half_normal():
    # mean relative error of sqrt(D) vs true distance ~ sigma*sqrt(2/pi)
    sigma = 1e-2
    inst = generate_instance(400, 0, 2, seed=13, radio_range=3.0, noise_factor=sigma)
    pedm = build_partial_edm(inst)
    rels = []
    for i, j, d2 in pedm.known_pairs():
        true = float(np.linalg.norm(inst.points[i] - inst.points[j]))
        rels.append(abs(np.sqrt(d2) - true) / true)
    assert len(rels) >= 10_000
    expected = sigma * np.sqrt(2.0 / np.pi)
    assert abs(np.mean(rels) - expected) <= 0.2 * expected


def test_noiseless_matches_centered_gram():
    inst = generate_instance(50, 4, 2, seed=21, radio_range=0.4)
    pedm = build_partial_edm(inst)
    P = inst.points - inst.points.mean(axis=0)
    D = kappa(P @ P.T)
    for i, j, d2 in pedm.known_pairs():
        assert abs(d2 - D[i, j]) <= 1e-12 * max(d2, 1e-30)


def test_half_range_isolated_node():
    pts = np.array([[0.0, 0.0], [10.0, 10.0], [20.0, 0.0]])
    pedm = pedm_from_pairs(pts, [], radio_range=1.0)
    seeds = half_range_cliques(pedm)
    assert seeds[0].members == (0,)
    assert all(s.center in s.members for s in seeds)


def test_half_range_collinear_trio():
    # spacing R/4: the middle node sees both others within R/2
    R = 1.0
    pts = np.array([[0.0, 0.0], [R / 4, 0.0], [R / 2, 0.0]])
    inst = Instance(n=3, m=0, r=2, points=pts, radio_range=R, noise_factor=0.0, seed=0)
    pedm = build_partial_edm(inst)
    seeds = half_range_cliques(pedm)
    assert seeds[1].members == (0, 1, 2)


def test_half_range_pairwise_known():
    inst = generate_instance(150, 4, 2, seed=5, radio_range=0.25, noise_factor=1e-2)
    pedm = build_partial_edm(inst)
    for seed in half_range_cliques(pedm):
        members = list(seed.members)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                assert pedm.is_known(members[a], members[b])


def test_neighbor_set():
    empty = PartialEDM(n=3, m=0, dim=2, radio_range=1.0)
    assert neighbor_set(empty, 0) == set()
    k4 = complete_pedm(np.random.default_rng(0).random((4, 2)))
    assert neighbor_set(k4, 1) == {0, 2, 3}
    inst = generate_instance(60, 0, 2, seed=8, radio_range=0.3)
    pedm = build_partial_edm(inst)
    for j in range(0, 60, 7):
        brute = {
            i
            for i in range(60)
            if i != j and np.linalg.norm(inst.points[i] - inst.points[j]) < 0.3
        }
        assert neighbor_set(pedm, j) == brute


def test_average_degree():
    k4 = complete_pedm(np.random.default_rng(0).random((4, 2)))
    assert average_degree(k4) == pytest.approx(3.0)
    path3 = pedm_from_pairs(np.array([[0.0, 0], [1, 0], [2, 0]]), [(0, 1), (1, 2)])
    assert average_degree(path3) == pytest.approx(4.0 / 3.0)
    inst = generate_instance(80, 4, 2, seed=4, radio_range=0.3)
    pedm = build_partial_edm(inst)
    brute = sum(len(neighbor_set(pedm, j)) for j in range(80)) / 80
    assert average_degree(pedm) == pytest.approx(brute)


def test_submatrix_requires_clique():
    pts = np.array([[0.0, 0], [1, 0], [2, 0]])
    pedm = pedm_from_pairs(pts, [(0, 1), (1, 2)])
    with pytest.raises(NotAClique):
        pedm.submatrix([0, 1, 2])


def test_problem_file_round_trip(tmp_path):
    inst = generate_instance(40, 4, 2, seed=6, radio_range=0.3, noise_factor=1e-3)
    pedm = build_partial_edm(inst)
    path = tmp_path / "problem.snl"
    write_problem(path, pedm, inst.anchors)
    got, anchors = read_problem(path)
    assert (got.n, got.m, got.dim) == (pedm.n, pedm.m, pedm.dim)
    assert got.radio_range == pedm.radio_range
    assert got.noise_factor == pedm.noise_factor
    assert np.array_equal(anchors, inst.anchors)
    assert sorted(got.known_pairs()) == sorted(pedm.known_pairs())


def test_problem_file_only_anchor_block(tmp_path):
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [0.3, 0.3], [0.4, 0.3], [0.3, 0.4]])
    inst = Instance(n=5, m=3, r=2, points=pts, radio_range=1e-6, noise_factor=0.0, seed=0)
    pedm = build_partial_edm(inst)
    path = tmp_path / "anchors_only.snl"
    write_problem(path, pedm, inst.anchors)
    got, _ = read_problem(path)
    pairs = list(got.known_pairs())
    assert all(i in got.anchor_block and j in got.anchor_block for i, j, _ in pairs)
    assert len(pairs) == 3


def test_problem_file_malformed_line(tmp_path):
    path = tmp_path / "bad.snl"
    path.write_text("snl v1 4 1 2 0.5 0\n1 2 0.25\n1 oops 0.3\nanchors\n0.1 0.2\n")
    with pytest.raises(ParseError) as err:
        read_problem(path)
    assert err.value.line == 3


def test_problem_file_bad_header(tmp_path):
    path = tmp_path / "bad.snl"
    path.write_text("nope\n")
    with pytest.raises(ParseError) as err:
        read_problem(path)
    assert err.value.line == 1


def test_solution_file_round_trip(tmp_path):
    positioned = {3: np.array([0.25, 0.5]), 1: np.array([0.1, 0.9])}
    path = tmp_path / "out.sol"
    write_solution(path, positioned)
    got = read_solution(path)
    assert set(got) == {1, 3}
    assert np.array_equal(got[3], positioned[3])
