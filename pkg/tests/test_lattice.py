from fractions import Fraction
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergoqca.errors import DimensionError, MoveError, ValidityError
from ergoqca.lattice import (
    FULL,
    LEFT,
    RIGHT,
    BrickMove,
    ClockConfig,
    Dims,
    apply_move,
    apply_move_reverse,
    backward_moves,
    base_winding,
    bfs_levels,
    brick_count,
    brute_force_configs,
    closure_violations,
    enumerate_configs,
    flat_config,
    forward_moves,
    is_valid,
    lattice,
    pattern_counts,
    staircase_config,
    weight_sums,
)

SMALL = [Dims(2, 6), Dims(2, 8), Dims(4, 10), Dims(4, 12)]

# frozen from the brute-force validity filter (c**h assignments)
FROZEN_COUNTS = {(2, 6): 12, (2, 8): 16, (4, 10): 80, (4, 12): 96, (6, 14): 448, (4, 20): 160}


def configs_and_dims():
    return st.sampled_from(SMALL).flatmap(
        lambda d: st.tuples(st.just(d), st.sampled_from(enumerate_configs(d)))
    )


@pytest.mark.parametrize("h,c", [(1, 6), (3, 8), (2, 5), (2, 4), (4, 8), (0, 6)])
def test_bad_dims_rejected(h, c):
    with pytest.raises(DimensionError):
        Dims(h, c)


def test_g():
    assert Dims(2, 6).g == 9
    assert Dims(4, 10).g == 25


@pytest.mark.parametrize("dims", SMALL, ids=str)
def test_enumeration_matches_brute_force(dims):
    assert enumerate_configs(dims) == brute_force_configs(dims)


@pytest.mark.parametrize("hc,count", sorted(FROZEN_COUNTS.items()))
def test_frozen_counts(hc, count):
    assert len(enumerate_configs(Dims(*hc))) == count


def test_two_choices_per_j0():
    dims = Dims(2, 6)
    configs = enumerate_configs(dims)
    for j0 in range(6):
        assert sum(a[0] == j0 for a in configs) == 2
    assert ClockConfig((0, 0)) in configs


def test_canonical_order_and_index():
    lat = lattice(Dims(4, 10))
    assert list(lat.configs) == sorted(lat.configs)
    assert all(lat.index[a.front] == i for i, a in enumerate(lat.configs))


def test_validity_examples():
    dims = Dims(2, 6)
    assert is_valid((0, 0), dims)
    assert is_valid((0, 5), dims)  # c_0 = 0 allows a step down across the wrap
    assert not is_valid((0, 1), dims)
    assert not is_valid((0, 3), dims)
    assert not is_valid((0, 0, 0), dims)
    with pytest.raises(ValidityError):
        forward_moves(ClockConfig((0, 2)), dims)


def test_flat_wall_moves():
    dims = Dims(2, 6)
    flat = flat_config(dims)
    assert forward_moves(flat, dims) == [BrickMove(FULL, 0, 0)]
    # the last bricks below the flat wall are the two half bricks of row c-1
    assert sorted(backward_moves(flat, dims), key=str) == sorted(
        [BrickMove(LEFT, 5, -1), BrickMove(RIGHT, 5, 1)], key=str
    )


def test_apply_examples():
    dims = Dims(2, 6)
    a = apply_move(flat_config(dims), BrickMove(FULL, 0, 0), dims)
    assert a == ClockConfig((1, 1))
    b = apply_move(a, BrickMove(LEFT, 1, -1), dims)
    assert b == ClockConfig((2, 1))
    with pytest.raises(MoveError):
        apply_move(a, BrickMove(FULL, 1, 0), dims)
    with pytest.raises(MoveError):
        apply_move_reverse(flat_config(dims), BrickMove(FULL, 5, 0), dims)


@pytest.mark.parametrize("dims", [Dims(2, 6), Dims(4, 10), Dims(6, 14)], ids=str)
def test_staircase(dims):
    a = staircase_config(dims)
    assert a in enumerate_configs(dims)
    moves = forward_moves(a, dims)
    assert len(moves) == 1
    assert moves[0].kind == RIGHT
    assert math.isclose(moves[0].weight, 1 / math.sqrt(2))
    a2 = apply_move(a, moves[0], dims)
    assert len(backward_moves(a2, dims)) == 2


@pytest.mark.parametrize("dims", SMALL, ids=str)
def test_closure(dims):
    assert closure_violations(dims) == []


@pytest.mark.parametrize("dims", SMALL, ids=str)
def test_weight_identity_exact(dims):
    for a in enumerate_configs(dims):
        fw, bw = weight_sums(a, dims)
        assert isinstance(fw, Fraction)
        assert fw == bw


@pytest.mark.parametrize("dims", SMALL, ids=str)
def test_forward_weight_from_front(dims):
    for a in enumerate_configs(dims):
        fw, _ = weight_sums(a, dims)
        halves = Fraction(a[0] % 2 + a[dims.h - 1] % 2, 2)
        fulls = sum(1 for k in range(dims.h - 1) if a[k] == a[k + 1] and (a[k] + k) % 2 == 0)
        assert fw == fulls + halves


def test_pattern_counts():
    assert pattern_counts(ClockConfig((2, 1))) == (0, 0)
    assert pattern_counts(ClockConfig((0, 0, 0, 0))) == (1, 2)
    assert pattern_counts(ClockConfig((1, 1, 0, 9))) == (1, 0)


def test_flat_brick_count_zero():
    for dims in SMALL:
        assert brick_count(flat_config(dims), dims) == 0
        assert base_winding(flat_config(dims), dims) == 0


@pytest.mark.parametrize("dims", [Dims(2, 6), Dims(2, 8), Dims(4, 10)], ids=str)
def test_brick_count_matches_bfs(dims):
    # BFS from the flat wall never wraps past level g, so it is an independent check
    levels = bfs_levels(dims)
    g = dims.g
    for front, level in levels.items():
        a = ClockConfig(front)
        if level < g:
            assert brick_count(a, dims) == level


def test_tilted_wall_only_reachable_across_wrap():
    # flat wall plus brick (0,0) minus the right half brick of row 9
    dims = Dims(4, 10)
    a = ClockConfig((1, 1, 0, 9))
    assert a in enumerate_configs(dims)
    assert brick_count(a, dims) == 0
    assert bfs_levels(dims)[a.front] == dims.g


@settings(max_examples=200, deadline=None)
@given(configs_and_dims())
def test_forward_moves_grade_by_one(pair):
    dims, a = pair
    for m in forward_moves(a, dims):
        b = apply_move(a, m, dims)
        assert b.front in lattice(dims).index
        assert brick_count(b, dims) == (brick_count(a, dims) + 1) % dims.g
        assert m in backward_moves(b, dims)
        assert apply_move_reverse(b, m, dims) == a


@settings(max_examples=200, deadline=None)
@given(configs_and_dims())
def test_backward_moves_invert(pair):
    dims, a = pair
    for m in backward_moves(a, dims):
        b = apply_move_reverse(a, m, dims)
        assert b.front in lattice(dims).index
        assert m in forward_moves(b, dims)
        assert apply_move(b, m, dims) == a


def test_wrap_of_g_moves_returns_to_flat():
    dims = Dims(2, 6)
    a = flat_config(dims)
    seen = 0
    while True:
        moves = forward_moves(a, dims)
        a = apply_move(a, moves[0], dims)
        seen += 1
        if a == flat_config(dims):
            break
        assert seen < 10 * dims.g
    assert seen % dims.g == 0


def test_export_csv():
    text = lattice(Dims(2, 6)).export_csv()
    rows = text.strip().splitlines()
    assert rows[0] == "index,j_0,j_1,brick_count"
    assert len(rows) == 13
    assert rows[1] == "0,0,0,0"
