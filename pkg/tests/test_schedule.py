# Initialize MPI
from mpi4py import MPI
comm = MPI.COMM_WORLD

import math

import numpy as np
import pytest

from pymotiontools.errors import ConfigError
from pymotiontools.model.schedule import build_schedule, dyadic_depth


def test_schedule_ten_frames():

    s = build_schedule(10)

    t1 = s.node_counts() == [5, 3, 2, 1, 1, 1, 1, 1, 1]
    t2 = s.bsme_counts() == [5, 2, 1, 1, 1, 1, 1, 1, 1]
    t3 = s.dyadic_depth == 4 and s.l_m == 5 and s.n_levels == 9
    t4 = [n.extra_frame for n in s.levels[0]] == [2, 4, 6, 8, 10]
    t5 = [n.extra_frame for n in s.levels[1] if n.kind == "bsme"] == [4, 8]
    t6 = s.levels[1][2].kind == "carry" and s.levels[1][2].sources == ((1, 4),)
    t7 = all(level[0].extra_frame == 10 for level in s.levels[4:])
    t8 = all(level[0].sources == s.levels[3][0].sources for level in s.levels[4:])

    passed = np.all([t1, t2, t3, t4, t5, t6, t7, t8])

    assert passed


def test_schedule_small_inputs():

    s2 = build_schedule(2)
    s4 = build_schedule(4)

    t1 = s2.node_counts() == [1] and s2.levels[0][0].extra_frame == 2
    t2 = s2.levels[0][0].sources == ((0, 0), (0, 1))
    t3 = s4.node_counts() == [2, 1, 1]
    t4 = [n.extra_frame for n in s4.levels[0]] == [2, 4]
    t5 = s4.levels[1][0].extra_frame == 4 and s4.levels[2][0].extra_frame == 4

    passed = np.all([t1, t2, t3, t4, t5])

    assert passed


@pytest.mark.parametrize("T", list(range(2, 33)))
def test_schedule_structure(T):

    s = build_schedule(T)
    frames = tuple(range(1, T + 1))
    checks = []

    checks.append(s.n_levels == T - 1)
    checks.append(s.dyadic_depth == math.ceil(math.log2(T)))

    for l in range(1, s.dyadic_depth + 1):
        level = s.levels[l - 1]
        # Node supports tile the input frames in order, each one contiguous
        tiled = tuple(f for node in level for f in node.support)
        checks.append(tiled == frames)
        checks.append(all(node.support == tuple(range(node.support[0], node.support[-1] + 1)) for node in level))
        checks.append(len(level) == math.ceil(T / 2**l))
        for j, node in enumerate(level, start=1):
            if node.kind == "bsme":
                checks.append(node.extra_frame == min(2**l * j, T))
                checks.append(1 <= node.extra_frame <= T)

    checks.append(len(s.levels[s.dyadic_depth - 1]) == 1)
    checks.append(s.levels[s.dyadic_depth - 1][0].support == frames)
    checks.append(all(len(level) == 1 and level[0].extra_frame == T for level in s.levels[s.dyadic_depth :]))

    passed = np.all(checks)

    assert passed


def test_dyadic_depth_integer():

    t1 = [dyadic_depth(T) for T in (2, 3, 4, 5, 8, 9, 16, 17)] == [1, 2, 2, 3, 3, 4, 4, 5]
    t2 = dyadic_depth(1) == 0

    assert t1 and t2


@pytest.mark.parametrize("T", [1, 0, -3])
def test_schedule_rejects_short_inputs(T):

    with pytest.raises(ConfigError):
        build_schedule(T)
