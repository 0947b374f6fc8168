"""Pairing plan of the multi-grained trajectory pyramid"""

from dataclasses import dataclass, field
from typing import Optional

from ..errors import ConfigError


@dataclass(frozen=True)
class ScheduleNode:
    """
    One node of a pyramid level.

    Attributes
    ----------
    kind : str
        "bsme" for a BSME call, "carry" for an output copied unchanged from the previous level.
    sources : tuple
        (level, index) references of the inputs. Level 0 are the encoder outputs,
        indexes are 0-based positions in that level's output list.
        A BSME has (previous, current), a carry has a single source.
    extra_frame : int or None
        1-based input frame whose encoding feeds the extra interface. None for carries.
    support : tuple
        1-based input frames the node output depends on.
    """

    kind: str
    sources: tuple
    extra_frame: Optional[int]
    support: tuple


@dataclass
class LevelSchedule:
    """
    Pyramid plan for T input frames.

    Attributes
    ----------
    T : int
        Number of input frames.
    levels : list
        levels[l - 1] is the ordered node list of level l, l = 1 .. T-1.
    dyadic_depth : int
        ceil(log2 T). Levels up to this one halve the node count.
    """

    T: int
    levels: list = field(default_factory=list)
    dyadic_depth: int = 0

    @property
    def l_m(self) -> int:
        """Number of levels stacked above the dyadic ones."""
        return self.T - 1 - self.dyadic_depth

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def node_counts(self) -> list:
        return [len(level) for level in self.levels]

    def bsme_counts(self) -> list:
        return [sum(1 for node in level if node.kind == "bsme") for level in self.levels]


def dyadic_depth(T: int) -> int:
    """ceil(log2 T) for T >= 1, in exact integer arithmetic."""
    return (T - 1).bit_length()


def build_schedule(T: int) -> LevelSchedule:
    """
    Build the pairing plan of the pyramid.

    Level 1 pairs consecutive encoder outputs, and each following dyadic level pairs
    consecutive outputs of the level below. An unpaired last output is carried to the
    next level unchanged. Node j of level l reads the extra interface from frame
    min(2^l j, T). Above the dyadic levels, every level holds one BSME fed with the
    same pair as the last dyadic BSME and frame T on the extra interface, until there
    are T-1 levels.

    Parameters
    ----------
    T : int
        Number of input frames, at least 2.

    Returns
    -------
    LevelSchedule
        The plan.

    Examples
    --------
    >>> build_schedule(10).node_counts()
    [5, 3, 2, 1, 1, 1, 1, 1, 1]
    """

    if T < 2:
        raise ConfigError(f"The input length T must be at least 2, got {T}")

    depth = dyadic_depth(T)
    schedule = LevelSchedule(T=T, dyadic_depth=depth)

    # Supports of the outputs of the level below
    below = [(j,) for j in range(1, T + 1)]

    for level in range(1, depth + 1):
        nodes = []
        n_pairs = len(below) // 2
        for j in range(1, n_pairs + 1):
            a, b = 2 * (j - 1), 2 * (j - 1) + 1
            nodes.append(
                ScheduleNode(
                    kind="bsme",
                    sources=((level - 1, a), (level - 1, b)),
                    extra_frame=min(2**level * j, T),
                    support=below[a] + below[b],
                )
            )
        if len(below) % 2 == 1:
            nodes.append(
                ScheduleNode(
                    kind="carry",
                    sources=((level - 1, len(below) - 1),),
                    extra_frame=None,
                    support=below[-1],
                )
            )
        schedule.levels.append(nodes)
        below = [node.support for node in nodes]

    top = schedule.levels[depth - 1][0]
    for _ in range(depth + 1, T):
        schedule.levels.append([ScheduleNode(kind="bsme", sources=top.sources, extra_frame=T, support=top.support)])

    return schedule


def reachable_nodes(schedule: LevelSchedule, levels) -> set:
    """
    Nodes whose outputs feed the given levels.

    Parameters
    ----------
    schedule : LevelSchedule
        Pairing plan.
    levels : iterable of int
        1-based levels whose every node output is consumed.

    Returns
    -------
    set
        (level, index) pairs, index 0-based. Encoder outputs (level 0) are not listed.
    """

    stack = [(l, i) for l in levels for i in range(len(schedule.levels[l - 1]))]
    seen = set()
    while stack:
        l, i = stack.pop()
        if l == 0 or (l, i) in seen:
            continue
        seen.add((l, i))
        stack.extend(schedule.levels[l - 1][i].sources)
    return seen
