"""Stock quivers: loops, Kronecker-type pairs, chains, and commuting grids.

The grid builders also produce the commutation relations (one per interior
vertex: going down-then-left equals left-then-down), and
:func:`sigma_from_multiplicities` maps per-vertex multiplicities to the
sigma weights used by the deformed Hermite-Einstein reduction, where each
vertex's weight equals its multiplicity.
"""
from __future__ import annotations

from .quiver import Path, Quiver, Relation


def loop_quiver(name: str = "phi") -> Quiver:
    """One vertex, one loop arrow (Higgs-type data at a point)."""
    return Quiver.from_lists(["v"], [(name, "v", "v")])


def kronecker_quiver(n_arrows: int = 1) -> Quiver:
    """Two vertices 1 -> 2 with n parallel arrows."""
    return Quiver.from_lists(
        ["1", "2"], [(f"a{i}", "1", "2") for i in range(n_arrows)]
    )


def two_way_quiver() -> Quiver:
    """Two vertices and one arrow in each direction (indefinite-signature
    pair data at a point)."""
    return Quiver.from_lists(["1", "2"], [("a", "1", "2"), ("b", "2", "1")])


def chain_quiver(length: int) -> Quiver:
    """Vertices 0..length with arrows i -> i+1."""
    vertices = [str(i) for i in range(length + 1)]
    arrows = [(f"a{i}", str(i), str(i + 1)) for i in range(length)]
    return Quiver.from_lists(vertices, arrows)


def _grid_vertex(i: int, j: int) -> str:
    return f"{i},{j}"


def grid_quiver(rows: int, cols: int, triangular: bool = False) -> Quiver:
    """Commuting-square grid on Z^2 coordinates, arrows decreasing each
    coordinate: a1 steps (i, j) -> (i-1, j) and a2 steps (i, j) -> (i, j-1).
    ``triangular`` keeps only the i + j <= rows - 1 wedge."""
    vertices = []
    arrows = []
    for i in range(rows):
        for j in range(cols):
            if triangular and i + j > rows - 1:
                continue
            vertices.append(_grid_vertex(i, j))
    vset = set(vertices)
    for v in vertices:
        i, j = map(int, v.split(","))
        if _grid_vertex(i - 1, j) in vset:
            arrows.append((f"a1[{v}]", v, _grid_vertex(i - 1, j)))
        if _grid_vertex(i, j - 1) in vset:
            arrows.append((f"a2[{v}]", v, _grid_vertex(i, j - 1)))
    return Quiver.from_lists(vertices, arrows)


def grid_relations(quiver: Quiver) -> list[Relation]:
    """One commutation relation per vertex where both composites exist:
    a2 after a1 equals a1 after a2 (paths written target-to-source)."""
    names = {a.name for a in quiver.arrows}
    rels = []
    for v in quiver.vertices:
        i, j = map(int, v.split(","))
        down = f"a1[{v}]"
        left = f"a2[{v}]"
        down_then_left = f"a2[{_grid_vertex(i - 1, j)}]"
        left_then_down = f"a1[{_grid_vertex(i, j - 1)}]"
        if {down, left, down_then_left, left_then_down} <= names:
            p1 = Path(quiver, (down_then_left, down))
            p2 = Path(quiver, (left_then_down, left))
            rels.append(Relation(((1.0, p1), (-1.0, p2))))
    return rels


def sigma_from_multiplicities(multiplicities: dict[str, int]) -> dict[str, float]:
    """Stability weights from per-vertex multiplicities (each weight equals
    the vertex's multiplicity, as in the deformed Hermite-Einstein
    reduction)."""
    return {v: float(n) for v, n in multiplicities.items()}
