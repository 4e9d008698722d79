"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from geoscatt.molgraph import Atom, Bond, MolecularGraph

_ELEMENTS = (6, 6, 6, 7, 8, 16)  # carbon-heavy mix


def random_connected_graph(rng: np.random.Generator, n: int,
                           extra_edge_prob: float = 0.25) -> MolecularGraph:
    """Random connected graph: a random tree plus a few chords."""
    atoms = [Atom(element=int(rng.choice(_ELEMENTS))) for _ in range(n)]
    bonds = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        bonds.append(Bond(u, v, "single"))
    present = {(b.i, b.j) for b in bonds}
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in present and rng.random() < extra_edge_prob / n:
                bonds.append(Bond(u, v, "single"))
                present.add((u, v))
    return MolecularGraph(atoms=atoms, bonds=bonds).finalize()


def random_permutation(rng: np.random.Generator, n: int) -> list[int]:
    return [int(x) for x in rng.permutation(n)]
