"""Maximum bipartite matching on sparsity patterns (structural rank)."""
from __future__ import annotations

from typing import Iterable


class PatternMatching:
    """Row-to-column matching on a growing bipartite graph.

    Edges can be added and, if no augmentation used them, removed again; this
    is what the greedy row selection needs to test a candidate cheaply.
    """

    def __init__(self, nrows: int, ncols: int):
        self.nrows = nrows
        self.ncols = ncols
        self.adj: list[set[int]] = [set() for _ in range(nrows)]
        self.row_match = [-1] * nrows
        self.col_match = [-1] * ncols
        self.size = 0

    @classmethod
    def from_pattern(cls, nrows, ncols, rows, cols) -> "PatternMatching":
        pm = cls(nrows, ncols)
        pm.add_edges(zip(rows, cols))
        pm.augment_all()
        return pm

    def add_edges(self, edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
        """Insert edges; return those that were not already present."""
        added = []
        for r, c in edges:
            r, c = int(r), int(c)
            if c not in self.adj[r]:
                self.adj[r].add(c)
                added.append((r, c))
        return added

    def remove_edges(self, edges: Iterable[tuple[int, int]]):
        for r, c in edges:
            if self.row_match[r] == c:
                raise RuntimeError("cannot remove a matched edge")
            self.adj[r].discard(c)

    def _augment_from(self, root: int) -> bool:
        # iterative DFS for an alternating path ending at a free column
        seen = set()
        stack = [(root, iter(self.adj[root]))]
        via: dict[int, int] = {}  # column -> row it was reached from
        while stack:
            r, it = stack[-1]
            for c in it:
                if c in seen:
                    continue
                seen.add(c)
                via[c] = r
                nxt = self.col_match[c]
                if nxt < 0:
                    # flip the path back to root
                    while True:
                        r_prev = via[c]
                        c_prev = self.row_match[r_prev]
                        self.row_match[r_prev] = c
                        self.col_match[c] = r_prev
                        if r_prev == root:
                            break
                        c = c_prev
                    self.size += 1
                    return True
                stack.append((nxt, iter(self.adj[nxt])))
                break
            else:
                stack.pop()
        return False

    def augment_all(self) -> int:
        """Augment from every free row; return how many augmentations succeeded."""
        gained = 0
        for r in range(self.nrows):
            if self.row_match[r] < 0 and self.adj[r] and self._augment_from(r):
                gained += 1
        return gained


def maximum_matching_size(nrows, ncols, rows, cols) -> int:
    return PatternMatching.from_pattern(nrows, ncols, rows, cols).size
