"""Deterministic occupation-vector enumeration shared by the photon and
particle bases."""

from __future__ import annotations

import numpy as np
from math import comb


def occupations_with_total(n_slots: int, total: int) -> np.ndarray:
    """All occupation vectors over n_slots with sum == total, in
    lexicographic order of the tuple."""
    if n_slots == 0:
        return np.zeros((1 if total == 0 else 0, 0), dtype=np.int32)
    out = np.zeros((comb(n_slots + total - 1, total), n_slots), dtype=np.int32)
    row = 0

    def fill(slot, remaining, prefix):
        nonlocal row
        if slot == n_slots - 1:
            out[row, :slot] = prefix
            out[row, slot] = remaining
            row += 1
            return
        for n in range(remaining + 1):
            fill(slot + 1, remaining - n, prefix + [n])

    fill(0, total, [])
    assert row == len(out)
    return out


def occupations_up_to(n_slots: int, total_max: int) -> np.ndarray:
    """Graded-lexicographic enumeration: all vectors with sum <= total_max,
    ordered by total occupation first, lexicographically within a grade."""
    blocks = [occupations_with_total(n_slots, t) for t in range(total_max + 1)]
    return np.concatenate(blocks, axis=0) if blocks else np.zeros((1, 0), dtype=np.int32)


def index_map(occupations: np.ndarray) -> dict:
    return {tuple(int(v) for v in occ): i for i, occ in enumerate(occupations)}
