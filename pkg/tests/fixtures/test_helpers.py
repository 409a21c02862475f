"""
Test helper utilities for coarsetk tests
"""

import itertools
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from coarsetk.covers import Cover
from coarsetk.metric_core import FiniteMetricSpace


def load_sample_data() -> Dict[str, Any]:
    """Load sample test data from JSON file"""
    fixtures_dir = Path(__file__).parent
    sample_data_path = fixtures_dir / "sample_data.json"

    with open(sample_data_path, 'r') as f:
        return json.load(f)


def sample_space(name: str, validate: bool = True) -> FiniteMetricSpace:
    """Explicit-matrix space from sample_data.json"""
    entry = load_sample_data()["matrices"][name]
    return FiniteMetricSpace.from_matrix(name, entry["matrix"], labels=entry.get("labels"), validate=validate)


def full_matrix(space: FiniteMetricSpace) -> np.ndarray:
    everything = np.arange(space.size)
    return space.submatrix(everything, everything)


# ---------------------------------------------------------------------------
# brute-force oracles (small spaces only)
# ---------------------------------------------------------------------------

def brute_diameter(matrix: np.ndarray, members: Sequence[int]) -> int:
    members = list(members)
    if len(members) < 2:
        return 0
    return int(matrix[np.ix_(members, members)].max())


def brute_bounded_subsets(matrix: np.ndarray, key: int) -> List[tuple]:
    """All nonempty subsets with diameter key at most ``key`` (exponential)"""
    n = matrix.shape[0]
    found = []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            if brute_diameter(matrix, subset) <= key:
                found.append(subset)
    return found


def brute_r_multiplicity(C: Cover, key: int) -> int:
    matrix = full_matrix(C.space)
    best = 0
    for subset in brute_bounded_subsets(matrix, key):
        met = sum(1 for element in C.elements if set(subset) & set(element.members))
        best = max(best, met)
    return best


def brute_lebesgue_holds(C: Cover, key: int) -> bool:
    matrix = full_matrix(C.space)
    for subset in brute_bounded_subsets(matrix, key):
        if not any(set(subset) <= set(element.members) for element in C.elements):
            return False
    return True


def brute_min_split(matrix: np.ndarray, points: Sequence[int], n: int) -> int:
    """Least max-diameter key over every assignment of ``points`` to n parts"""
    points = list(points)
    if len(points) <= n:
        return 0
    best = None
    for labels in itertools.product(range(n), repeat=len(points)):
        worst = 0
        for part in range(n):
            members = [p for p, label in zip(points, labels) if label == part]
            worst = max(worst, brute_diameter(matrix, members))
        best = worst if best is None else min(best, worst)
    return best


def brute_Bn(f, n: int, key: int) -> int:
    """(B)_n value on a small map by enumerating every bounded B and every split"""
    target = full_matrix(f.codomain)
    source = full_matrix(f.domain)
    worst = 0
    for subset in brute_bounded_subsets(target, key):
        points = [x for x in range(f.domain.size) if int(f.table[x]) in subset]
        worst = max(worst, brute_min_split(source, points, n))
    return worst


def newick_leaves(text: str) -> List[str]:
    """Leaf labels of a Newick string, with single-quoted labels unquoted"""
    leaves, i, previous = [], 0, "("
    while i < len(text):
        ch = text[i]
        if ch in "(),;":
            previous, i = ch, i + 1
            continue
        if ch == ":":
            i += 1
            while i < len(text) and text[i] not in "(),;":
                i += 1
            continue
        if ch == "'":
            name, j = [], i + 1
            while not (text[j] == "'" and text[j + 1:j + 2] != "'"):
                name.append(text[j])
                j += 2 if text[j] == "'" else 1
            label, i = "".join(name), j + 1
        else:
            j = i
            while j < len(text) and text[j] not in "(),:;":
                j += 1
            label, i = text[i:j], j
        if previous in ("(", ","):
            leaves.append(label)
        previous = "label"
    return leaves


def assert_report_structure(report: Dict[str, Any], expected_keys: List[str]) -> None:
    """Assert that a report dict carries the expected keys"""
    assert isinstance(report, dict), "Expected a dict report"
    missing = set(expected_keys) - set(report)
    assert not missing, f"Missing keys: {missing}"


def assert_dataframe_structure(df: pd.DataFrame, expected_columns: List[str],
                               min_rows: int = 1) -> None:
    """Assert that a DataFrame has the expected structure"""
    assert isinstance(df, pd.DataFrame), "Expected pandas DataFrame"
    assert len(df) >= min_rows, f"Expected at least {min_rows} rows, got {len(df)}"

    missing_columns = set(expected_columns) - set(df.columns)
    assert not missing_columns, f"Missing columns: {missing_columns}"


def create_test_environment_file(temp_dir: Path, **values: str) -> Path:
    """Create a test .env file"""
    defaults = {
        "COARSETK_BUDGET": "5000,2000",
        "COARSETK_THREADS": "2",
        "COARSETK_SEED": "11",
        "COARSETK_LOG_LEVEL": "DEBUG",
    }
    defaults.update(values)
    env_file = temp_dir / ".env"
    env_file.write_text("\n".join(f"{key}={value}" for key, value in defaults.items()))
    return env_file


class InstanceGenerator:
    """Seeded random instances for the checkers"""

    def __init__(self, seed: int = 7):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def line(self, size: int, space_id: Optional[str] = None) -> FiniteMetricSpace:
        return FiniteMetricSpace.lattice(space_id or f"line{size}", [(0, size - 1)], "l1")

    def path_metric(self, size: int, max_step: int = 3, space_id: str = "path") -> FiniteMetricSpace:
        """Points on a line at random integer gaps"""
        gaps = self.rng.integers(1, max_step + 1, size=size - 1)
        positions = np.concatenate([[0], np.cumsum(gaps)])
        return FiniteMetricSpace.from_points(space_id, positions)

    def cover(self, space: FiniteMetricSpace, pieces: int = 4, overlap: int = 1) -> Cover:
        """Random intervals of a one-dimensional space, overlapping by up to ``overlap``"""
        size = space.size
        cuts = np.unique(np.concatenate([[0, size], self.rng.integers(1, size, size=pieces - 1)]))
        elements = []
        for lo, hi in zip(cuts[:-1].tolist(), cuts[1:].tolist()):
            left = max(0, lo - int(self.rng.integers(0, overlap + 1)))
            elements.append(list(range(left, hi)))
        return Cover(space, elements)

    def table(self, domain: FiniteMetricSpace, codomain: FiniteMetricSpace) -> np.ndarray:
        return self.rng.integers(0, codomain.size, size=domain.size)

    def surjective_table(self, domain_size: int, codomain_size: int) -> np.ndarray:
        table = np.concatenate([np.arange(codomain_size),
                                self.rng.integers(0, codomain_size, size=domain_size - codomain_size)])
        return self.rng.permutation(table)
