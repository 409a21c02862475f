#!/usr/bin/env python3
"""
Generate the example documents used by CI smoke runs
Writes spaces, covers, maps and validated precode structures under one directory
"""

import argparse
import sys
from pathlib import Path
from typing import Dict

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from coarsetk.dimension import cover_for_scales
from coarsetk.metric_core import FiniteMetricSpace
from coarsetk.precode import example_clusters, example_dyadic, example_triadic, quotient_map, validate_precode
from coarsetk.storage import cover_document, map_document, precode_document, space_document, write_json

DEFAULT_OUT = "data/examples"


def generate_spaces() -> Dict[str, dict]:
    """Lattice boxes small enough for every checker"""
    line = FiniteMetricSpace.lattice("line64", [(0, 63)], "l1")
    plane = FiniteMetricSpace.lattice("plane10", [(-10, 10), (-10, 10)], "linf")
    return {"line64": space_document(line), "plane10": space_document(plane)}


def generate_precodes() -> Dict[str, dict]:
    """Validated dyadic, triadic and cluster structures with their quotient maps"""
    documents = {}
    for name, P, n in (("dyadic32", example_dyadic(32), 2),
                       ("triadic2", example_triadic(2), 2),
                       ("clusters", example_clusters(), 1)):
        validate_precode(P, n).raise_for_failures()
        documents[f"{name}.precode"] = precode_document(P)
        documents[f"{name}.quotient"] = map_document(quotient_map(P))
    return documents


def generate_covers() -> Dict[str, dict]:
    line = FiniteMetricSpace.lattice("line64", [(0, 63)], "l1")
    return {"line64.cover": cover_document(cover_for_scales(line, 1, 1))}


def generate(out_dir: Path) -> Dict[str, int]:
    """Write every document and return the file sizes by name"""
    out_dir.mkdir(parents=True, exist_ok=True)
    sizes = {}
    for name, document in {**generate_spaces(), **generate_covers(), **generate_precodes()}.items():
        path = out_dir / f"{name}.json"
        write_json(document, path)
        sizes[name] = path.stat().st_size
        print(f"✅ Generated {path} ({sizes[name]:,} bytes)")
    return sizes


def main():
    parser = argparse.ArgumentParser(description="Generate coarsetk example documents for CI")
    parser.add_argument("--out", default=DEFAULT_OUT, help="output directory")
    args = parser.parse_args()

    print("🔧 Generating example documents...")
    sizes = generate(Path(args.out))
    print(f"\n📈 Summary: {len(sizes)} files, {sum(sizes.values()):,} bytes")
    print("\n🎉 Test data generation completed successfully!")


if __name__ == "__main__":
    main()
