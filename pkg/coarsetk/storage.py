"""
JSON persistence for spaces, covers, maps, precode structures and reports.

Every document embeds the spaces it refers to so files stand alone; plain
space ids are resolved through a ``SpaceRegistry``.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from coarsetk.coarse_maps import CoarseMapRecord
from coarsetk.covers import Cover
from coarsetk.errors import PreconditionError, ValidationError
from coarsetk.metric_core import FiniteMetricSpace, PointSet, SpaceRegistry
from coarsetk.precode import PrecodeStructure, validate_precode

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def convert_types(obj):
    """Convert numpy values, Fractions and point sets into plain JSON values."""
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, PointSet):
        return list(obj.members)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {str(key): convert_types(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_types(item) for item in obj]
    if isinstance(obj, (set, frozenset)):
        return [convert_types(item) for item in sorted(obj)]
    return obj


def dumps(data: Any) -> str:
    return json.dumps(convert_types(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(data: Any, path: PathLike) -> int:
    """Write ``data`` to ``path`` (parents created); returns the file size."""
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(dumps(data), encoding="utf-8")
    size = output.stat().st_size
    logger.info(f"Wrote {output} ({size:,} bytes)")
    return size


def read_json(path: PathLike) -> Dict[str, Any]:
    source = Path(path)
    if not source.exists():
        raise PreconditionError(f"file not found: {source}")
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{source} is not valid JSON: {e}")


def _space_from(ref: Any, registry: SpaceRegistry, validate: bool = True) -> FiniteMetricSpace:
    if isinstance(ref, dict):
        return registry.register(FiniteMetricSpace.from_json(ref, validate=validate))
    return registry.resolve(ref)


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------

def space_document(space: FiniteMetricSpace) -> Dict[str, Any]:
    return space.to_json()


def load_space(data: Dict[str, Any], registry: Optional[SpaceRegistry] = None,
               validate: bool = True) -> FiniteMetricSpace:
    """Accepts a bare space document or one wrapped as ``{"space": ...}``."""
    registry = registry if registry is not None else SpaceRegistry()
    return _space_from(data.get("space", data), registry, validate)


def cover_document(C: Cover) -> Dict[str, Any]:
    return {"space": C.space.to_json(), "elements": [list(e.members) for e in C.elements],
            "certificates": C.certificates}


def load_cover(data: Dict[str, Any], registry: Optional[SpaceRegistry] = None) -> Cover:
    registry = registry if registry is not None else SpaceRegistry()
    return Cover(_space_from(data["space"], registry), data["elements"])


def map_document(f: CoarseMapRecord, include_moduli: bool = False) -> Dict[str, Any]:
    data = f.to_json(include_moduli)
    data.update({"name": f.name, "domain": f.domain.to_json(), "codomain": f.codomain.to_json()})
    if f.certificates:
        data["certificates"] = f.certificates
    return data


def load_map(data: Dict[str, Any], registry: Optional[SpaceRegistry] = None) -> CoarseMapRecord:
    registry = registry if registry is not None else SpaceRegistry()
    domain = _space_from(data["domain"], registry)
    codomain = _space_from(data["codomain"], registry)
    return CoarseMapRecord(domain, codomain, data["table"], name=data.get("name", "f"))


def precode_document(P: PrecodeStructure) -> Dict[str, Any]:
    data = P.to_json()
    data.update({"space": P.space.to_json(), "name": P.name})
    if P.report is not None:
        data["validation"] = P.report.to_json()
    return data


def load_precode(data: Dict[str, Any], registry: Optional[SpaceRegistry] = None,
                 revalidate: bool = True) -> PrecodeStructure:
    """
    Rebuild a structure; a stored validation is re-run rather than trusted.

    Raises:
        ValidationError: if the stored validation no longer holds
    """
    registry = registry if registry is not None else SpaceRegistry()
    P = PrecodeStructure.from_json(data, registry)
    P.name = data.get("name", P.name)
    stored = data.get("validation")
    if revalidate and stored and stored.get("valid"):
        scales = [Fraction(r) for r in stored.get("schedule", {})]
        validate_precode(P, int(stored["n"]), scales=scales).raise_for_failures()
    return P
