"""Hierarchical triggering-conditions taxonomy: parsing, validation, queries.

A taxonomy is a forest of categories.  Main categories sit at the roots
(environmental conditions, road conditions, ...), subcategories below, and
the most granular conditions are the leaves (e.g. heavy snow is a leaf with
intensity "heavy" under .../weather/snow).  Each node carries relevance
tags used to filter conditions against an operational design domain.

File format (JSON, UTF-8, no comments)::

    {"version": 1, "roots": [<node>, ...]}

    <node> = {"id": str, "name": str, "odd_tags": [str, ...],
              "children": [<node>, ...]}                  # category
           | {"id": str, "name": str, "odd_tags": [str, ...],
              "intensity": "light"|"medium"|"heavy"}      # leaf
           | {"id": str, "name": str, "odd_tags": [str, ...]}  # leaf, no level

A node either has a nonempty ``children`` list or is a leaf; ids are unique
across the whole document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import TaxonomyError

__all__ = [
    "INTENSITY_LEVELS",
    "TaxonomyNode",
    "Taxonomy",
    "TriggeringCondition",
    "parse_taxonomy",
    "load_taxonomy",
    "serialize_taxonomy",
    "enumerate_leaves",
    "filter_by_odd",
]

INTENSITY_LEVELS = ("light", "medium", "heavy")

FORMAT_VERSION = 1

_NODE_KEYS = {"id", "name", "odd_tags", "children", "intensity"}


@dataclass(frozen=True)
class TaxonomyNode:
    """One taxonomy node; immutable after parsing."""

    id: str
    name: str
    odd_tags: frozenset[str]
    children: tuple["TaxonomyNode", ...] = ()
    intensity: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Taxonomy:
    """A parsed taxonomy document (forest of root categories)."""

    roots: tuple[TaxonomyNode, ...]
    version: int = FORMAT_VERSION

    def leaf_count(self) -> int:
        return sum(1 for _ in _iter_leaves(self.roots))


@dataclass(frozen=True)
class TriggeringCondition:
    """A leaf condition plus its category path and effective relevance tags.

    ``category_path`` holds the ancestor *names* root-first (the leaf's own
    name is not included).  ``odd_tags`` is the union of the leaf's tags and
    all its ancestors' tags, so subtree-level tagging propagates down.
    """

    leaf_id: str
    category_path: tuple[str, ...]
    intensity: str | None = None
    odd_tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.category_path:
            raise TaxonomyError(
                f"condition '{self.leaf_id}' has an empty category path"
            )


def _parse_node(obj: object, path: str, seen_ids: dict[str, str]) -> TaxonomyNode:
    if not isinstance(obj, dict):
        raise TaxonomyError(f"node must be an object, got {type(obj).__name__}", path)
    unknown = set(obj) - _NODE_KEYS
    if unknown:
        raise TaxonomyError(f"unknown keys {sorted(unknown)}", path)
    for key in ("id", "name"):
        value = obj.get(key)
        if not isinstance(value, str) or not value:
            raise TaxonomyError(f"'{key}' must be a nonempty string", path)
    node_id = obj["id"]
    if node_id in seen_ids:
        raise TaxonomyError(
            f"duplicate id '{node_id}' (first seen at {seen_ids[node_id]})", path
        )
    seen_ids[node_id] = path

    tags = obj.get("odd_tags")
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise TaxonomyError("'odd_tags' must be a list of strings", path)

    if "children" in obj:
        if "intensity" in obj:
            raise TaxonomyError(
                f"node '{node_id}' has both children and an intensity level", path
            )
        raw_children = obj["children"]
        if not isinstance(raw_children, list) or not raw_children:
            raise TaxonomyError(
                f"category '{node_id}' must have a nonempty children list", path
            )
        children = tuple(
            _parse_node(child, f"{path}.children[{i}]", seen_ids)
            for i, child in enumerate(raw_children)
        )
        return TaxonomyNode(node_id, obj["name"], frozenset(tags), children)

    intensity = obj.get("intensity")
    if intensity is not None and intensity not in INTENSITY_LEVELS:
        raise TaxonomyError(
            f"unknown intensity {intensity!r}, expected one of {INTENSITY_LEVELS}",
            path,
        )
    return TaxonomyNode(node_id, obj["name"], frozenset(tags), (), intensity)


def parse_taxonomy(document: str) -> Taxonomy:
    """Parse and validate a taxonomy document from JSON text.

    Raises :class:`TaxonomyError` with a location (line/column for syntax
    errors, JSON path for semantic ones) on any violation.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TaxonomyError(
            f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}"
        ) from exc

    if not isinstance(data, dict):
        raise TaxonomyError("top level must be an object", "$")
    if data.get("version") != FORMAT_VERSION:
        raise TaxonomyError(
            f"unsupported version {data.get('version')!r}, expected {FORMAT_VERSION}",
            "$.version",
        )
    unknown = set(data) - {"version", "roots"}
    if unknown:
        raise TaxonomyError(f"unknown top-level keys {sorted(unknown)}", "$")
    roots = data.get("roots")
    if not isinstance(roots, list):
        raise TaxonomyError("'roots' must be a list", "$.roots")

    seen_ids: dict[str, str] = {}
    parsed = tuple(
        _parse_node(node, f"$.roots[{i}]", seen_ids) for i, node in enumerate(roots)
    )
    return Taxonomy(roots=parsed)


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Read and parse a taxonomy file."""
    return parse_taxonomy(Path(path).read_text(encoding="utf-8"))


def _node_to_dict(node: TaxonomyNode) -> dict:
    out: dict = {
        "id": node.id,
        "name": node.name,
        "odd_tags": sorted(node.odd_tags),
    }
    if node.children:
        out["children"] = [_node_to_dict(c) for c in node.children]
    elif node.intensity is not None:
        out["intensity"] = node.intensity
    return out


def serialize_taxonomy(taxonomy: Taxonomy) -> str:
    """Render a taxonomy back to its canonical JSON form.

    parse -> serialize -> parse is a fixed point (tags are emitted sorted,
    which parsing does not distinguish).
    """
    doc = {
        "version": taxonomy.version,
        "roots": [_node_to_dict(r) for r in taxonomy.roots],
    }
    return json.dumps(doc, indent=2) + "\n"


def _iter_leaves(
    nodes: Iterable[TaxonomyNode],
    names: tuple[str, ...] = (),
    tags: frozenset[str] = frozenset(),
) -> Iterator[tuple[TaxonomyNode, tuple[str, ...], frozenset[str]]]:
    for node in nodes:
        node_tags = tags | node.odd_tags
        if node.is_leaf:
            yield node, names, node_tags
        else:
            yield from _iter_leaves(node.children, names + (node.name,), node_tags)


def enumerate_leaves(taxonomy: Taxonomy) -> list[TriggeringCondition]:
    """All leaf conditions in depth-first document order.

    Root-level leaves are given a single-element category path (their own
    name) so the path invariant holds even for degenerate taxonomies.
    """
    conditions = []
    for leaf, names, tags in _iter_leaves(taxonomy.roots):
        conditions.append(
            TriggeringCondition(
                leaf_id=leaf.id,
                category_path=names if names else (leaf.name,),
                intensity=leaf.intensity,
                odd_tags=tags,
            )
        )
    return conditions


def filter_by_odd(
    conditions: Iterable[TriggeringCondition], odd_tags: Iterable[str]
) -> list[TriggeringCondition]:
    """Keep the conditions whose tags intersect the ODD's tag set.

    Order-preserving; idempotent; the result is always a subset of the
    input.  An empty ODD tag set keeps nothing.
    """
    tag_set = frozenset(odd_tags)
    return [c for c in conditions if c.odd_tags & tag_set]
