"""SNOMED-style concept graph: loading, validation, label and adjacency lookups."""

from dataclasses import dataclass, field

from medlink.errors import FormatError, NotFoundError, ValidationError
from medlink.text import fold


def _check_sctid(value, path, line):
    if not value or not value.isascii() or not value.isdigit():
        raise FormatError(f"invalid sctid {value!r}", path=path, line=line)
    return value


@dataclass(frozen=True)
class Concept:
    """One KG node. The first label is the preferred one."""

    sctid: str
    labels: tuple[str, ...]
    semantic_tag: str


@dataclass
class ConceptGraph:
    """Concept index plus IS-A edges, immutable after load.

    Iteration orders are fixed by ascending numeric sctid so that every
    downstream artifact is reproducible.
    """

    concepts: dict[str, Concept] = field(default_factory=dict)
    edges: set[tuple[str, str]] = field(default_factory=set)
    label_index: dict[str, set[str]] = field(default_factory=dict)
    _parents: dict[str, list[str]] = field(default_factory=dict, repr=False)
    _children: dict[str, list[str]] = field(default_factory=dict, repr=False)

    def __contains__(self, sctid):
        return sctid in self.concepts

    def __len__(self):
        return len(self.concepts)

    def sctids(self):
        """All concept ids in ascending numeric order."""
        return list(self.concepts)

    def _require(self, sctid):
        if sctid not in self.concepts:
            raise NotFoundError(f"unknown sctid {sctid!r}")

    def labels_of(self, sctid):
        """Labels of one concept, in stored order."""
        self._require(sctid)
        return list(self.concepts[sctid].labels)

    def neighbors(self, sctid):
        """(parents, children) of a node, each ascending by numeric sctid."""
        self._require(sctid)
        return list(self._parents.get(sctid, [])), list(self._children.get(sctid, []))

    def undirected_neighbors(self, sctid):
        """Union of parents and children, deduplicated, ascending."""
        parents, children = self.neighbors(sctid)
        return sorted(set(parents) | set(children), key=int)

    def concepts_with_label(self, label):
        """Sctids whose concept carries `label` (case-folded), ascending."""
        return sorted(self.label_index.get(fold(label), ()), key=int)


def _parse_concepts(path):
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(
                    f"expected 3 tab-separated fields, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            sctid, label_field, tag = parts
            _check_sctid(sctid, path, lineno)
            if sctid in seen:
                raise ValidationError(f"{path}: duplicate sctid {sctid!r} (line {lineno})")
            seen.add(sctid)
            labels = tuple(label_field.split("|"))
            if any(label == "" for label in labels):
                raise ValidationError(f"{path}: empty label for sctid {sctid!r} (line {lineno})")
            rows.append(Concept(sctid=sctid, labels=labels, semantic_tag=tag))
    return rows


def _parse_edges(path, known):
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(
                    f"expected 2 tab-separated fields, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            child, parent = parts
            _check_sctid(child, path, lineno)
            _check_sctid(parent, path, lineno)
            for endpoint in (child, parent):
                if endpoint not in known:
                    raise ValidationError(
                        f"{path}: edge endpoint {endpoint!r} is not a known concept "
                        f"(line {lineno})"
                    )
            edges.append((child, parent))
    return edges


def load_graph(concepts_path, edges_path):
    """Load and validate a concept graph from its two TSV files.

    concepts: `sctid<TAB>label1|label2|...<TAB>semantic_tag`, no header.
    edges: `child_sctid<TAB>parent_sctid`, IS-A only.
    """
    rows = _parse_concepts(concepts_path)
    rows.sort(key=lambda c: int(c.sctid))
    graph = ConceptGraph()
    for concept in rows:
        graph.concepts[concept.sctid] = concept
        for label in concept.labels:
            graph.label_index.setdefault(fold(label), set()).add(concept.sctid)

    for child, parent in _parse_edges(edges_path, graph.concepts):
        graph.edges.add((child, parent))
    for child, parent in sorted(graph.edges, key=lambda e: (int(e[0]), int(e[1]))):
        graph._parents.setdefault(child, []).append(parent)
        graph._children.setdefault(parent, []).append(child)
    for adjacency in (graph._parents, graph._children):
        for values in adjacency.values():
            values.sort(key=int)
    return graph


def save_graph(graph, concepts_path, edges_path):
    """Re-serialize a graph in canonical order (ascending numeric sctid)."""
    with open(concepts_path, "w", encoding="utf-8") as fh:
        for sctid in graph.sctids():
            concept = graph.concepts[sctid]
            fh.write(f"{sctid}\t{'|'.join(concept.labels)}\t{concept.semantic_tag}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for child, parent in sorted(graph.edges, key=lambda e: (int(e[0]), int(e[1]))):
            fh.write(f"{child}\t{parent}\n")
