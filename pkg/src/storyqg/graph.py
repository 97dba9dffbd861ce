"""Discourse-aware token-level graph construction.

A paragraph becomes a graph whose nodes are tokens: within each elementary
discourse unit (EDU) the dependency parse contributes dependent -> head
edges, and EDU root tokens are linked following the EDU-level dependency
arcs. A rule segmenter stands in when no EDU spans are provided, and a
linear fallback parse covers unannotated text (generated summaries).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SENTENCE_FINAL = (".", "!", "?")
CLAUSE_CONNECTIVES = ("because", "but", "so", "when", "after", "before", "while")
# "and then" is the one two-token connective
_PAIR_CONNECTIVE = ("and", "then")


class GraphError(ValueError):
    pass


@dataclass
class TokenGraph:
    node_count: int
    edges: list[tuple[int, int, str]] = field(default_factory=list)  # (src, dst, label)
    edu_of: list[int] = field(default_factory=list)
    edu_roots: list[int] = field(default_factory=list)

    root_edu: int = 0

    @property
    def root_token(self) -> int:
        """Root token of the root EDU."""
        return self.edu_roots[self.root_edu]


def segment_edus(tokens: list[str], provided_spans: list[tuple[int, int]] | None = None
                 ) -> list[tuple[int, int]]:
    """EDU spans for a token sequence.

    Provided spans are validated and returned verbatim. The fallback splits
    after sentence-final punctuation and at a comma/semicolon immediately
    preceding a clause connective.
    """
    if not tokens:
        raise GraphError("segment_edus: empty token sequence")
    n = len(tokens)
    if provided_spans is not None:
        pos = 0
        for start, end in provided_spans:
            if start != pos or end <= start:
                raise GraphError(f"segment_edus: provided spans are not a partition: {provided_spans}")
            pos = end
        if pos != n:
            raise GraphError(f"segment_edus: provided spans cover [0, {pos}), expected [0, {n})")
        return [(int(s), int(e)) for s, e in provided_spans]

    boundaries = []  # split points: new span starts at each boundary
    for i in range(n - 1):
        if tokens[i] in SENTENCE_FINAL:
            boundaries.append(i + 1)
        elif tokens[i] in (",", ";"):
            nxt = tokens[i + 1]
            if nxt in CLAUSE_CONNECTIVES:
                boundaries.append(i + 1)
            elif nxt == _PAIR_CONNECTIVE[0] and i + 2 < n and tokens[i + 2] == _PAIR_CONNECTIVE[1]:
                boundaries.append(i + 1)
    spans = []
    start = 0
    for b in boundaries:
        spans.append((start, b))
        start = b
    spans.append((start, n))
    return spans


def split_sentences(tokens: list[str]) -> list[list[str]]:
    """Sentence chunks using only the sentence-final-punctuation rule."""
    sentences = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in SENTENCE_FINAL:
            sentences.append(tokens[start:i + 1])
            start = i + 1
    if start < len(tokens):
        sentences.append(tokens[start:])
    return sentences


@dataclass
class EduSubgraph:
    span: tuple[int, int]
    edges: list[tuple[int, int, str]]
    root: int  # absolute token index


def build_edu_subgraph(span: tuple[int, int], dep_heads: list[int],
                       dep_labels: list[str]) -> EduSubgraph:
    """One directed dependent -> head edge per non-root token in the span."""
    start, end = span
    edges = []
    roots = []
    for i in range(start, end):
        h = dep_heads[i]
        if not start <= h < end:
            raise GraphError(f"build_edu_subgraph: token {i} head {h} outside span [{start}, {end})")
        if h == i:
            roots.append(i)
        else:
            edges.append((i, h, dep_labels[i]))
    if len(roots) != 1:
        raise GraphError(f"build_edu_subgraph: span [{start}, {end}) has {len(roots)} roots, expected 1")
    for i in range(start, end):
        seen = set()
        j = i
        while dep_heads[j] != j:
            if j in seen:
                raise GraphError(f"build_edu_subgraph: head cycle through token {i} "
                                 f"in span [{start}, {end})")
            seen.add(j)
            j = dep_heads[j]
    return EduSubgraph(span=(start, end), edges=edges, root=roots[0])


def link_discourse_graph(subgraphs: list[EduSubgraph], edu_heads: list[int]) -> TokenGraph:
    """Join EDU subgraphs by linking root tokens along the EDU dependency arcs."""
    if len(edu_heads) != len(subgraphs):
        raise GraphError(f"link_discourse_graph: {len(subgraphs)} subgraphs but {len(edu_heads)} EDU heads")
    root_edus = [i for i, h in enumerate(edu_heads) if h == i]
    if len(root_edus) != 1:
        raise GraphError(f"link_discourse_graph: {len(root_edus)} root EDUs, expected exactly 1")
    # tree check: every EDU must reach the root without revisiting
    for i in range(len(edu_heads)):
        seen = set()
        j = i
        while edu_heads[j] != j:
            if j in seen:
                raise GraphError("link_discourse_graph: edu_heads is not a tree (cycle detected)")
            seen.add(j)
            j = edu_heads[j]

    node_count = subgraphs[-1].span[1] if subgraphs else 0
    edges = []
    edu_of = [0] * node_count
    edu_roots = []
    for k, sg in enumerate(subgraphs):
        edges.extend(sg.edges)
        edu_roots.append(sg.root)
        for i in range(sg.span[0], sg.span[1]):
            edu_of[i] = k
    for k, h in enumerate(edu_heads):
        if h != k:
            edges.append((subgraphs[k].root, subgraphs[h].root, "discourse"))
    g = TokenGraph(node_count=node_count, edges=edges, edu_of=edu_of, edu_roots=edu_roots)
    g.root_edu = root_edus[0]
    return g


def build_token_graph(tokens: list[str], dep_heads: list[int], dep_labels: list[str],
                      edu_spans: list[tuple[int, int]], edu_heads: list[int]) -> TokenGraph:
    spans = segment_edus(tokens, edu_spans)
    subgraphs = [build_edu_subgraph(span, dep_heads, dep_labels) for span in spans]
    return link_discourse_graph(subgraphs, edu_heads)


def linear_parse(tokens: list[str]) -> TokenGraph:
    """Fallback graph for unannotated text (silver statements, decoded summaries).

    Each fallback EDU gets a chain parse rooted at its last token; each EDU
    is headed by the one before it.
    """
    spans = segment_edus(tokens)
    dep_heads = []
    dep_labels = []
    for start, end in spans:
        for i in range(start, end):
            dep_heads.append(i + 1 if i < end - 1 else i)
            dep_labels.append("next")
    edu_heads = [max(0, k - 1) for k in range(len(spans))]
    subgraphs = [build_edu_subgraph(span, dep_heads, dep_labels) for span in spans]
    return link_discourse_graph(subgraphs, edu_heads)


def prefix_graph(graph: TokenGraph, k: int, label: str = "control") -> TokenGraph:
    """Shift a graph by ``k`` new leading nodes, each attached to the root token."""
    if k <= 0:
        return graph
    root = graph.root_token + k
    edges = [(s + k, d + k, lab) for s, d, lab in graph.edges]
    edges.extend((i, root, label) for i in range(k))
    edu_of = [graph.root_edu] * k + list(graph.edu_of)
    return TokenGraph(node_count=graph.node_count + k, edges=edges,
                      edu_of=edu_of, edu_roots=[r + k for r in graph.edu_roots],
                      root_edu=graph.root_edu)


def adjacency_matrix(graph: TokenGraph) -> np.ndarray:
    """Symmetrized adjacency with self-loops, as a float64 0/1 mask."""
    n = graph.node_count
    adj = np.eye(n, dtype=np.float64)
    for s, d, _ in graph.edges:
        adj[s, d] = 1.0
        adj[d, s] = 1.0
    return adj


def is_connected(graph: TokenGraph) -> bool:
    if graph.node_count == 0:
        return True
    neighbors: dict[int, list[int]] = {i: [] for i in range(graph.node_count)}
    for s, d, _ in graph.edges:
        neighbors[s].append(d)
        neighbors[d].append(s)
    seen = {0}
    stack = [0]
    while stack:
        node = stack.pop()
        for nxt in neighbors[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == graph.node_count


def dump_graph(graph: TokenGraph, tokens: list[str]) -> str:
    """Edge list plus EDU table, for golden-file debugging."""
    lines = []
    for s, d, lab in graph.edges:
        lines.append(f"{s}:{tokens[s]} -[{lab}]-> {d}:{tokens[d]}")
    lines.append("# EDUs")
    n_edus = len(graph.edu_roots)
    for k in range(n_edus):
        members = [i for i in range(graph.node_count) if graph.edu_of[i] == k]
        root = graph.edu_roots[k]
        lines.append(f"edu {k}: root={root}:{tokens[root]} tokens={members}")
    return "\n".join(lines) + "\n"
