import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyqg.graph import (
    GraphError,
    adjacency_matrix,
    build_edu_subgraph,
    build_token_graph,
    dump_graph,
    is_connected,
    linear_parse,
    link_discourse_graph,
    prefix_graph,
    segment_edus,
    split_sentences,
)


class TestSegmentEdus:
    def test_provided_spans_returned_verbatim(self):
        spans = [(0, 3), (3, 5)]
        assert segment_edus(["a"] * 5, spans) == spans

    def test_provided_spans_must_partition(self):
        with pytest.raises(GraphError, match="partition"):
            segment_edus(["a"] * 5, [(0, 3), (4, 5)])

    def test_fallback_splits_before_connective(self):
        toks = "he ran , because he was late .".split()
        assert segment_edus(toks) == [(0, 3), (3, 8)]

    def test_fallback_single_edu(self):
        assert segment_edus("the cat sat .".split()) == [(0, 4)]

    def test_fallback_sentence_boundary(self):
        toks = "he ran . she slept .".split()
        assert segment_edus(toks) == [(0, 3), (3, 6)]

    def test_fallback_and_then_pair_connective(self):
        toks = "he ran , and then he slept .".split()
        assert segment_edus(toks) == [(0, 3), (3, 8)]

    def test_semicolon_before_connective_splits(self):
        toks = "he ran ; but she slept .".split()
        assert segment_edus(toks) == [(0, 3), (3, 7)]

    def test_comma_without_connective_does_not_split(self):
        toks = "he ran , fast .".split()
        assert segment_edus(toks) == [(0, 5)]

    @given(st.lists(st.sampled_from(["a", "b", ".", ",", "because", "so", "ran"]),
                    min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_fallback_output_is_partition(self, tokens):
        spans = segment_edus(tokens)
        pos = 0
        for start, end in spans:
            assert start == pos and end > start
            pos = end
        assert pos == len(tokens)


class TestEduSubgraph:
    def test_star_parse_edges(self):
        sg = build_edu_subgraph((0, 3), [1, 2, 2], ["d", "d", "root"])
        assert set((s, d) for s, d, _ in sg.edges) == {(0, 1), (1, 2)}
        assert sg.root == 2

    def test_single_token_edu(self):
        sg = build_edu_subgraph((4, 5), [0, 0, 0, 0, 4], ["x"] * 5)
        assert sg.edges == [] and sg.root == 4

    def test_cycle_without_root_rejected(self):
        with pytest.raises(GraphError, match="roots"):
            build_edu_subgraph((0, 2), [1, 0], ["d", "d"])

    def test_head_outside_span_rejected(self):
        with pytest.raises(GraphError, match="outside"):
            build_edu_subgraph((0, 2), [3, 1], ["d", "d"])

    def test_cycle_with_separate_root_rejected(self):
        # tokens 0 and 1 head each other; token 2 self-heads
        with pytest.raises(GraphError, match="cycle"):
            build_edu_subgraph((0, 3), [1, 0, 2], ["d", "d", "root"])


class TestLinkDiscourse:
    def make(self, spans, edu_heads):
        subs = []
        for (a, b) in spans:
            heads = list(range(b))
            for i in range(a, b):
                heads[i] = b - 1
            subs.append(build_edu_subgraph((a, b), heads, ["d"] * b))
        return link_discourse_graph(subs, edu_heads)

    def test_two_edus_one_inter_edge(self):
        g = self.make([(0, 2), (2, 4)], [0, 0])
        inter = [(s, d) for s, d, lab in g.edges if lab == "discourse"]
        assert inter == [(3, 1)]

    def test_single_edu_no_inter_edges(self):
        g = self.make([(0, 3)], [0])
        assert all(lab != "discourse" for _, _, lab in g.edges)

    def test_three_edu_chain_connected(self):
        g = self.make([(0, 2), (2, 4), (4, 6)], [0, 0, 1])
        inter = [e for e in g.edges if e[2] == "discourse"]
        assert len(inter) == 2
        assert is_connected(g)

    def test_edge_count_law_for_trees(self):
        g = self.make([(0, 3), (3, 5), (5, 9)], [0, 0, 0])
        assert len(g.edges) == g.node_count - 1
        assert is_connected(g)

    def test_inter_edges_touch_only_edu_roots(self):
        g = self.make([(0, 3), (3, 5), (5, 9)], [0, 2, 0])
        roots = set(g.edu_roots)
        for s, d, lab in g.edges:
            if lab == "discourse":
                assert s in roots and d in roots

    def test_cyclic_edu_heads_rejected(self):
        with pytest.raises(GraphError, match="tree"):
            self.make([(0, 2), (2, 4), (4, 6)], [0, 2, 1])

    def test_multiple_root_edus_rejected(self):
        with pytest.raises(GraphError, match="root"):
            self.make([(0, 2), (2, 4)], [0, 1])


class TestHelpers:
    def test_linear_parse_tree_shape(self):
        g = linear_parse("the cat sat . the dog ran .".split())
        assert len(g.edges) == g.node_count - 1
        assert is_connected(g)

    def test_prefix_graph_shifts_and_connects(self):
        g = linear_parse("a b .".split())
        g2 = prefix_graph(g, 2)
        assert g2.node_count == g.node_count + 2
        assert len(g2.edges) == len(g.edges) + 2
        assert is_connected(g2)
        assert g2.root_token == g.root_token + 2

    def test_adjacency_symmetric_with_self_loops(self):
        g = linear_parse("a b c .".split())
        adj = adjacency_matrix(g)
        assert (adj == adj.T).all()
        assert (adj.diagonal() == 1).all()

    def test_split_sentences(self):
        toks = "he ran . she slept . then".split()
        assert split_sentences(toks) == [["he", "ran", "."], ["she", "slept", "."], ["then"]]

    def test_dump_graph_golden(self):
        g = build_token_graph(
            ["the", "cat", "sat", "."],
            [2, 2, 2, 2], ["det", "nsubj", "root", "punct"],
            [(0, 4)], [0])
        expected = (
            "0:the -[det]-> 2:sat\n"
            "1:cat -[nsubj]-> 2:sat\n"
            "3:. -[punct]-> 2:sat\n"
            "# EDUs\n"
            "edu 0: root=2:sat tokens=[0, 1, 2, 3]\n"
        )
        assert dump_graph(g, ["the", "cat", "sat", "."]) == expected

    def test_fixture_paragraph_graphs_are_trees(self, fixture_corpus):
        for p in fixture_corpus.paragraphs:
            g = build_token_graph(p.tokens, p.dep_heads, p.dep_labels,
                                  p.edu_spans, p.edu_heads)
            assert len(g.edges) == g.node_count - 1
            assert is_connected(g)
