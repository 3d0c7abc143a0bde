import random

import pytest
from hypothesis import given, settings, strategies as st

from morphtag.conllu import (
    CategorySchema,
    ConlluError,
    NONE_LABEL,
    Sentence,
    Word,
    build_schemas,
    corpus_stats,
    format_conllu,
    parse_conllu,
)
from morphtag.synth import generate_corpus

TWO_TOKEN_BLOCK = """\
# sent_id = demo-1
1\tдома\tдом\tNOUN\t_\tCase=Nom|Number=Sing\t0\troot\t_\t_
2\tи\tи\tCCONJ\t_\t_\t3\tcc\t_\t_
"""


class TestParse:
    def test_two_token_block(self):
        sentences = parse_conllu(TWO_TOKEN_BLOCK)
        assert len(sentences) == 1
        s = sentences[0]
        assert s.id == "demo-1"
        assert [w.surface for w in s.words] == ["дома", "и"]
        assert s.words[0].labels == {
            "upos": "NOUN", "Case": "Nom", "Number": "Sing", "head": "0", "deprel": "root",
        }
        assert s.words[1].labels == {"upos": "CCONJ", "head": "3", "deprel": "cc"}

    def test_empty_input(self):
        assert parse_conllu("") == []
        assert parse_conllu("\n\n") == []

    def test_multiword_ranges_and_empty_nodes_skipped(self):
        text = (
            "1-2\tдоме\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tв\tв\tADP\t_\t_\t2\tcase\t_\t_\n"
            "2\tдоме\tдом\tNOUN\t_\tCase=Loc\t0\troot\t_\t_\n"
            "2.1\tбыл\t_\t_\t_\t_\t_\t_\t_\t_\n"
        )
        sentences = parse_conllu(text)
        assert [w.surface for w in sentences[0].words] == ["в", "доме"]

    def test_malformed_line_names_line_number(self):
        text = "1\tслово\tслово\tNOUN\t_\t_\t0\troot\t_\t_\n1\tbad\tline\n"
        with pytest.raises(ConlluError, match="line 2"):
            parse_conllu(text)

    def test_malformed_feats_names_line_number(self):
        text = "1\tслово\tслово\tNOUN\t_\tCaseNom\t0\troot\t_\t_\n"
        with pytest.raises(ConlluError, match="line 1"):
            parse_conllu(text)

    def test_crlf_accepted(self):
        sentences = parse_conllu(TWO_TOKEN_BLOCK.replace("\n", "\r\n"))
        assert len(sentences) == 1
        assert sentences[0].words[0].surface == "дома"

    def test_running_index_when_no_sent_id(self):
        text = "1\tа\t_\tCCONJ\t_\t_\t_\t_\t_\t_\n\n1\tб\t_\tNOUN\t_\t_\t_\t_\t_\t_\n"
        sentences = parse_conllu(text)
        assert [s.id for s in sentences] == ["1", "2"]

    def test_underscore_upos_means_absent(self):
        text = "1\tа\t_\t_\t_\t_\t_\t_\t_\t_\n"
        word = parse_conllu(text)[0].words[0]
        assert "upos" not in word.labels
        assert word.label_or_none("upos") == NONE_LABEL


class TestSchemas:
    def test_union_plus_none_sorted(self):
        sentences = [
            Sentence([Word("а", {"upos": "NOUN", "Case": "Nom"})], "1"),
            Sentence([Word("б", {"upos": "VERB", "Case": "Gen"})], "2"),
        ]
        schemas = build_schemas(sentences)
        assert [s.name for s in schemas] == ["Case", "upos"]
        assert schemas[0].labels == ("Gen", "NONE", "Nom")
        assert schemas[0].none_index == 1

    def test_no_feats_yields_upos_only(self):
        sentences = [Sentence([Word("а", {"upos": "X"}), Word("б", {"upos": "X"})], "1")]
        schemas = build_schemas(sentences)
        assert [s.name for s in schemas] == ["upos"]

    def test_dependency_categories_excluded_by_default(self):
        sentences = parse_conllu(TWO_TOKEN_BLOCK)
        names = [s.name for s in build_schemas(sentences)]
        assert "head" not in names and "deprel" not in names
        with_dep = [s.name for s in build_schemas(sentences, include_dependency=True)]
        assert "head" in with_dep and "deprel" in with_dep

    def test_deterministic_across_iteration_order(self):
        corpus = generate_corpus(200, seed=13)
        shuffled = corpus[:]
        random.Random(5).shuffle(shuffled)
        assert build_schemas(corpus) == build_schemas(shuffled)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_schemas([])

    def test_schema_invariants_enforced(self):
        with pytest.raises(ValueError):
            CategorySchema("x", ("A", "A", "NONE"))
        with pytest.raises(ValueError):
            CategorySchema("x", ("A", "B"))


class TestStats:
    def test_empty(self):
        stats = corpus_stats([])
        assert (stats.sentence_count, stats.word_count, stats.mean_sentence_length) == (0, 0, 0.0)

    def test_small(self):
        sentences = [
            Sentence([Word("а"), Word("б"), Word("в")], "1"),
            Sentence([Word("г"), Word("д"), Word("е"), Word("ж"), Word("з")], "2"),
        ]
        stats = corpus_stats(sentences)
        assert (stats.sentence_count, stats.word_count) == (2, 8)
        assert stats.mean_sentence_length == pytest.approx(4.0)

    @given(st.lists(st.integers(1, 9), min_size=1, max_size=20))
    @settings(max_examples=25, deadline=None)
    def test_word_count_round_trip(self, lengths):
        sentences = [
            Sentence([Word(f"w{i}_{j}") for j in range(n)], str(i))
            for i, n in enumerate(lengths)
        ]
        stats = corpus_stats(sentences)
        assert stats.word_count == sum(len(s.words) for s in sentences)
        assert abs(stats.mean_sentence_length - stats.word_count / stats.sentence_count) < 0.01


class TestFormat:
    def test_round_trip_form_upos_feats(self):
        corpus = generate_corpus(50, seed=99)
        reparsed = parse_conllu(format_conllu(corpus))
        assert len(reparsed) == len(corpus)
        for original, parsed in zip(corpus, reparsed):
            assert [w.surface for w in parsed.words] == [w.surface for w in original.words]
            for worig, wparsed in zip(original.words, parsed.words):
                assert wparsed.labels == worig.labels

    def test_every_word_has_label_for_every_schema_category(self):
        corpus = generate_corpus(100, seed=3)
        schemas = build_schemas(corpus)
        for sentence in corpus:
            for word in sentence.words:
                for schema in schemas:
                    label = word.label_or_none(schema.name)
                    assert label in schema.labels

    def test_empty_corpus_formats_to_empty(self):
        assert format_conllu([]) == ""
