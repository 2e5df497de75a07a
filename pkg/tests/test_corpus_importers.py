"""Converters from published corpus layouts into the labeled-verb format."""

import io

import pytest

from metaphor_forge.corpus_importers import (
    ImportError_,
    import_clustered_text,
    import_json_lines,
    import_term_table,
    import_word_markup_xml,
    write_corpus,
)
from metaphor_forge.mask_corpus import Label, read_corpus


def _open_excerpt(data_dir, name):
    return open(data_dir / "excerpts" / name, "r", encoding="utf-8")


class TestWordMarkupXml:
    def test_excerpt_yields_one_instance_per_verb(self, data_dir):
        with _open_excerpt(data_dir, "word_markup_excerpt.xml") as source:
            instances = import_word_markup_xml(source)
        assert len(instances) == 4
        labels = [i.label for i in instances]
        assert labels == [Label.LITERAL, Label.METAPHORIC, Label.METAPHORIC, Label.LITERAL]

    def test_marked_verb_positions(self, data_dir):
        with _open_excerpt(data_dir, "word_markup_excerpt.xml") as source:
            instances = import_word_markup_xml(source)
        was, hemorrhaging, devoured, runs = instances
        assert was.tokens[was.verb_index] == "was"
        assert hemorrhaging.tokens[hemorrhaging.verb_index] == "hemorrhaging"
        assert devoured.tokens[devoured.verb_index] == "devoured"
        assert runs.tokens[runs.verb_index] == "runs"

    def test_tokens_lowercased(self, data_dir):
        with _open_excerpt(data_dir, "word_markup_excerpt.xml") as source:
            instances = import_word_markup_xml(source)
        assert instances[0].tokens[:2] == ("the", "company")

    def test_malformed_xml_raises(self):
        with pytest.raises(ImportError_):
            import_word_markup_xml(io.StringIO("<corpus><s>"))

    def test_empty_word_raises(self):
        xml = '<corpus><s><w pos="VVZ"></w></s></corpus>'
        with pytest.raises(ImportError_):
            import_word_markup_xml(io.StringIO(xml))


class TestTermTable:
    def test_excerpt_rows(self, data_dir):
        with _open_excerpt(data_dir, "term_table_excerpt.csv") as source:
            instances = import_term_table(source)
        assert len(instances) == 4
        assert [i.label.value for i in instances] == ["M", "L", "M", "L"]

    def test_verb_located_by_lemma_unification(self, data_dir):
        # the table stores the lemma, the sentence an inflected surface form
        with _open_excerpt(data_dir, "term_table_excerpt.csv") as source:
            instances = import_term_table(source)
        hemorrhage = instances[0]
        assert hemorrhage.tokens[hemorrhage.verb_index] == "hemorrhaging"
        review = instances[3]
        assert review.tokens[review.verb_index] == "reviewed"

    def test_unknown_class_raises(self):
        text = "term,sentence,class\nrun,He runs,ironic\n"
        with pytest.raises(ImportError_):
            import_term_table(io.StringIO(text))

    def test_term_absent_from_sentence_raises(self):
        text = "term,sentence,class\nfly,He runs every day,literal\n"
        with pytest.raises(ImportError_):
            import_term_table(io.StringIO(text))

    def test_wrong_column_count_raises(self):
        with pytest.raises(ImportError_):
            import_term_table(io.StringIO("term,sentence,class\nrun,He runs\n"))


class TestClusteredText:
    def test_excerpt_sections_and_labels(self, data_dir):
        with _open_excerpt(data_dir, "clustered_text_excerpt.txt") as source:
            instances = import_clustered_text(source)
        assert len(instances) == 4
        assert [i.label.value for i in instances] == ["M", "L", "M", "L"]

    def test_inflected_section_verb_located(self, data_dir):
        with _open_excerpt(data_dir, "clustered_text_excerpt.txt") as source:
            instances = import_clustered_text(source)
        firm = instances[0]
        assert firm.tokens == ("the", "firm", "was", "hemorrhaging", "cash", ".")
        assert firm.verb_index == 3
        wound = instances[1]
        assert wound.tokens[wound.verb_index] == "hemorrhaged"

    def test_sentence_before_any_cluster_raises(self):
        text = "***run***\nwsj01:1 He runs fast\n"
        with pytest.raises(ImportError_):
            import_clustered_text(io.StringIO(text))

    def test_sentence_without_section_verb_raises(self):
        text = "***run***\n*literal cluster*\nwsj01:1 She walks home\n"
        with pytest.raises(ImportError_):
            import_clustered_text(io.StringIO(text))

    def test_missing_id_field_raises(self):
        text = "***run***\n*literal cluster*\nruns\n"
        with pytest.raises(ImportError_):
            import_clustered_text(io.StringIO(text))


class TestJsonLines:
    def test_excerpt_records(self, data_dir):
        with _open_excerpt(data_dir, "json_lines_excerpt.jsonl") as source:
            instances = import_json_lines(source)
        assert len(instances) == 3
        assert [i.label.value for i in instances] == ["M", "L", "M"]
        drained = instances[0]
        assert drained.tokens[drained.verb_index] == "drained"
        assert drained.verb_index == 4

    def test_out_of_range_index_raises(self):
        line = '{"sentence": "he runs", "verb_index": 9, "metaphor": false}\n'
        with pytest.raises(ImportError_):
            import_json_lines(io.StringIO(line))

    def test_missing_key_raises(self):
        line = '{"sentence": "he runs", "metaphor": false}\n'
        with pytest.raises(ImportError_):
            import_json_lines(io.StringIO(line))

    def test_invalid_json_raises(self):
        with pytest.raises(ImportError_):
            import_json_lines(io.StringIO("{not json}\n"))


class TestWriteCorpus:
    @pytest.mark.parametrize(
        "name,importer",
        [
            ("word_markup_excerpt.xml", import_word_markup_xml),
            ("term_table_excerpt.csv", import_term_table),
            ("clustered_text_excerpt.txt", import_clustered_text),
            ("json_lines_excerpt.jsonl", import_json_lines),
        ],
    )
    def test_round_trip_through_corpus_format(self, data_dir, name, importer):
        with _open_excerpt(data_dir, name) as source:
            instances = importer(source)
        sink = io.StringIO()
        write_corpus(instances, sink)
        again = read_corpus(io.BytesIO(sink.getvalue().encode("utf-8")))
        assert len(again) == len(instances)
        for before, after in zip(instances, again):
            assert after.tokens == before.tokens
            assert after.verb_index == before.verb_index
            assert after.label == before.label
