"""Corpus and claim ingestion."""

import json

import pytest

from verihop.corpus import (Claim, SentenceAddress, dump_corpus, load_claims,
                            load_corpus, validate_claims)
from verihop.errors import IngestError, NotFoundError, ParseError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


@pytest.fixture
def small_corpus(tmp_path):
    path = write_lines(tmp_path / "corpus.jsonl", [
        json.dumps({"id": "A", "lines": "0\tHello world.\t\n1\tSecond."}),
        json.dumps({"id": "B", "lines": "0\tB zero.\n1\t\n2\tB two."}),
    ])
    return load_corpus(path)


class TestLoadCorpus:
    def test_basic_parse(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [
            json.dumps({"id": "A", "lines": "0\tHello world.\t\n1\tSecond."}),
        ])
        corpus = load_corpus(path)
        doc = corpus.documents["A"]
        assert doc.sentences == [(0, "Hello world."), (1, "Second.")]
        assert corpus.num_documents == 1
        assert corpus.num_sentences == 2

    def test_empty_file(self, tmp_path):
        corpus = load_corpus(write_lines(tmp_path / "c.jsonl", []))
        assert corpus.num_documents == 0
        assert corpus.num_sentences == 0

    def test_duplicate_doc_id(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [
            json.dumps({"id": "A", "lines": "0\tx"}),
            json.dumps({"id": "A", "lines": "0\ty"}),
        ])
        with pytest.raises(IngestError, match="'A'"):
            load_corpus(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [
            json.dumps({"id": "A", "lines": "0\tx"}),
            "{not json",
        ])
        with pytest.raises(ParseError) as err:
            load_corpus(path)
        assert err.value.line == 2

    def test_non_integer_sentence_index(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [
            json.dumps({"id": "A", "lines": "zero\tx"}),
        ])
        with pytest.raises(ParseError, match="non-integer"):
            load_corpus(path)

    def test_blank_sentences_retained_but_not_indexable(self, small_corpus):
        assert small_corpus.num_sentences == 5
        assert small_corpus.num_nonblank_sentences == 4
        assert small_corpus.get_sentence(SentenceAddress("B", 1)) == ""

    def test_enumeration_matches_counts(self, small_corpus):
        seen = list(small_corpus.iter_sentences())
        assert len(seen) == small_corpus.num_sentences
        assert len({addr for addr, _ in seen}) == len(seen)

    def test_round_trip(self, small_corpus, tmp_path):
        out = tmp_path / "round.jsonl"
        dump_corpus(small_corpus, out)
        again = load_corpus(out)
        assert again == small_corpus

    def test_nfc_normalization(self, tmp_path):
        # e + combining acute vs precomposed must ingest identically
        decomposed = "Café"
        path = write_lines(tmp_path / "c.jsonl", [
            json.dumps({"id": decomposed, "lines": f"0\t{decomposed} text"}),
        ])
        corpus = load_corpus(path)
        assert "Café" in corpus.documents
        assert corpus.get_sentence(SentenceAddress("Café", 0)) == "Café text"


class TestGetSentence:
    def test_found(self, small_corpus):
        assert small_corpus.get_sentence(SentenceAddress("A", 0)) == "Hello world."

    def test_missing_index(self, small_corpus):
        with pytest.raises(NotFoundError, match="A::7"):
            small_corpus.get_sentence(SentenceAddress("A", 7))

    def test_missing_doc(self, small_corpus):
        with pytest.raises(NotFoundError, match="Z::0"):
            small_corpus.get_sentence(SentenceAddress("Z", 0))


class TestSentenceAddress:
    def test_string_form_and_parse(self):
        addr = SentenceAddress("Café_Society", 3)
        assert str(addr) == "Café_Society::3"
        assert SentenceAddress.parse(str(addr)) == addr

    def test_invalid(self):
        with pytest.raises(ValueError):
            SentenceAddress("", 0)
        with pytest.raises(ValueError):
            SentenceAddress("A", -1)


class TestLoadClaims:
    def test_nei_convention(self, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 1, "claim": "c", "label": "NOT ENOUGH INFO",
                        "evidence": [[[1, 1, None, None]]]}),
        ])
        (claim,) = load_claims(path)
        assert claim.label == "NEI"
        assert claim.evidence_sets == []

    def test_two_groups_two_docs(self, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 2, "claim": "c", "label": "REFUTES",
                        "evidence": [
                            [[1, 1, "Sheryl_Lee", 0]],
                            [[1, 2, "Sheryl_Lee", 0], [1, 2, "Café_Society", 1]],
                        ]}),
        ])
        (claim,) = load_claims(path)
        assert claim.evidence_sets == [
            (SentenceAddress("Sheryl_Lee", 0),),
            (SentenceAddress("Sheryl_Lee", 0), SentenceAddress("Café_Society", 1)),
        ]

    def test_unknown_label(self, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 3, "claim": "c", "label": "MAYBE", "evidence": []}),
        ])
        with pytest.raises(ParseError, match="MAYBE"):
            load_claims(path)

    def test_duplicate_addresses_within_group_deduplicated(self, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 4, "claim": "c", "label": "SUPPORTS",
                        "evidence": [[[1, 1, "A", 0], [1, 2, "A", 0]]]}),
        ])
        (claim,) = load_claims(path)
        assert claim.evidence_sets == [(SentenceAddress("A", 0),)]

    def test_validation_against_corpus(self, small_corpus, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 5, "claim": "c", "label": "SUPPORTS",
                        "evidence": [[[1, 1, "A", 0]]]}),
            json.dumps({"id": 6, "claim": "c", "label": "SUPPORTS",
                        "evidence": [[[1, 1, "Missing", 0]]]}),
        ])
        with pytest.raises(IngestError):
            load_claims(path, small_corpus)
        claims = load_claims(path, small_corpus, strict=False)
        report = validate_claims(claims, small_corpus)
        assert report["claims_without_resolvable_set"] == [6]
        assert report["unresolvable_addresses"] == [
            {"claim_id": 6, "address": "Missing::0"}]
        assert report["label_counts"]["SUPPORTS"] == 2

    def test_every_resolvable_gold_resolves(self, small_corpus, tmp_path):
        path = write_lines(tmp_path / "claims.jsonl", [
            json.dumps({"id": 7, "claim": "c", "label": "REFUTES",
                        "evidence": [[[1, 1, "A", 0], [1, 1, "B", 2]]]}),
        ])
        (claim,) = load_claims(path, small_corpus)
        for group in claim.evidence_sets:
            for addr in group:
                assert small_corpus.get_sentence(addr) is not None


def test_gold_addresses_order_preserving():
    claim = Claim(1, "c", "SUPPORTS", evidence_sets=[
        (SentenceAddress("B", 1), SentenceAddress("A", 0)),
        (SentenceAddress("A", 0), SentenceAddress("C", 2)),
    ])
    assert claim.gold_addresses() == [
        SentenceAddress("B", 1), SentenceAddress("A", 0), SentenceAddress("C", 2)]
