"""ChemProt-style corpus ingestion and entity-pair extraction.

Input is the three tab-separated annotation files distributed with the
BioCreative VI ChemProt corpus:

    abstracts:  doc_id <TAB> title <TAB> body
    entities:   doc_id <TAB> entity_id <TAB> kind <TAB> start <TAB> end <TAB> surface
                (kind CHEMICAL maps to Chemical; GENE, GENE-Y, GENE-N to Gene)
    relations:  doc_id <TAB> group <TAB> arg1 <TAB> arg2              (gold standard)
                or doc_id <TAB> group <TAB> eval <TAB> name <TAB> arg1 <TAB> arg2
                (arg values may carry "Arg1:"/"Arg2:" prefixes; groups like
                "CPR:4" and "CPR4" are both accepted)

Character offsets index into the document text formed as title + TAB + body,
matching the offset convention of the distributed files.

Every chemical-gene mention pair that co-occurs inside a single sentence
becomes one example: the two mentions are replaced by the placeholder
tokens @CHEMICAL$ and @GENE$ (right-to-left, so earlier offsets stay valid)
and the example is labeled with the pair's gold relation group when that
group is evaluated, otherwise "false". Pairs whose mentions fall in
different sentences are dropped. Other entity mentions in the sentence are
left verbatim.

Sentence segmentation is deliberately rule-based so that two runs over the
same files produce byte-identical output: a sentence ends at '.', '!' or
'?' followed by whitespace and an uppercase letter or digit, unless the
word before the terminator is a known abbreviation (see ABBREVIATIONS).
Tabs and newlines are hard boundaries.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

CHEMICAL_PLACEHOLDER = "@CHEMICAL$"
GENE_PLACEHOLDER = "@GENE$"
FALSE_LABEL = "false"
EVALUATED_GROUPS = ("CPR:3", "CPR:4", "CPR:5", "CPR:6", "CPR:9")

# Words that keep their trailing period mid-sentence. Lowercased match of
# the token immediately before the terminator.
ABBREVIATIONS = frozenset(
    {
        "al", "approx", "ca", "cf", "co", "dr", "e.g", "eq", "eqs", "et",
        "fig", "figs", "i.e", "inc", "ltd", "no", "nos", "prof", "ref",
        "refs", "resp", "sp", "spp", "st", "subsp", "vs",
    }
)

_SENTENCE_BOUNDARY = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")
_HARD_BREAK = re.compile(r"[\t\n]")
_ARG_PREFIX = re.compile(r"^Arg[12]:")


class EntityKind(Enum):
    CHEMICAL = "Chemical"
    GENE = "Gene"


class OffsetMismatch(ValueError):
    """A mention's recorded surface disagrees with the document text."""


class CorpusFormatError(ValueError):
    """A corpus input file has a malformed line."""


@dataclass(frozen=True)
class AbstractRecord:
    doc_id: str
    title: str
    body: str

    @property
    def text(self) -> str:
        return self.title + "\t" + self.body


@dataclass(frozen=True)
class EntityMention:
    doc_id: str
    entity_id: str
    kind: EntityKind
    span_start: int
    span_end: int
    surface: str


@dataclass(frozen=True)
class GoldRelation:
    doc_id: str
    group: str
    arg_chemical: str
    arg_gene: str


@dataclass(frozen=True)
class LabeledExample:
    """One anonymized sentence holding exactly one chemical/gene pair."""

    example_id: str
    text: str
    label: str


def normalize_group(raw: str) -> str:
    """Map "CPR:4", "CPR4", or "cpr 4" spellings to the canonical "CPR:4"."""
    m = re.fullmatch(r"(?i)cpr[:\s]?(\d+)", raw.strip())
    if m:
        return f"CPR:{m.group(1)}"
    return raw.strip()


def split_sentences(doc: AbstractRecord) -> list[tuple[int, int]]:
    """Deterministic sentence spans over the document text.

    Returns ordered, non-overlapping (start, end) pairs that cover all
    non-whitespace characters. Empty documents yield an empty list.
    """
    text = doc.text
    spans: list[tuple[int, int]] = []
    region_start = 0
    for region in _HARD_BREAK.split(text):
        spans.extend(_split_region(region, region_start))
        region_start += len(region) + 1
    return spans


def _split_region(region: str, offset: int) -> list[tuple[int, int]]:
    cuts = [0]
    for m in _SENTENCE_BOUNDARY.finditer(region):
        before = region[: m.start()]
        prev_word = before.rsplit(None, 1)[-1] if before.split() else ""
        prev_word = prev_word.strip("([{'\"").lower()
        if prev_word in ABBREVIATIONS:
            continue
        cuts.append(m.end())
    cuts.append(len(region))
    spans = []
    for lo, hi in zip(cuts, cuts[1:]):
        piece = region[lo:hi]
        lead = len(piece) - len(piece.lstrip())
        trail = len(piece) - len(piece.rstrip())
        if lo + lead < hi - trail:
            spans.append((offset + lo + lead, offset + hi - trail))
    return spans


def _anonymize(
    sentence: str, sent_start: int, chem: EntityMention, gene: EntityMention
) -> str:
    replacements = sorted(
        [
            (chem.span_start - sent_start, chem.span_end - sent_start, CHEMICAL_PLACEHOLDER),
            (gene.span_start - sent_start, gene.span_end - sent_start, GENE_PLACEHOLDER),
        ],
        reverse=True,
    )
    out = sentence
    for start, end, token in replacements:
        out = out[:start] + token + out[end:]
    return out


def extract_pairs(
    doc: AbstractRecord,
    mentions: Sequence[EntityMention],
    relations: Sequence[GoldRelation],
    evaluated_groups: Iterable[str] = EVALUATED_GROUPS,
) -> list[LabeledExample]:
    """Emit one labeled example per same-sentence chemical-gene pair.

    Raises OffsetMismatch when a mention's surface text disagrees with the
    document at its offsets (corrupt annotations). Overlapping chemical and
    gene spans are dropped with a warning because replacing nested spans is
    ill-defined. For a pair with several gold relations the first one in
    file order wins and the conflict is logged.
    """
    text = doc.text
    evaluated = {normalize_group(g) for g in evaluated_groups}
    for m in mentions:
        if not (0 <= m.span_start < m.span_end <= len(text)):
            raise OffsetMismatch(
                f"{doc.doc_id}/{m.entity_id}: span [{m.span_start}, {m.span_end}) "
                f"outside document of length {len(text)}"
            )
        actual = text[m.span_start : m.span_end]
        if actual != m.surface:
            raise OffsetMismatch(
                f"{doc.doc_id}/{m.entity_id}: surface {m.surface!r} does not match "
                f"document text {actual!r} at [{m.span_start}, {m.span_end})"
            )

    pair_label: dict[tuple[str, str], str] = {}
    for rel in relations:
        key = (rel.arg_chemical, rel.arg_gene)
        group = normalize_group(rel.group)
        if key in pair_label:
            if pair_label[key] != group:
                logger.warning(
                    "%s: pair %s has conflicting relations (%s kept, %s ignored)",
                    doc.doc_id, key, pair_label[key], group,
                )
            continue
        pair_label[key] = group

    ordered = sorted(mentions, key=lambda m: (m.span_start, m.span_end, m.entity_id))
    examples: list[LabeledExample] = []
    seen_ids: set[str] = set()
    for sent_idx, (lo, hi) in enumerate(split_sentences(doc)):
        inside = [m for m in ordered if lo <= m.span_start and m.span_end <= hi]
        chems = [m for m in inside if m.kind is EntityKind.CHEMICAL]
        genes = [m for m in inside if m.kind is EntityKind.GENE]
        sentence = text[lo:hi]
        for chem in chems:
            for gene in genes:
                if chem.span_start < gene.span_end and gene.span_start < chem.span_end:
                    logger.warning(
                        "%s: overlapping spans %s/%s dropped",
                        doc.doc_id, chem.entity_id, gene.entity_id,
                    )
                    continue
                example_id = f"{doc.doc_id}.s{sent_idx}.{chem.entity_id}.{gene.entity_id}"
                if example_id in seen_ids:
                    logger.warning("%s: duplicate pair %s skipped", doc.doc_id, example_id)
                    continue
                seen_ids.add(example_id)
                group = pair_label.get((chem.entity_id, gene.entity_id))
                label = group if group in evaluated else FALSE_LABEL
                examples.append(
                    LabeledExample(example_id, _anonymize(sentence, lo, chem, gene), label)
                )
    return examples


def dataset_stats(examples: Sequence[LabeledExample]) -> dict[str, int]:
    """Per-label example counts plus a "total" entry."""
    counts: dict[str, int] = {}
    for ex in examples:
        counts[ex.label] = counts.get(ex.label, 0) + 1
    stats = dict(sorted(counts.items()))
    stats["total"] = len(examples)
    return stats


# ----------------------------------------------------------------------
# Tab-separated file parsing
# ----------------------------------------------------------------------

_KIND_MAP = {
    "CHEMICAL": EntityKind.CHEMICAL,
    "GENE": EntityKind.GENE,
    "GENE-Y": EntityKind.GENE,
    "GENE-N": EntityKind.GENE,
}


def read_abstracts(path) -> list[AbstractRecord]:
    records = []
    seen = set()
    for lineno, cols in _tsv_lines(path):
        if len(cols) != 3:
            raise CorpusFormatError(f"{path}:{lineno}: expected 3 columns, got {len(cols)}")
        doc_id, title, body = cols
        if not doc_id:
            raise CorpusFormatError(f"{path}:{lineno}: empty document id")
        if doc_id in seen:
            raise CorpusFormatError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        records.append(AbstractRecord(doc_id, title, body))
    return records


def read_entities(path) -> list[EntityMention]:
    mentions = []
    for lineno, cols in _tsv_lines(path):
        if len(cols) != 6:
            raise CorpusFormatError(f"{path}:{lineno}: expected 6 columns, got {len(cols)}")
        doc_id, entity_id, kind_raw, start, end, surface = cols
        kind = _KIND_MAP.get(kind_raw.upper())
        if kind is None:
            logger.warning("%s:%d: unknown entity kind %r skipped", path, lineno, kind_raw)
            continue
        mentions.append(EntityMention(doc_id, entity_id, kind, int(start), int(end), surface))
    return mentions


def read_relations(path, entities_by_doc: dict[str, dict[str, EntityMention]]) -> list[GoldRelation]:
    """Parse gold relations, resolving chemical/gene argument roles by entity kind."""
    relations = []
    for lineno, cols in _tsv_lines(path):
        if len(cols) == 4:
            doc_id, group, arg1, arg2 = cols
        elif len(cols) == 6:
            doc_id, group, _eval_flag, _name, arg1, arg2 = cols
        else:
            raise CorpusFormatError(
                f"{path}:{lineno}: expected 4 or 6 columns, got {len(cols)}"
            )
        arg1 = _ARG_PREFIX.sub("", arg1)
        arg2 = _ARG_PREFIX.sub("", arg2)
        mentions = entities_by_doc.get(doc_id, {})
        m1, m2 = mentions.get(arg1), mentions.get(arg2)
        if m1 is None or m2 is None:
            logger.warning(
                "%s:%d: relation references unknown entity (%s, %s) in %s",
                path, lineno, arg1, arg2, doc_id,
            )
            continue
        if m1.kind is EntityKind.CHEMICAL and m2.kind is EntityKind.GENE:
            chem_id, gene_id = arg1, arg2
        elif m1.kind is EntityKind.GENE and m2.kind is EntityKind.CHEMICAL:
            chem_id, gene_id = arg2, arg1
        else:
            logger.warning(
                "%s:%d: relation arguments are not a chemical-gene pair in %s",
                path, lineno, doc_id,
            )
            continue
        relations.append(GoldRelation(doc_id, normalize_group(group), chem_id, gene_id))
    return relations


def _tsv_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            yield lineno, line.split("\t")


def preprocess(
    abstracts_path,
    entities_path,
    relations_path,
    evaluated_groups: Iterable[str] = EVALUATED_GROUPS,
) -> list[LabeledExample]:
    """Run the full ingestion pipeline over one file triple.

    Documents are processed in file order and pairs in sentence order, so
    the output is deterministic for fixed inputs.
    """
    abstracts = read_abstracts(abstracts_path)
    mentions = read_entities(entities_path)
    by_doc: dict[str, list[EntityMention]] = {}
    index: dict[str, dict[str, EntityMention]] = {}
    for m in mentions:
        by_doc.setdefault(m.doc_id, []).append(m)
        index.setdefault(m.doc_id, {})[m.entity_id] = m
    relations = read_relations(relations_path, index)
    rel_by_doc: dict[str, list[GoldRelation]] = {}
    for r in relations:
        rel_by_doc.setdefault(r.doc_id, []).append(r)

    examples: list[LabeledExample] = []
    for doc in abstracts:
        examples.extend(
            extract_pairs(
                doc,
                by_doc.get(doc.doc_id, []),
                rel_by_doc.get(doc.doc_id, []),
                evaluated_groups,
            )
        )
    return examples
