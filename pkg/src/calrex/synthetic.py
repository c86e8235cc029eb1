"""Synthetic chemical-protein corpora for demos, fixtures, and benchmarks.

Sentences are drawn from class-conditional unigram distributions with
deliberately overlapping supports: each relation class owns a small set of
signature verbs, but every sentence also samples from a shared pool that
includes all signatures plus neutral filler words. The `overlap` knob sets
the probability of drawing from the shared pool, so class separability (and
with it the achievable accuracy) is controllable. Sentences carry the same
@CHEMICAL$ / @GENE$ placeholder contract as preprocessed real data.

`write_chemprot_fixture` emits the same material as raw ChemProt-style
files (abstracts, entities, relations) with consistent character offsets,
plus an unlabeled pool, so the full pipeline can run end to end without the
real corpus. Run `python -m calrex.synthetic --out DIR` to generate one.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .corpus import CHEMICAL_PLACEHOLDER, GENE_PLACEHOLDER, FALSE_LABEL
from .selftrain import UnlabeledExample

CLASS_LABELS = ("CPR:3", "CPR:4", "CPR:5", "CPR:6", "CPR:9", FALSE_LABEL)

SIGNATURES = {
    "CPR:3": ("activates", "upregulates", "induces", "stimulates", "elevates", "amplifies"),
    "CPR:4": ("inhibits", "suppresses", "downregulates", "blocks", "attenuates", "represses"),
    "CPR:5": ("agonist", "engages", "potentiates", "sensitizes", "recruits", "primes"),
    "CPR:6": ("antagonist", "antagonizes", "counteracts", "displaces", "occludes", "neutralizes"),
    "CPR:9": ("substrate", "metabolized", "hydrolyzed", "catalyzed", "oxidized", "converted"),
    FALSE_LABEL: ("measured", "observed", "detected", "reported", "studied", "examined"),
}

FILLERS = (
    "the", "of", "by", "in", "with", "was", "were", "levels", "expression",
    "activity", "receptor", "protein", "cells", "pathway", "signaling",
    "dose", "treatment", "effect", "response", "assay",
)

CHEMICAL_NAMES = ("Aspirin", "Caffeine", "Morphine", "Nicotine", "Estradiol", "Ketamine")
GENE_NAMES = ("COX2", "TP53", "EGFR", "BRCA1", "CYP3A4", "AKT1")


def _word_sampler(overlap: float):
    shared = tuple(w for sig in SIGNATURES.values() for w in sig) + FILLERS

    def draw(rng, label: str, count: int) -> list[str]:
        own = SIGNATURES[label]
        words = []
        for _ in range(count):
            if rng.random() < overlap:
                words.append(shared[rng.integers(len(shared))])
            else:
                words.append(own[rng.integers(len(own))])
        return words

    return draw


def sample_sentences(
    n: int,
    seed: int = 0,
    overlap: float = 0.5,
    min_words: int = 4,
    max_words: int = 9,
    class_weights=None,
    rare_vocab_size: int = 4000,
    rare_per_sentence: int = 2,
) -> tuple[list[str], list[str]]:
    """Draw n anonymized sentences and their labels.

    Returns (texts, labels); each text contains the two placeholder tokens
    exactly once. Class draw is uniform unless `class_weights` is given.

    Besides the class-signal words, each sentence carries a few rare,
    label-uninformative identifier tokens (compound codes, measurement ids)
    drawn from a large vocabulary. They play the role entity names play in
    real abstracts: a high-capacity model can memorize training labels
    through them and become over-confident, which is the failure mode the
    calibration machinery is meant to expose.
    """
    rng = np.random.default_rng(seed)
    draw_words = _word_sampler(overlap)
    weights = None if class_weights is None else np.asarray(class_weights, dtype=float)
    if weights is not None:
        weights = weights / weights.sum()
    texts, labels = [], []
    for _ in range(n):
        label = CLASS_LABELS[rng.choice(len(CLASS_LABELS), p=weights)]
        count = int(rng.integers(min_words, max_words + 1))
        words = draw_words(rng, label, count)
        for _ in range(rare_per_sentence):
            code = f"cmpd{rng.integers(rare_vocab_size):04d}"
            words.insert(int(rng.integers(0, len(words) + 1)), code)
        cut = int(rng.integers(0, len(words) + 1))
        tokens = [CHEMICAL_PLACEHOLDER, *words[:cut], GENE_PLACEHOLDER, *words[cut:]]
        texts.append(" ".join(tokens) + " .")
        labels.append(label)
    return texts, labels


def sample_pool(
    n: int, seed: int = 0, overlap: float = 0.5, id_prefix: str = "pool"
) -> list[UnlabeledExample]:
    """Draw an unlabeled pool from the same sentence distribution."""
    texts, _ = sample_sentences(n, seed=seed, overlap=overlap)
    width = len(str(max(n - 1, 1)))
    return [
        UnlabeledExample(f"{id_prefix}-{i:0{width}d}", text)
        for i, text in enumerate(texts)
    ]


def _build_document(rng, doc_id: str, n_sentences: int, overlap: float):
    """One abstract plus its entity and relation rows, offsets included."""
    title = "Synthetic report on chemical and protein interactions."
    draw_words = _word_sampler(overlap)
    body_parts: list[str] = []
    entities: list[tuple] = []  # (entity_id, kind, start, end, surface)
    relations: list[tuple] = []  # (group, chem_id, gene_id)
    offset = len(title) + 1  # body offsets start after title + tab
    serial = 0
    for _ in range(n_sentences):
        label = CLASS_LABELS[rng.integers(len(CLASS_LABELS))]
        chem = CHEMICAL_NAMES[rng.integers(len(CHEMICAL_NAMES))]
        gene = GENE_NAMES[rng.integers(len(GENE_NAMES))]
        count = int(rng.integers(3, 7))
        words = draw_words(rng, label, count)
        cut = int(rng.integers(1, count + 1))
        lead = " ".join(words[:cut])
        tail = " ".join(words[cut:])
        sentence = f"{chem} {lead} {gene}" + (f" {tail}." if tail else ".")
        start = offset + (len(" ".join(body_parts)) + 1 if body_parts else 0)
        chem_id = f"T{serial + 1}"
        gene_id = f"T{serial + 2}"
        serial += 2
        entities.append((chem_id, "CHEMICAL", start, start + len(chem), chem))
        gene_start = start + len(chem) + 1 + len(lead) + 1
        entities.append((gene_id, "GENE-Y", gene_start, gene_start + len(gene), gene))
        if label != FALSE_LABEL:
            relations.append((label, chem_id, gene_id))
        body_parts.append(sentence)
    return title, " ".join(body_parts), entities, relations


def write_chemprot_fixture(
    out_dir,
    n_docs: int = 40,
    seed: int = 0,
    overlap: float = 0.5,
    pool_size: int = 200,
    prefix: str = "synthetic",
) -> dict[str, Path]:
    """Write ChemProt-format TSVs plus an unlabeled pool under out_dir.

    Returns the paths keyed by role: abstracts, entities, relations, pool.
    """
    from .dataio import write_pool  # local import to avoid a cycle

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {
        "abstracts": out_dir / f"{prefix}_abstracts.tsv",
        "entities": out_dir / f"{prefix}_entities.tsv",
        "relations": out_dir / f"{prefix}_relations.tsv",
        "pool": out_dir / f"{prefix}_pool.jsonl",
    }
    with open(paths["abstracts"], "w", encoding="utf-8") as fa, open(
        paths["entities"], "w", encoding="utf-8"
    ) as fe, open(paths["relations"], "w", encoding="utf-8") as fr:
        for d in range(n_docs):
            doc_id = f"{10000 + d}"
            n_sentences = int(rng.integers(1, 4))
            title, body, entities, relations = _build_document(
                rng, doc_id, n_sentences, overlap
            )
            fa.write(f"{doc_id}\t{title}\t{body}\n")
            for entity_id, kind, start, end, surface in entities:
                fe.write(f"{doc_id}\t{entity_id}\t{kind}\t{start}\t{end}\t{surface}\n")
            for group, chem_id, gene_id in relations:
                fr.write(f"{doc_id}\t{group}\tArg1:{chem_id}\tArg2:{gene_id}\n")
    write_pool(paths["pool"], sample_pool(pool_size, seed=seed + 1, overlap=overlap))
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate a synthetic ChemProt-style fixture dataset."
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--docs", type=int, default=40)
    parser.add_argument("--pool-size", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--overlap", type=float, default=0.5)
    args = parser.parse_args(argv)
    paths = write_chemprot_fixture(
        args.out, n_docs=args.docs, seed=args.seed,
        overlap=args.overlap, pool_size=args.pool_size,
    )
    for role, path in paths.items():
        print(f"{role}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
