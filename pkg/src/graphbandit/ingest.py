"""Turn raw tag-annotation datasets into item features and user positives.

Pipeline: tokenize tags, drop rare tokens, build a TF-IDF matrix over items,
reduce it with PCA, and serialize the result (together with each user's
positive items) as a deterministic JSON archive that the replay environment
consumes.

Input files are tab-separated with a header row, in the layout of the
HetRec 2011 dumps: a tag-assignment file with (user, item, tag) columns and
an interaction file with (user, item) columns.  When the tag column holds
numeric tag ids, a lookup file mapping id to tag string can be supplied.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .linalg import PCAResult, pca_fit

__all__ = [
    "TagCorpus",
    "ItemFeatures",
    "tokenize_tag",
    "filter_rare",
    "build_tfidf",
    "featurize",
    "load_tag_corpus",
    "subsample_users",
    "write_feature_archive",
    "read_feature_archive",
    "ARCHIVE_FORMAT",
]

ARCHIVE_FORMAT = "graphbandit-features-v1"

_SPLIT = re.compile(r"[_\-'’\s]+")


@dataclass
class TagCorpus:
    """Deduplicated tag assignments and positive interactions.

    ``records`` holds (user, item, raw_tag) triples and ``interactions``
    (user, item) pairs, all with dense nonnegative integer ids.  The
    ``user_ids`` / ``item_ids`` lists map those internal ids back to the
    source identifiers.
    """

    records: list
    interactions: list
    user_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)

    @property
    def n_items(self):
        return len(self.item_ids) if self.item_ids else (
            1 + max((r[1] for r in self.records), default=-1)
        )


def tokenize_tag(raw):
    """Lowercase and split on underscore, hyphen, apostrophe and whitespace."""
    return [tok for tok in _SPLIT.split(raw.lower()) if tok]


def filter_rare(token_stream, min_count=10):
    """Tokens whose total occurrence count is at least ``min_count``.

    ``token_stream`` is any iterable of tokens, counted with multiplicity.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(token_stream)
    kept = {tok for tok, cnt in counts.items() if cnt >= min_count}
    if not kept:
        raise ValueError(
            f"no token reaches min_count={min_count}; the corpus is too small"
        )
    return kept


def build_tfidf(corpus, vocabulary):
    """Items-by-tokens TF-IDF matrix.

    TF is the raw count of a token among an item's tag tokens; IDF is
    ``ln(n_items / n_items_containing_token)``.  Items with no retained
    tokens get a zero row.  ``vocabulary`` maps token to column index.
    """
    if not vocabulary:
        raise ValueError("vocabulary is empty")
    n_items = corpus.n_items
    tf = np.zeros((n_items, len(vocabulary)))
    for _, item, raw in corpus.records:
        for tok in tokenize_tag(raw):
            col = vocabulary.get(tok)
            if col is not None:
                tf[item, col] += 1.0
    df = (tf > 0).sum(axis=0)
    idf = np.zeros(len(vocabulary))
    present = df > 0
    idf[present] = np.log(n_items / df[present])
    return tf * idf


@dataclass
class ItemFeatures:
    """Output of the featurization pipeline.

    ``features`` maps internal item id to its reduced feature vector; items
    that could not be featurized (no tags) are absent.
    """

    features: dict
    vocabulary: dict
    pca_basis: PCAResult

    @property
    def dim(self):
        return self.pca_basis.n_components


def featurize(corpus, n_components=25, min_count=10):
    """Full pipeline: tokenize, filter rare tokens, TF-IDF, PCA projection."""
    tokens = (
        tok for _, _, raw in corpus.records for tok in tokenize_tag(raw)
    )
    kept = filter_rare(tokens, min_count=min_count)
    vocabulary = {tok: i for i, tok in enumerate(sorted(kept))}
    matrix = build_tfidf(corpus, vocabulary)
    try:
        basis = pca_fit(matrix, n_components)
    except ValueError as exc:
        msg = str(exc)
        if "rank" in msg or "ambient dimension" in msg or "rows" in msg:
            raise ValueError(
                f"TF-IDF matrix cannot support {n_components} components "
                f"({exc}); retry with a smaller target dimension"
            ) from exc
        raise
    projected = basis.transform(matrix)
    tagged_items = sorted({item for _, item, _ in corpus.records})
    features = {item: projected[item] for item in tagged_items}
    return ItemFeatures(features=features, vocabulary=vocabulary, pca_basis=basis)


def _read_tsv(path, columns):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path} is missing columns {missing}")
        for row in reader:
            yield tuple(row[c] for c in columns)


def load_tag_corpus(
    tags_path,
    interactions_path,
    user_col="userID",
    item_col="itemID",
    tag_col="tag",
    tag_lookup_path=None,
    tag_id_col="tagID",
    tag_value_col="tagValue",
):
    """Read tab-separated tag-assignment and interaction files.

    With ``tag_lookup_path`` the tag column is treated as an id resolved
    through the lookup file; rows whose id is unknown are dropped.  Users
    and items are re-indexed densely in order of first appearance; duplicate
    (user, item, tag) triples are dropped.
    """
    lookup = None
    if tag_lookup_path is not None:
        lookup = {
            tag_id: value
            for tag_id, value in _read_tsv(tag_lookup_path, [tag_id_col, tag_value_col])
        }

    users, items = {}, {}

    def intern(table, key):
        if key not in table:
            table[key] = len(table)
        return table[key]

    records, seen = [], set()
    for user, item, tag in _read_tsv(tags_path, [user_col, item_col, tag_col]):
        if lookup is not None:
            tag = lookup.get(tag)
            if tag is None:
                continue
        triple = (user, item, tag)
        if triple in seen:
            continue
        seen.add(triple)
        records.append((intern(users, user), intern(items, item), tag))

    interactions, seen_pairs = [], set()
    for user, item in _read_tsv(interactions_path, [user_col, item_col]):
        if (user, item) in seen_pairs:
            continue
        seen_pairs.add((user, item))
        # only users/items that appear in the tag file can be featurized
        if user in users and item in items:
            interactions.append((users[user], items[item]))

    return TagCorpus(
        records=records,
        interactions=interactions,
        user_ids=list(users),
        item_ids=list(items),
    )


def subsample_users(corpus, max_users, seed):
    """Uniformly keep at most ``max_users`` users (seeded, deterministic)."""
    present = sorted({u for u, _, _ in corpus.records})
    if max_users >= len(present):
        return corpus
    rng = np.random.default_rng(seed)
    kept = set(rng.choice(present, size=max_users, replace=False).tolist())
    records = [r for r in corpus.records if r[0] in kept]
    interactions = [p for p in corpus.interactions if p[0] in kept]
    return TagCorpus(
        records=records,
        interactions=interactions,
        user_ids=corpus.user_ids,
        item_ids=corpus.item_ids,
    )


def _archive_payload(item_features, corpus, provenance):
    # only featurized items make it into the archive, in a dense row order
    items = sorted(item_features.features)
    row_of = {item: row for row, item in enumerate(items)}
    positives = {}
    for user, item in corpus.interactions:
        if item in row_of:
            positives.setdefault(user, set()).add(row_of[item])
    users = sorted(u for u, rows in positives.items() if rows)
    return {
        "format": ARCHIVE_FORMAT,
        "dimension": item_features.dim,
        "n_items": len(items),
        "item_ids": [
            corpus.item_ids[i] if corpus.item_ids else i for i in items
        ],
        "features": [item_features.features[i].tolist() for i in items],
        "user_ids": [
            corpus.user_ids[u] if corpus.user_ids else u for u in users
        ],
        "positives": [sorted(positives[u]) for u in users],
        "provenance": provenance,
    }


def write_feature_archive(path, item_features, corpus, provenance=None):
    """Serialize features plus user positives as canonical (sorted-key) JSON.

    The encoding is deterministic: the same corpus and parameters produce a
    byte-identical file, and floats round-trip exactly through ``json``.
    """
    payload = _archive_payload(item_features, corpus, provenance or {})
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    return payload


def read_feature_archive(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != ARCHIVE_FORMAT:
        raise ValueError(f"unrecognized archive format in {path}")
    return payload
