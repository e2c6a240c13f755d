"""Hybrid sparse+dense retrieval over raw messages, fused by reciprocal rank.

Seeds the graph explorer: the query concatenates the failed question with its
golden answer, both retrievers rank the raw message set, and the fused top half
of the list (plus the question variable) becomes the initial to-explore list.
"""

from __future__ import annotations

import json
import math
import re
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

from .errors import BackendError, NotFound
from .graph import ExecutionGraph, VarRef
from .recorder import fnv1a64

BM25_K1 = 1.2
BM25_B = 0.75
RRF_K = 60
DEFAULT_DIM = 256

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on any non-alphanumeric, drop empties."""
    return _TOKEN.findall(text.lower())


@dataclass
class Corpus:
    """Ordered (doc_id, text) pairs with cached token statistics."""

    documents: list[tuple[VarRef, str]]
    _tokens: list[list[str]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ids = [d for d, _ in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus doc_ids must be unique")
        self._tokens = [tokenize(text) for _, text in self.documents]

    def __len__(self) -> int:
        return len(self.documents)


RankedList = list[tuple[VarRef, float]]  # rank 1 first; scores non-increasing


def _take_top(scored: dict[VarRef, float], top_n: int) -> RankedList:
    ordered = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
    return ordered[:top_n]


def bm25_rank(corpus: Corpus, query: str, top_n: int) -> RankedList:
    """Okapi BM25 with k1=1.2, b=0.75 and idf = ln((N-df+0.5)/(df+0.5) + 1).

    Each query term occurrence contributes; zero-score documents are excluded.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    n_docs = len(corpus)
    if n_docs == 0:
        return []
    doc_tfs = [Counter(toks) for toks in corpus._tokens]
    doc_lens = [len(toks) for toks in corpus._tokens]
    avgdl = sum(doc_lens) / n_docs if n_docs else 0.0
    df = Counter()
    for tf in doc_tfs:
        df.update(tf.keys())
    q_terms = tokenize(query)
    scored: dict[VarRef, float] = {}
    for (doc_id, _), tf, dl in zip(corpus.documents, doc_tfs, doc_lens):
        denom_norm = BM25_K1 * (1 - BM25_B + BM25_B * dl / avgdl) if avgdl else 0.0
        s = 0.0
        for t in q_terms:
            f = tf.get(t)
            if not f:
                continue
            idf = math.log((n_docs - df[t] + 0.5) / (df[t] + 0.5) + 1)
            s += idf * f * (BM25_K1 + 1) / (f + denom_norm)
        if s > 0.0:
            scored[doc_id] = s
    return _take_top(scored, top_n)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> list[float]: ...


class HashingEmbedder:
    """Feature-hashing bag of words: term counts hashed by FNV-1a mod dim, L2-normalized.

    Deterministic and dependency-free; empty token sets map to the zero vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for term in tokenize(text):
            vec[fnv1a64(term) % self.dim] += 1.0
        norm = math.sqrt(sum(x * x for x in vec))
        if norm == 0.0:
            return vec
        return [x / norm for x in vec]


class HttpEmbeddingProvider:
    """Embedding over HTTP: POST {"texts": [...]} -> {"vectors": [[...], ...]}."""

    def __init__(self, url: str, dim: int, timeout: float = 30.0):
        self.url = url
        self.dim = dim
        self.timeout = timeout

    def embed(self, text: str) -> list[float]:
        payload = json.dumps({"texts": [text]}).encode("utf-8")
        req = urllib.request.Request(self.url, data=payload,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except OSError as exc:
            raise BackendError(f"embedding service failed: {exc}", retryable=True) from None
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != 1:
            raise BackendError("embedding service returned no vectors", retryable=False)
        return [float(x) for x in vectors[0]]


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def dense_rank(corpus: Corpus, query: str, provider: EmbeddingProvider, top_n: int) -> RankedList:
    """Cosine similarity against the provider's embeddings; zero scores excluded."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    q_vec = provider.embed(query)
    scored: dict[VarRef, float] = {}
    for doc_id, text in corpus.documents:
        s = _cosine(q_vec, provider.embed(text))
        if s > 0.0:
            scored[doc_id] = s
    return _take_top(scored, top_n)


def rrf_fuse(lists: Iterable[RankedList], k: int = RRF_K,
             top_n: Optional[int] = None) -> RankedList:
    """score(d) = sum over lists containing d of 1/(k + rank), rank 1-based."""
    scored: dict[VarRef, float] = {}
    for ranked in lists:
        for rank, (doc_id, _) in enumerate(ranked, start=1):
            scored[doc_id] = scored.get(doc_id, 0.0) + 1.0 / (k + rank)
    ordered = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
    return ordered if top_n is None else ordered[:top_n]


def seed_exploration(graph: ExecutionGraph, question_var: str, golden_answer_text: str,
                     n: int, provider: Optional[EmbeddingProvider] = None) -> list[VarRef]:
    """Pick the raw messages most likely to carry the critical information.

    Corpus: latest versions of all raw_message variables. Query: question text,
    one space, golden answer. Sparse and dense top-n are fused with k=60; the
    top floor(n/2) messages are returned with the question variable appended.
    """
    question = graph.variable(question_var)
    if not question.versions:
        raise NotFound(f"question variable {question_var!r} has no versions")
    provider = provider or HashingEmbedder()
    docs: list[tuple[VarRef, str]] = []
    for chain in sorted(graph.variables.values(), key=lambda c: c.var_id):
        if chain.category == "raw_message" and chain.versions:
            latest = chain.latest()
            docs.append(((chain.var_id, latest.version), latest.value))
    question_ref: VarRef = (question_var, question.latest().version)
    if not docs:
        return [question_ref]
    corpus = Corpus(docs)
    query = question.latest().value + " " + golden_answer_text
    fused = rrf_fuse([bm25_rank(corpus, query, n), dense_rank(corpus, query, provider, n)],
                     k=RRF_K, top_n=n // 2)
    return [doc_id for doc_id, _ in fused] + [question_ref]


def recall_at_k(seeds: Sequence[VarRef], golden_evidence_ids: Iterable[str], k: int = 8) -> float:
    """Fraction of golden evidence variable ids present among the top-k seeds."""
    golden = set(golden_evidence_ids)
    if not golden:
        raise ValueError("golden evidence set must be non-empty")
    top = {var_id for var_id, _ in seeds[:k]}
    return len(top & golden) / len(golden)
