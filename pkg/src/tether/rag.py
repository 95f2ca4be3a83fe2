"""Retrieval pipeline: ingest reference documents and chat history, chunk and
embed them, serve exact top-k cosine retrieval over a flat index.

The index is deliberately a flat exhaustive scan with sequential float math.
At personal-corpus scale that is fast enough, and it keeps retrieval exactly
reproducible, so results can be checked against an independent scan.
"""

from __future__ import annotations

import base64
import logging
import struct
import threading
from dataclasses import dataclass

from .config import RagParams
from .errors import BadParams, DuplicateInFlight, EmbedFailed, TetherError
from .gateway import Gateway

logger = logging.getLogger(__name__)

SOURCE_REFERENCE = "REFERENCE"
SOURCE_CHAT = "CHAT_HISTORY"


@dataclass(frozen=True)
class Document:
    doc_id: str
    source: str
    title: str
    text: str
    added_at: float

    def validate(self) -> None:
        if not self.doc_id:
            raise TetherError("doc_id must be non-empty")
        if not self.text:
            raise TetherError("document text must be non-empty")
        if self.source not in (SOURCE_REFERENCE, SOURCE_CHAT):
            raise TetherError(f"unknown document source {self.source!r}")


@dataclass(frozen=True)
class DocumentChunk:
    doc_id: str
    chunk_index: int
    start: int
    end: int
    text: str
    embedding: tuple[float, ...]


@dataclass(frozen=True)
class ScoredChunk:
    chunk: DocumentChunk
    score: float


def chunk_text(text: str, size: int, overlap: int) -> list[tuple[int, int]]:
    """Split [0, len(text)) into spans of `size` chars stepping size - overlap.
    The final span ends exactly at len(text); consecutive spans overlap by
    exactly `overlap` chars, which is what makes reconstruction exact."""
    if overlap < 0 or size <= overlap:
        raise BadParams(f"need size > overlap >= 0, got size={size} overlap={overlap}")
    if not text:
        raise BadParams("text must be non-empty")
    step = size - overlap
    spans = []
    start = 0
    while True:
        end = min(start + size, len(text))
        spans.append((start, end))
        if end >= len(text):
            return spans
        start += step


def reconstruct(chunks: list[str], overlap: int) -> str:
    """Inverse of chunk_text: drop each chunk's leading overlap except the first."""
    if not chunks:
        return ""
    return chunks[0] + "".join(c[overlap:] for c in chunks[1:])


def encode_embedding(vec: tuple[float, ...] | list[float]) -> str:
    return base64.b64encode(struct.pack(f"<{len(vec)}d", *vec)).decode("ascii")


def decode_embedding(blob: str) -> tuple[float, ...]:
    raw = base64.b64decode(blob.encode("ascii"))
    return struct.unpack(f"<{len(raw) // 8}d", raw)


class RagEngine:
    """One writer, many readers. Indexing a document is atomic: either all of
    its chunks land (replacing any prior version) or none do."""

    def __init__(self, gateway: Gateway, params: RagParams, persist=None):
        self.gateway = gateway
        self.params = params
        self.persist = persist  # callable(doc_payload) -> None, or None
        self._lock = threading.RLock()
        self._docs: dict[str, Document] = {}
        self._chunks: dict[str, list[DocumentChunk]] = {}
        self._inflight: set[str] = set()
        self._chat_retry: list = []

    # --- indexing ------------------------------------------------------------

    def index_document(self, doc: Document, _persist: bool = True) -> dict:
        doc.validate()
        with self._lock:
            if doc.doc_id in self._inflight:
                raise DuplicateInFlight(f"document {doc.doc_id} is already being indexed")
            self._inflight.add(doc.doc_id)
        try:
            spans = chunk_text(doc.text, self.params.chunk_size, self.params.chunk_overlap)
            texts = [doc.text[a:b] for a, b in spans]
            try:
                vectors = self.gateway.embed_batch(texts)
            except TetherError as e:
                raise EmbedFailed(f"embedding failed for {doc.doc_id}: {e.message}") from e
            chunks = [
                DocumentChunk(doc_id=doc.doc_id, chunk_index=i, start=a, end=b,
                              text=texts[i], embedding=tuple(vectors[i]))
                for i, (a, b) in enumerate(spans)
            ]
            with self._lock:
                self._docs[doc.doc_id] = doc
                self._chunks[doc.doc_id] = chunks
            if self.persist is not None and _persist:
                self.persist(self._doc_payload(doc, chunks))
            return {"chunks_indexed": len(chunks)}
        finally:
            with self._lock:
                self._inflight.discard(doc.doc_id)

    def index_chat_message(self, message_id: int, text: str, t: float) -> bool:
        """Index a persisted chat message as retrievable history. Short
        messages are skipped; embed failures stay queued for retry."""
        if len(text) < self.params.min_chat_index_chars:
            return False
        doc = Document(doc_id=f"chat:{message_id}", source=SOURCE_CHAT,
                       title=f"chat message {message_id}", text=text, added_at=t)
        try:
            self.index_document(doc)
        except EmbedFailed:
            self._chat_retry.append((message_id, text, t))
            raise
        return True

    def retry_pending_chat(self) -> int:
        pending, self._chat_retry = self._chat_retry, []
        indexed = 0
        for message_id, text, t in pending:
            try:
                if self.index_chat_message(message_id, text, t):
                    indexed += 1
            except EmbedFailed:
                continue
        return indexed

    # --- retrieval -------------------------------------------------------------

    def query(self, text: str, k: int | None = None, min_score: float | None = None
              ) -> list[ScoredChunk]:
        k = self.params.k if k is None else k
        min_score = self.params.min_score if min_score is None else min_score
        if k < 1:
            raise BadParams("k must be >= 1")
        with self._lock:
            flat = [c for chunks in self._chunks.values() for c in chunks]
        if not flat:
            return []
        try:
            qvec = self.gateway.embed_batch([text])[0]
        except TetherError as e:
            raise EmbedFailed(f"query embedding failed: {e.message}") from e
        scored = [
            ScoredChunk(chunk=c, score=sum(a * b for a, b in zip(qvec, c.embedding)))
            for c in flat
        ]
        scored = [s for s in scored if s.score >= min_score]
        scored.sort(key=lambda s: (-s.score, s.chunk.doc_id, s.chunk.chunk_index))
        return scored[:k]

    # --- introspection / persistence ----------------------------------------------

    def doc_count(self) -> int:
        with self._lock:
            return len(self._docs)

    def chunk_count(self) -> int:
        with self._lock:
            return sum(len(c) for c in self._chunks.values())

    def has_chunk(self, doc_id: str, chunk_index: int) -> bool:
        with self._lock:
            chunks = self._chunks.get(doc_id, [])
            return any(c.chunk_index == chunk_index for c in chunks)

    def all_embeddings(self) -> list[tuple[float, ...]]:
        with self._lock:
            return [c.embedding for chunks in self._chunks.values() for c in chunks]

    def manifest_lines(self) -> list[str]:
        with self._lock:
            rows = sorted(self._docs.values(), key=lambda d: d.doc_id)
            return [f"{d.doc_id}\t{len(self._chunks[d.doc_id])}\t{d.source}\t{d.title}"
                    for d in rows]

    @staticmethod
    def _doc_payload(doc: Document, chunks: list[DocumentChunk]) -> dict:
        return {
            "doc_id": doc.doc_id,
            "source": doc.source,
            "title": doc.title,
            "text": doc.text,
            "added_at": doc.added_at,
            "chunks": [
                {"chunk_index": c.chunk_index, "start": c.start, "end": c.end,
                 "embedding": encode_embedding(c.embedding)}
                for c in chunks
            ],
        }

    def load_payload(self, payload: dict) -> None:
        """Rebuild one document's chunks from a persisted payload."""
        doc = Document(doc_id=payload["doc_id"], source=payload["source"],
                       title=payload["title"], text=payload["text"],
                       added_at=payload["added_at"])
        chunks = [
            DocumentChunk(doc_id=doc.doc_id, chunk_index=c["chunk_index"],
                          start=c["start"], end=c["end"],
                          text=doc.text[c["start"]:c["end"]],
                          embedding=decode_embedding(c["embedding"]))
            for c in payload["chunks"]
        ]
        with self._lock:
            self._docs[doc.doc_id] = doc
            self._chunks[doc.doc_id] = chunks
