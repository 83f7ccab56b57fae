"""Neural reranking for event linking: a miniature biencoder retriever and a
crossencoder reranker, reading the corpus/dictionary files produced by the
`xlel` toolkit and writing run files in the same prediction schema."""

__version__ = "0.1.0"
