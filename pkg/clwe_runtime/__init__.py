"""Runtime for pseudo-corpus augmented cross-lingual word embeddings."""
