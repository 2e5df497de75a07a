"""Metaphoric paraphrase generation toolkit.

Two generation routes over the same tokenized-sentence representation:

* lexical replacement -- swap a marked verb for a WordNet troponym ranked
  against the mean context embedding (``lexrep``),
* metaphor masking -- train an encoder-decoder transformer on verb-masked
  parallel pairs and let it fill the mask at generation time
  (``mask_corpus`` + ``transformer``),

plus the rating-collection service and score-aggregation harness used to
evaluate the outputs (``annotation_service``, ``eval_harness``).
"""

__version__ = "0.1.0"
