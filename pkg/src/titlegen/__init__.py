"""Stack Overflow post title generation pipeline.

Subsystems: dataset ingestion and bi-modal input formatting (:mod:`corpus`),
ROUGE scoring (:mod:`metrics`), candidate post-ranking (:mod:`ranker`),
generation backends (:mod:`generator`), self-improvement augmentation
(:mod:`selfimprove`), and the evaluation harness (:mod:`evalharness`).
"""

__version__ = "0.1.0"
