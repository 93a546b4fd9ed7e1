"""Published d90 reference values for large pretrained language models.

These numbers were estimated on full-scale transformer checkpoints and GLUE
sentence-pair tasks; nothing in this package reproduces them at desk scale.
The report command prints them as clearly-labeled reference rows next to
locally measured results.
"""

from __future__ import annotations

# (model, task, method, d90)
REFERENCE_D90 = (
    ("BERT-Base", "MRPC", "said", 1608),
    ("BERT-Base", "MRPC", "did", 1861),
    ("BERT-Base", "QQP", "said", 8030),
    ("BERT-Base", "QQP", "did", 9295),
    ("BERT-Large", "MRPC", "said", 1037),
    ("BERT-Large", "MRPC", "did", 2493),
    ("BERT-Large", "QQP", "said", 1200),
    ("BERT-Large", "QQP", "did", 1389),
    ("RoBERTa-Base", "MRPC", "said", 896),
    ("RoBERTa-Base", "MRPC", "did", 1000),
    ("RoBERTa-Base", "QQP", "said", 896),
    ("RoBERTa-Base", "QQP", "did", 1389),
    ("RoBERTa-Large", "MRPC", "said", 207),
    ("RoBERTa-Large", "MRPC", "did", 322),
    ("RoBERTa-Large", "QQP", "said", 774),
    ("RoBERTa-Large", "QQP", "did", 774),
)

REFERENCE_LABEL = "reference (published, not measured here)"
