"""Fine-tuning worker: job specs in, exchange-format predictions out.

This package never computes evaluation metrics; the measurement toolkit
owns those. The only coupling is the file contracts: FineTuneJobSpec JSON,
dataset CSV/JSONL, and prediction JSONL.
"""

__version__ = "0.1.0"

FOUNDATIONS = ("care", "fairness", "loyalty", "authority", "sanctity")
GOLD_LABELS = FOUNDATIONS + ("nonmoral",)
