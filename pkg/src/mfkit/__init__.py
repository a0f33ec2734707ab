"""Cross-language moral foundation measurement toolkit."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    FOUNDATIONS,
    Dataset,
    Document,
    FoundationLabel,
    Prediction,
    load_dataset,
    make_batches,
    read_predictions,
    save_dataset,
    stratified_split,
    undersample,
    write_predictions,
)
from .evaluation import (  # noqa: F401
    ClassPrior,
    EvalReport,
    LearningCurve,
    baseline_expected,
    batches_to_threshold,
    evaluate,
    lenient_match,
    sample_mislabeled,
)
