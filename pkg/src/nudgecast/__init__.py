"""nudgecast: predict behavioral food-policy effect sizes with fine-tuned LLMs.

Pipeline: ingest a corpus of experiment records, render chat prompts under
template variants and feature masks, orchestrate fine-tune/inference jobs
against a remote or mock provider, and evaluate predictions (direction
accuracy, coverage, signed magnitude errors across reruns).  A small HTTP
service plus browser UI exposes what-if scenario predictions.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Corpus,
    EffectOutcome,
    Split,
    SplitSpec,
    StudyRecord,
    ingest_corpus,
    load_unseen,
    merge_validation_into_train,
    split_corpus,
)
from .effectstats import (  # noqa: F401
    Direction,
    NaiveBaseline,
    d_from_means,
    d_from_r,
    naive_baseline,
    r_from_d,
)
from .evalkit import (  # noqa: F401
    EvalReport,
    PredictionRecord,
    evaluate_model,
    evaluate_run,
    parse_prediction,
    signed_magnitude_error,
)
from .promptgen import (  # noqa: F401
    ChatPrompt,
    FeatureMask,
    PromptTemplate,
    build_training_record,
    export_training_file,
    get_template,
    render_completion,
    render_prompt,
)
