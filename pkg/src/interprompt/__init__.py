"""Story-completion prompting for interpersonal risk factor detection and explanation."""

from .corpus import ContingencyTable, DatasetSplit, IngestionError, Post, contingency, delta_ratios, load_dataset
from .metrics import bleu1, classification_metrics, corpus_generation_scores, exact_match, rouge1, rougeL
from .parser import ParsedCompletion, UnparseableCompletion, parse_completion, parse_or_default
from .prompts import PromptTemplate, build_completion, build_finetune_record, build_nshot_prompt
from .significance import SampleVector, TTestResult, pairwise_matrix, t_test

__version__ = "0.1.0"

__all__ = [
    "ContingencyTable",
    "DatasetSplit",
    "IngestionError",
    "ParsedCompletion",
    "Post",
    "PromptTemplate",
    "SampleVector",
    "TTestResult",
    "UnparseableCompletion",
    "bleu1",
    "build_completion",
    "build_finetune_record",
    "build_nshot_prompt",
    "classification_metrics",
    "contingency",
    "corpus_generation_scores",
    "delta_ratios",
    "exact_match",
    "load_dataset",
    "pairwise_matrix",
    "parse_completion",
    "parse_or_default",
    "rouge1",
    "rougeL",
    "t_test",
]
