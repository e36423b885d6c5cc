"""Python access to the rule extraction and bias correction library."""

from ._core import (
    CnnModel,
    RuleSet,
    abx_uniqueness_check,
    binarize,
    build_model,
    classify,
    compute_thresholds,
    decision_path,
    feature_norm,
    filter_mask,
    generate_benchmark,
    iou_scores,
    label_tokens,
    learn_ruleset,
    load_checkpoint,
    parse_ruleset,
    print_ruleset,
    semantic_similarity_loss,
    size_stats,
    stratification_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
