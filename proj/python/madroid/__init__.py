"""madroid: offline analysis of ad traffic recorded from mobile apps.

The heavy lifting lives in the C++ extension module; this package re-exports
the main operations.
"""

from madroid._core import (
    CaptureLog,
    HookRecord,
    HttpMessage,
    MadroidError,
    PkgDomainMapping,
    attribute_package,
    build_mapping,
    classify_message,
    detect_close_keywords,
    detect_cross,
    detect_gambling,
    draw_cross_symbol,
    embed_cross,
    extract_click_bindings,
    iou,
    is_apk,
    judge_censored,
    judge_malicious,
    nms,
    parse_capture,
    parse_hook_log,
    plan_exploration,
    reconstruct_redirect_chain,
    registrable_domain,
    run_pipeline,
    score_view,
    voc_annotation,
)

__all__ = [
    "CaptureLog",
    "HookRecord",
    "HttpMessage",
    "MadroidError",
    "PkgDomainMapping",
    "attribute_package",
    "build_mapping",
    "classify_message",
    "detect_close_keywords",
    "detect_cross",
    "detect_gambling",
    "draw_cross_symbol",
    "embed_cross",
    "extract_click_bindings",
    "iou",
    "is_apk",
    "judge_censored",
    "judge_malicious",
    "nms",
    "parse_capture",
    "parse_hook_log",
    "plan_exploration",
    "reconstruct_redirect_chain",
    "registrable_domain",
    "run_pipeline",
    "score_view",
    "voc_annotation",
]

__version__ = "0.1.0"
