"""Segmental hidden Markov models with random effects for waveform data."""

from ._core import (
    AccuracyRow,
    AccuracySummary,
    AccuracyTable,
    ConfigError,
    CvConfig,
    DataError,
    EvalReport,
    FitConfig,
    FitReport,
    LabeledFeature,
    ModelParams,
    NumericalError,
    PredictionReport,
    RandomEffectPosterior,
    SampledCorpus,
    ScoreVector,
    Segment,
    Segmentation,
    SegmentTruth,
    StateParams,
    TrainingCorpus,
    WaveformSeries,
    WaveformTruth,
    baseline_distance,
    cv_protocol,
    duration_log_pmf,
    evaluate_corpus,
    fit,
    initialize,
    knn_classify,
    load_model,
    loglik,
    posterior_random_effect,
    predict,
    prediction_report,
    prefix_loglik,
    preset_model,
    preset_names,
    read_corpus_csv,
    sample_corpus,
    save_model,
    score_waveform,
    segment_loglik,
    segmentation_error,
    viterbi,
    write_corpus_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
