"""Perceived majorness: elicitation, reliability, audio models, evaluation."""

from . import kernels
from .audio import AudioBuffer, decode_wav, encode_wav, read_wav, resample_to_44100, write_wav
from .comparisons import (
    Choice,
    ComparisonRecord,
    ComparisonSet,
    ingest_comparisons,
    read_comparisons_jsonl,
)
from .convnet import (
    ArchConfig,
    ModelParams,
    TrainConfig,
    forward,
    grad_check,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .errors import MajornessError
from .evaluation import (
    EvalReport,
    LabeledCorpus,
    emotion_correlation,
    logistic_cv,
    mode_experiment,
    pearson,
)
from .features import ChromaVector, FeatureConfig, MelSpectrogram, chroma, mel_spectrogram
from .keyprofile import KeyProfileModel, keyprofile_majorness
from .placement import (
    Judgment,
    PlacementSession,
    RatingRecord,
    WalkOrder,
    aggregate_ratings,
    rating_from_placement,
    replay_walk,
    start_placement,
    step_placement,
)
from .ranking import AnchorSet, BTConfig, Ranking, fit_bradley_terry, select_anchors
from .reliability import RaterMatrix, cronbach_alpha, filter_raters, krippendorff_alpha
from .service import StudyConfig, StudyService
from .simulate import RaterModel, SyntheticItem, gen_corpus, sim_pairwise, sim_placements

__version__ = "0.1.0"
