"""EDA-based perceived-risk recognition pipeline.

Raw electrodermal traces are filtered, decomposed into tonic (EDL) and
phasic (EDR) components by a convex non-negative QP, segmented into
overlapping windows with 11 time/frequency features, and classified by six
from-scratch algorithms under a balanced undersample-train-test protocol.
"""

from .classify import AlgoSpec, TrainedModel, load_model, predict, predict_batch, save_model, train
from .decompose import DecompParams, DecomposedTrace, bateman_kernel, decompose
from .errors import DataError, EdaflowError, SolverError
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    ProtocolParams,
    confusion_matrix,
    metrics_from_confusion,
    run_protocol,
    split_train_test,
    undersample,
)
from .features import (
    FeatureMatrix,
    FeatureVector,
    WindowSpec,
    band_power,
    build_feature_matrix,
    segment_windows,
    time_domain_features,
)
from .preprocess import FilterParams, highpass_filter, moving_average, preprocess
from .qp import HAVE_COMPILED, solve_nonneg_qp
from .signal_io import (
    LabelInterval,
    LabelTrack,
    RawTrace,
    RiskLabel,
    label_window,
    parse_label_track,
    parse_trace,
)
from .synth import SynthParams, SynthTruth, synth_dataset, synth_trace

__version__ = "0.1.0"
