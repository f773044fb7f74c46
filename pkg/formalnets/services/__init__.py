"""Service layer for the formal networks workbench."""

from .linalg import Activation, AffineMap, FeedForward, Stage  # noqa: F401
from .attention import KVPair, MultPhi, NetDefined, PosDiff, attend  # noqa: F401
from .transformer import (  # noqa: F401
    AcceptDecision,
    DecoderLayer,
    EncoderLayer,
    FinalPredicate,
    PositionalEncoding,
    Recognizer,
    TransformerParams,
    recognizer_accepts,
    run_trans,
)
from .machines import (  # noqa: F401
    GeneralTuringMachine,
    RnnEncDec,
    TuringMachine,
    normalize_tm,
    rnn_accepts,
    tm_accepts,
    tm_trace,
)
from .tm_compiler import compile_tm  # noqa: F401
from .rnn_compiler import compile_rnn  # noqa: F401
from .neural_gpu import NGPUParams, compile_rnn_to_ngpu, ngpu_run  # noqa: F401
from .analysis import majority_recognizer, propinv_samples  # noqa: F401
from .pipeline import VerificationPipeline  # noqa: F401
