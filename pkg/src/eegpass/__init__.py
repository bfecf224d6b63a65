"""Password authentication augmented with quantized mental-state levels."""

from .analysis import AttackerModel, guess_success, keyspace, pool_stats
from .crypto import (
    MODE_HOTP,
    MODE_STATIC,
    MODE_TOTP,
    OtpParams,
    SecretKey,
    expand_wildcards,
    hotp,
    hp,
    hpf_otp,
    hpf_pool,
    hpf_static,
    totp_counter,
)
from .errors import EegPassError
from .model import (
    ObservedPel,
    Pel,
    PelTemplate,
    QuantizerConfig,
    SignalSample,
    StateLevel,
    encode_pel,
    format_template,
    parse_template,
    quantize,
)
from .segmentation import (
    AnnotatedChar,
    KeyEvent,
    annotate,
    candidate_segmentations,
    infer_template,
    segment,
)
from .simulate import Schedule, Trace, generate, load_trace, replay, save_trace

__version__ = "0.1.0"

__all__ = [
    "AnnotatedChar",
    "AttackerModel",
    "EegPassError",
    "KeyEvent",
    "MODE_HOTP",
    "MODE_STATIC",
    "MODE_TOTP",
    "ObservedPel",
    "OtpParams",
    "Pel",
    "PelTemplate",
    "QuantizerConfig",
    "Schedule",
    "SecretKey",
    "SignalSample",
    "StateLevel",
    "Trace",
    "annotate",
    "candidate_segmentations",
    "encode_pel",
    "expand_wildcards",
    "format_template",
    "generate",
    "guess_success",
    "hotp",
    "hp",
    "hpf_otp",
    "hpf_pool",
    "hpf_static",
    "infer_template",
    "keyspace",
    "load_trace",
    "parse_template",
    "pool_stats",
    "quantize",
    "replay",
    "save_trace",
    "segment",
    "totp_counter",
]
