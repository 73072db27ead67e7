"""Temporal-conditioned implicit video representations with a
rate-constrained compression path and a decodable bitstream format."""

from .blocks import (
    SNeRVBlock,
    SinusoidalENeRVBlock,
    TATLayer,
    TATResBlock,
    adain_modulate,
    pixel_shuffle,
    tat_affine,
)
from .decoder import (
    DecoderConfig,
    DecoderModel,
    build_decoder,
    decode_frame,
    parameter_balance_report,
)
from .encoder import EncoderConfig, FrameEncoder, encode_frame
from .losses import LossWeights, bpp, distortion_loss, frequency_l1, masked_distortion_loss, ms_ssim, psnr
from .quant import (
    EntropyModelParams,
    QuantParams,
    TensorQuantizer,
    cem_loss,
    dequantize,
    estimate_rate_bits,
    estimate_rate_bits_exact,
    fit_entropy_model,
    mixed_quantize,
    quantize,
    symbol_likelihood,
)
from .temporal import PEConfig, TemporalEmbedNet, TemporalEmbedding, positional_encode, temporal_embed
from .training import (
    ModelBundle,
    RunConfig,
    finetune_compress,
    run_inpainting,
    run_interpolation,
    train_regression,
)
from .video import MaskSpec, SynthSpec, VideoClip, build_mask, load_video, synth_video

__version__ = "0.1.0"
