"""Two-stream small-data video classification toolkit.

Building blocks: dense float32 tensors with a bit-exact file format,
vanilla and temporal central difference 3D convolutions with analytic
gradients, rank pooling dynamic images, Horn-Schunck optical flow, a
synthetic-video data pipeline, and a small C3D-style trainer.
"""

from .conv import (
    ConvParams,
    ConvSpec,
    conv3d_forward,
    tcdc_backward,
    tcdc_forward,
)
from .datapipe import (
    ClipSample,
    PipeConfig,
    VideoRecord,
    corner_crop,
    fuse_channels,
    hflip,
    load_frames,
    prepare_record,
    sample_clip,
    synth_dataset,
)
from .net import (
    NetConfig,
    NetState,
    TrainConfig,
    build_network,
    desk_net_config,
    ensemble,
    evaluate,
    train,
)
from .optflow import FlowField, flow_sequence, horn_schunck
from .rankpool import (
    DynamicImage,
    RankPoolProblem,
    SolverConfig,
    dynamic_image_sequence,
    normalize_dynamic_image,
    prefix_means,
    rank_svm_solve,
)
from .tensorio import tensor_load, tensor_map2, tensor_new, tensor_save

__version__ = "0.1.0"
