"""Semi-supervised RGB-D salient object detection.

A dual-encoder network decouples RGB features into depth-aware and
depth-dispelled parts, fuses them with depth features through attention
gates at four pyramid levels, and decodes a saliency map; training runs a
three-stage pipeline (depth pretraining, pseudo-depth generation,
mean-teacher semi-supervision).
"""

from .backbone import EncoderSpec, build_encoder, encode_depth, encode_rgb
from .core import (FeaturePyramid, ImagePlane, PredictionPair, seed_all,
                   validate_pyramid)
from .decouple import DepthHead, FeatureDecoupler, reconstruction_loss
from .decoder import AtrousPyramid, SaliencyDecoder
from .fusion import (DepthAwarenessModule, DepthGatedModule,
                     DepthInducedFusion, FusionOutputs)
from .losses import (LossWeights, binary_cross_entropy, consistency_loss,
                     lambda_warmup, supervised_loss, total_loss)
from .mean_teacher import ema_update, make_teacher, paired_forward, perturb
from .metrics import (depth_metrics, e_measure_max, evaluate_dir,
                      f_measure_max, mae, s_measure)
from .model import ABLATION_FLAGS, DepthSaliencyNet, ModelConfig, NetOutputs, build_model
from .pipeline import (RunConfig, TrainResult, generate_pseudo_depth, infer,
                       load_checkpoint, poly_lr, save_checkpoint, train_depth,
                       train_semi, train_supervised)
from .toydata import make_toy_data

__version__ = "0.1.0"
