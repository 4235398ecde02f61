"""Video summarisation with deep semantic segment features.

Segments of a video are mapped into a semantic space learned jointly from
video and sentence descriptors, and a summary is the set of segments that
best covers that space (k-medoids, solved by lazy greedy selection).
"""

from .diagnostics import SynthConfig, make_synthetic_world, pca_project
from .embedding import JointModel, ProjectionHead, distance, init_head, init_model, text_forward, video_forward
from .evaluator import f_measure, human_agreement, to_mask, evaluate_summary
from .feature_io import FeatureTrack, DescriptionVector, ReferenceSummarySet, ModelFile, FormatError
from .segmenter import Segment, extract_segments
from .summarizer import (PointSet, Summary, budget_k, exhaustive_select, lazy_greedy_select,
                         naive_greedy_select, objective, summarize, uniform_baseline)
from .trainer import (TrainConfig, TrainingPair, contrastive_loss, derive_margin, loss_gradients,
                      pairs_from_descriptions, train)

__version__ = "0.1.0"
