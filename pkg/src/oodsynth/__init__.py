"""oodsynth: outlier synthesis by scene editing, feature filtering, and a
lightweight ID/OOD decision head."""

from .backends import (
    BackendEndpointConfig,
    HttpBackend,
    MaskCandidate,
    MockBackend,
    MockWorld,
    RetryingBackend,
)
from .benchmark import SyntheticSpec, generate_feature_world, generate_image_world
from .concepts import (
    ConceptConfig,
    ConceptMap,
    build_prompt,
    imagine_concepts,
    parse_concepts,
    sanitize_concepts,
)
from .dataset import (
    CandidatePolicy,
    IdObjectRecord,
    Vocabulary,
    load_annotations,
    select_edit_candidates,
)
from .detector import (
    MlpModel,
    TrainConfig,
    forward,
    init_model,
    load_checkpoint,
    logistic_loss,
    save_checkpoint,
    score,
    score_batch,
    train,
)
from .evaluation import EvalReport, auroc, evaluate, fpr_at_tpr, run_ablation
from .features import (
    FeaturePair,
    FeatureRecord,
    FilterConfig,
    cosine_similarity,
    filter_by_similarity,
    pair_features,
    read_feature_archive,
    write_feature_archive,
)
from .geometry import Box, Mask, box_to_mask, iou, mask_to_box, pad_box
from .pipeline import PipelineConfig, config_from_dict, load_config, run_pipeline
from .refine import RefineConfig, refine_boxes
from .synthesis import EditRecord, SynthesisJob, plan_jobs, run_synthesis

__version__ = "0.1.0"
