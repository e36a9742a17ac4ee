"""Dataset pipelines and training/evaluation drivers."""

from .evaluate import (
    RetrievalResult,
    average_precision,
    classification_metrics,
    descriptors_from_logits,
    ensemble_eval,
    ensemble_logits,
    l1_rank,
    max_vote_metrics,
    predict,
    predicted_classes,
    read_predictions,
    retrieval_eval,
    retrieve,
    write_predictions,
)
from .graphs import (
    GraphSample,
    digit_images,
    load_graph_dataset,
    superpixel_graph,
    synthesize_graph_dataset,
    upscale,
)
from .ingest import (
    list_classes,
    load_processed_dataset,
    mesh_features,
    process_mesh_dataset,
    shape_input,
)
from .report import (
    render_confusion_matrix,
    render_retrieval_summary,
    render_training_curves,
)
from .synth import CLASSES, box, cylinder, random_mesh, synthesize_mesh_dataset, uv_sphere
from .train import (
    DEFAULT_LR,
    TrainResult,
    read_metrics,
    split_validation,
    train_network,
    write_metrics,
)

__all__ = [
    "CLASSES",
    "DEFAULT_LR",
    "GraphSample",
    "RetrievalResult",
    "TrainResult",
    "average_precision",
    "box",
    "classification_metrics",
    "cylinder",
    "descriptors_from_logits",
    "digit_images",
    "ensemble_eval",
    "ensemble_logits",
    "l1_rank",
    "list_classes",
    "load_graph_dataset",
    "load_processed_dataset",
    "max_vote_metrics",
    "mesh_features",
    "predict",
    "predicted_classes",
    "process_mesh_dataset",
    "random_mesh",
    "read_metrics",
    "read_predictions",
    "render_confusion_matrix",
    "render_retrieval_summary",
    "render_training_curves",
    "retrieval_eval",
    "retrieve",
    "shape_input",
    "split_validation",
    "superpixel_graph",
    "synthesize_graph_dataset",
    "synthesize_mesh_dataset",
    "train_network",
    "upscale",
    "uv_sphere",
    "write_metrics",
]
