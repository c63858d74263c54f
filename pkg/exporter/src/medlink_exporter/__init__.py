"""Offline transformer feature extraction for the medlink toolkit.

Runs a pretrained language model as a frozen feature extractor over
corpus mention sentences or concept label strings and writes per-layer
term embeddings in the LayerStack text format. The file format is the
entire contract with the consumer; nothing here imports it.
"""

from medlink_exporter.export import (
    ExportJob,
    export_label_stacks,
    export_mention_stacks,
)
from medlink_exporter.stacks import write_layer_stacks

__all__ = [
    "ExportJob",
    "export_label_stacks",
    "export_mention_stacks",
    "write_layer_stacks",
]
