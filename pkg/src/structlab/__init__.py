"""Joint constituency/dependency induction with a structure-constrained
transformer encoder, trained by masked language modeling.

The pieces: a numpy tape-autodiff engine (`tensor`), discrete parsing
algorithms (`structures`), the convolutional score network (`parser_net`),
the differentiable parent distribution (`dependency`), constrained
attention (`attention`), the encoder and training loop (`model`,
`training`), corpus tooling (`corpus`), parsing metrics (`evaluation`),
paired desk-scale experiments (`experiments`) and the `structlab` CLI
(`cli`).
"""

from .model import ModelConfig, StructuredTransformer
from .structures import (
    DependencyGraph,
    distance_to_tree,
    joint_parse,
    tree_spans,
    tree_to_dependencies,
)
from .tensor import Tape, Tensor

__version__ = "0.1.0"

__all__ = [
    "DependencyGraph",
    "ModelConfig",
    "StructuredTransformer",
    "Tape",
    "Tensor",
    "distance_to_tree",
    "joint_parse",
    "tree_spans",
    "tree_to_dependencies",
    "__version__",
]
