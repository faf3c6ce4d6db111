"""Noise-robust few-shot meta-learning on a flat-parameter numpy MLP."""
from ._accel import numba_enabled
from .contrastive import DclConfig, dcl_loss, normalize_embeddings
from .episodes import (NoiseSpec, SplitDataset, Task, TaskSpec, generate_benchmark,
                       generate_synthetic, inject_symmetric_noise, load_csv_dataset, sample_task)
from .evaluation import EvalConfig, EvalResult, attach_zero_head, ci95, evaluate, meta_test_task
from .learners import (ImamlConfig, InnerLoopConfig, OuterConfig, eigen_reptile_update,
                       fomaml_zo_meta_grad, imaml_meta_grad, inner_adapt, meta_train,
                       reptile_update)
from .manifold import (Augmenter, augment, batman_sample, make_ssl_task, man_sample,
                       rand_manifold_sample)
from .nn import NetworkSpec, backward, cross_entropy, forward, init_network
from .noise_analysis import (ConfusionMatrixQ, clean_selection_probability,
                             monte_carlo_clean_prob)

__version__ = "0.1.0"

__all__ = [
    "numba_enabled", "DclConfig", "dcl_loss", "normalize_embeddings", "NoiseSpec",
    "SplitDataset", "Task", "TaskSpec", "generate_benchmark", "generate_synthetic",
    "inject_symmetric_noise", "load_csv_dataset", "sample_task", "EvalConfig", "EvalResult",
    "attach_zero_head", "ci95", "evaluate", "meta_test_task", "ImamlConfig", "InnerLoopConfig",
    "OuterConfig", "eigen_reptile_update", "fomaml_zo_meta_grad", "imaml_meta_grad",
    "inner_adapt", "meta_train", "reptile_update", "Augmenter", "augment", "batman_sample",
    "make_ssl_task", "man_sample", "rand_manifold_sample", "NetworkSpec", "backward",
    "cross_entropy", "forward", "init_network", "ConfusionMatrixQ",
    "clean_selection_probability", "monte_carlo_clean_prob",
]
