"""Prototype heads (Euclidean, cosine, hierarchical, hyperbolic) for few-shot
classification over fixed embeddings."""

from ._core import (
    ClassHierarchy,
    EmbeddingSet,
    Episode,
    ProtonetError,
    class_probabilities,
    clip,
    conformal_factor,
    distance,
    distance_gradient,
    einstein_midpoint,
    episode_loss,
    evaluate,
    exp_map,
    exp_map0,
    gradcheck,
    klein_to_poincare,
    level_weights,
    mobius_add,
    poincare_to_klein,
    project,
    run_cli,
    sample_episode,
    synthetic,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
