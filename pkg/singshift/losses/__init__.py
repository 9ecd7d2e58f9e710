from singshift.losses.loss_algebra import (
    DivergenceError,
    LossBreakdown,
    LossError,
    LossWeights,
    adversarial_generator_loss,
    compose,
    discriminator_loss,
    feature_matching_loss,
    mel_reconstruction_loss,
    mix,
)

__all__ = [
    "DivergenceError",
    "LossBreakdown",
    "LossError",
    "LossWeights",
    "adversarial_generator_loss",
    "compose",
    "discriminator_loss",
    "feature_matching_loss",
    "mel_reconstruction_loss",
    "mix",
]
