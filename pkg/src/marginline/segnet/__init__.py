from .loss import cross_entropy, generalized_dice_loss, loss_grad_logits, loss_value
from .network import NetworkParams, ShapeMismatch, architecture, backward, forward
from .train import (
    Adam,
    FoldAssignment,
    TrainConfig,
    dice_score,
    evaluate_loss,
    kfold_split,
    sample_loss_and_grads,
    train_fold,
    train_kfold,
    write_history_csv,
)
