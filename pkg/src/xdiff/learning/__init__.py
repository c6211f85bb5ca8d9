"""
XDiff learning: gradients, constraint handling, optimizer and training loop
"""

from .adam import AdamState
from .autodiff import GradientVector, ParameterVector, backprop, loss
from .lagrangian import LagrangianState, augmented_lagrangian, constraints, infeasibility
from .trainer import TrainConfig, TrainingHistory, init_lambda, sample_batch, train

__all__ = [
    'AdamState',
    'GradientVector', 'ParameterVector', 'backprop', 'loss',
    'LagrangianState', 'augmented_lagrangian', 'constraints', 'infeasibility',
    'TrainConfig', 'TrainingHistory', 'init_lambda', 'sample_batch', 'train',
]
