from .adam import AdamState, adam_step
from .checkpoint import save_checkpoint, load_checkpoint
from .trainer import TrainConfig, train, write_loss_history
