# src/skillchain/nn/__init__.py
from .checkpoint import load_checkpoint, load_module, save_checkpoint, save_module
from .diffusion import DiffusionHead, ddim_sample, ddpm_train_loss
from .gae import gae
from .heads import ChunkHead, PointSetEncoder
from .init import init_linear, init_orthogonal
from .mlp import Mlp
from .optim import clip_gradients, current_lr, make_optimizer, set_lr
from .transformer import CausalTransformer

__all__ = [
    "load_checkpoint", "load_module", "save_checkpoint", "save_module", "DiffusionHead", "ddim_sample",
    "ddpm_train_loss", "gae", "ChunkHead", "PointSetEncoder", "init_linear", "init_orthogonal", "Mlp",
    "clip_gradients", "current_lr", "make_optimizer", "set_lr", "CausalTransformer",
]
