# src/skillchain/nn/diffusion.py
"""Denoising-diffusion action head: FiLM-conditioned 1-D U-Net over action chunks."""
import math
from typing import List, Optional

import torch
import torch.nn.functional as F
from diffusers import DDIMScheduler, DDPMScheduler
from torch import nn

from ..schema.model_schema import DiffusionHeadSpec


class SinusoidalPosEmb(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        half_dim = self.dim // 2
        emb = math.log(10000) / max(half_dim - 1, 1)
        emb = torch.exp(torch.arange(half_dim, device=x.device, dtype=torch.float32) * -emb).to(x.dtype)
        emb = x.to(emb.dtype).unsqueeze(-1) * emb.unsqueeze(0)
        return torch.cat((emb.sin(), emb.cos()), dim=-1)


class Conv1dBlock(nn.Module):
    """Conv1d -> GroupNorm -> Mish"""

    def __init__(self, inp_channels: int, out_channels: int, kernel_size: int, n_groups: int = 8):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv1d(inp_channels, out_channels, kernel_size, padding=kernel_size // 2),
            nn.GroupNorm(n_groups, out_channels),
            nn.Mish(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class ConditionalResidualBlock1d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, cond_dim: int, kernel_size: int = 5,
                 n_groups: int = 8):
        super().__init__()
        self.out_channels = out_channels
        self.conv1 = Conv1dBlock(in_channels, out_channels, kernel_size, n_groups)
        # FiLM: per-channel scale and bias
        self.cond_encoder = nn.Sequential(nn.Mish(), nn.Linear(cond_dim, out_channels * 2))
        self.conv2 = Conv1dBlock(out_channels, out_channels, kernel_size, n_groups)
        self.residual_conv = nn.Conv1d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        out = self.conv1(x)
        embed = self.cond_encoder(cond).unsqueeze(-1)
        out = embed[:, :self.out_channels] * out + embed[:, self.out_channels:]
        out = self.conv2(out)
        return out + self.residual_conv(x)


class ConditionalUnet1d(nn.Module):
    def __init__(self, action_dim: int, cond_dim: int, embed_dim: int, down_dims: List[int],
                 kernel_size: int = 5, n_groups: int = 8):
        super().__init__()
        self.step_encoder = nn.Sequential(
            SinusoidalPosEmb(embed_dim),
            nn.Linear(embed_dim, embed_dim * 4),
            nn.Mish(),
            nn.Linear(embed_dim * 4, embed_dim),
        )
        film_dim = embed_dim + cond_dim
        in_out = [(action_dim, down_dims[0])] + list(zip(down_dims[:-1], down_dims[1:]))
        kw = {"cond_dim": film_dim, "kernel_size": kernel_size, "n_groups": n_groups}

        self.down_modules = nn.ModuleList([])
        for ind, (dim_in, dim_out) in enumerate(in_out):
            is_last = ind >= len(in_out) - 1
            self.down_modules.append(nn.ModuleList([
                ConditionalResidualBlock1d(dim_in, dim_out, **kw),
                ConditionalResidualBlock1d(dim_out, dim_out, **kw),
                nn.Conv1d(dim_out, dim_out, 3, 2, 1) if not is_last else nn.Identity(),
            ]))

        self.mid_modules = nn.ModuleList([
            ConditionalResidualBlock1d(down_dims[-1], down_dims[-1], **kw),
            ConditionalResidualBlock1d(down_dims[-1], down_dims[-1], **kw),
        ])

        self.up_modules = nn.ModuleList([])
        for ind, (dim_out, dim_in) in enumerate(reversed(in_out[1:])):
            is_last = ind >= len(in_out) - 1
            self.up_modules.append(nn.ModuleList([
                ConditionalResidualBlock1d(dim_in * 2, dim_out, **kw),
                ConditionalResidualBlock1d(dim_out, dim_out, **kw),
                nn.ConvTranspose1d(dim_out, dim_out, 4, 2, 1) if not is_last else nn.Identity(),
            ]))

        self.final_conv = nn.Sequential(
            Conv1dBlock(down_dims[0], down_dims[0], kernel_size, n_groups),
            nn.Conv1d(down_dims[0], action_dim, 1),
        )
        self.levels = len(down_dims)

    def forward(self, x: torch.Tensor, timestep: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """x: (B, T, action_dim), timestep: (B,), cond: (B, cond_dim) -> predicted noise (B, T, action_dim)"""
        x = x.transpose(1, 2)
        feature = torch.cat([self.step_encoder(timestep), cond], dim=-1)
        skips = []
        for resnet, resnet2, downsample in self.down_modules:
            x = resnet2(resnet(x, feature), feature)
            skips.append(x)
            x = downsample(x)
        for mid in self.mid_modules:
            x = mid(x, feature)
        for resnet, resnet2, upsample in self.up_modules:
            x = torch.cat((x, skips.pop()), dim=1)
            x = upsample(resnet2(resnet(x, feature), feature))
        return self.final_conv(x).transpose(1, 2)


class DiffusionHead(nn.Module):
    def __init__(self, feat_dim: int, action_dim: int, spec: DiffusionHeadSpec = DiffusionHeadSpec()):
        super().__init__()
        dims = spec.scaled_dims()
        if spec.pred_horizon % (2 ** (len(dims) - 1)):
            raise ValueError(f"prediction horizon {spec.pred_horizon} does not survive {len(dims) - 1} downsamplings")
        self.spec = spec
        self.action_dim = action_dim
        self.chunk = spec.pred_horizon
        self.unet = ConditionalUnet1d(action_dim, feat_dim, spec.embed_dim, dims, spec.kernel_size, spec.n_groups)
        self.train_scheduler = DDPMScheduler(num_train_timesteps=spec.train_timesteps,
                                             beta_schedule=spec.beta_schedule, clip_sample=True,
                                             prediction_type="epsilon")
        self.sample_scheduler = DDIMScheduler(num_train_timesteps=spec.train_timesteps,
                                              beta_schedule=spec.beta_schedule, clip_sample=True,
                                              prediction_type="epsilon")

    def loss(self, feat: torch.Tensor, target: torch.Tensor,
             generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return ddpm_train_loss(self, feat, target, generator)

    @torch.no_grad()
    def sample(self, feat: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return ddim_sample(self, feat, self.spec.inference_steps, generator)


def ddpm_train_loss(head: DiffusionHead, feat: torch.Tensor, chunk: torch.Tensor,
                    generator: Optional[torch.Generator] = None, noise: Optional[torch.Tensor] = None,
                    timesteps: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean-squared noise-prediction error at uniformly drawn timesteps."""
    if chunk.shape[-2] != head.chunk:
        raise ValueError(f"chunk length {chunk.shape[-2]} != prediction horizon {head.chunk}")
    B = chunk.shape[0]
    if noise is None:
        noise = torch.randn(chunk.shape, generator=generator, dtype=chunk.dtype, device=chunk.device)
    if timesteps is None:
        timesteps = torch.randint(0, head.train_scheduler.config.num_train_timesteps, (B,),
                                  generator=generator, device=chunk.device).long()
    noisy = head.train_scheduler.add_noise(chunk, noise, timesteps)
    pred = head.unet(noisy, timesteps, feat)
    return F.mse_loss(pred, noise)


@torch.no_grad()
def ddim_sample(head: DiffusionHead, feat: torch.Tensor, steps: int = 4,
                generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Full prediction-horizon chunk; callers execute the first `action_horizon` steps."""
    B = feat.shape[0]
    scheduler = head.sample_scheduler
    scheduler.set_timesteps(steps)
    sample = torch.randn((B, head.chunk, head.action_dim), generator=generator, dtype=feat.dtype,
                         device=feat.device)
    for t in scheduler.timesteps:
        ts = torch.full((B,), int(t), dtype=torch.long, device=feat.device)
        eps = head.unet(sample, ts, feat)
        sample = scheduler.step(eps, t, sample, generator=generator).prev_sample
    return sample
