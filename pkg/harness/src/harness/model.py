"""A small two-pathway spatiotemporal convolutional clip classifier.

Two stems watch the same clip at different temporal rates: the slow pathway
sees every ``slow_stride``-th frame through wider convolutions (spatial
semantics), the fast pathway sees every frame through a thin stack
(motion).  Their globally pooled features are concatenated into a single
pain/no-pain logit.  Roughly 90k parameters — sized for CPU smoke runs, not
leaderboards.

Inputs are standardized inside ``forward`` (fixed mean 0.5, std 0.25 over
the [0, 1] pixel range) and the convolutions use ReLU-gain initialization,
which keeps feature and gradient magnitudes healthy enough that the
reference learning rate makes visible progress even within a toy epoch
budget.  There are no normalization layers, so single-clip batches work
and train/eval modes behave identically.
"""
from __future__ import annotations

import torch
from torch import nn

__all__ = ["TwoPathwayClassifier"]

INPUT_MEAN = 0.5
INPUT_STD = 0.25


def _block(c_in: int, c_out: int, kernel, stride, padding) -> nn.Sequential:
    conv = nn.Conv3d(c_in, c_out, kernel, stride=stride, padding=padding)
    nn.init.kaiming_normal_(conv.weight, mode="fan_out", nonlinearity="relu")
    nn.init.zeros_(conv.bias)
    return nn.Sequential(conv, nn.ReLU(inplace=True))


class TwoPathwayClassifier(nn.Module):
    def __init__(self, slow_stride: int = 4, base_channels: int = 8):
        super().__init__()
        if slow_stride < 1:
            raise ValueError("slow_stride must be >= 1")
        c = base_channels
        self.slow_stride = slow_stride
        self.fast = nn.Sequential(
            _block(3, c, (3, 3, 3), (1, 2, 2), (1, 1, 1)),
            _block(c, 2 * c, (3, 3, 3), (2, 2, 2), (1, 1, 1)),
            _block(2 * c, 4 * c, (3, 3, 3), (2, 2, 2), (1, 1, 1)),
        )
        self.slow = nn.Sequential(
            _block(3, 2 * c, (1, 3, 3), (1, 2, 2), (0, 1, 1)),
            _block(2 * c, 4 * c, (3, 3, 3), (1, 2, 2), (1, 1, 1)),
            _block(4 * c, 8 * c, (3, 3, 3), (1, 2, 2), (1, 1, 1)),
        )
        self.pool = nn.AdaptiveAvgPool3d(1)
        self.head = nn.Linear(12 * c, 1)

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        """(B, 3, T, H, W) in [0, 1] -> (B,) logits."""
        if video.dim() != 5:
            raise ValueError(f"expected a 5-d video batch, got "
                             f"{tuple(video.shape)}")
        if video.shape[2] < self.slow_stride:
            raise ValueError(f"need at least {self.slow_stride} frames, "
                             f"got {video.shape[2]}")
        video = (video - INPUT_MEAN) / INPUT_STD
        fast = self.pool(self.fast(video)).flatten(1)
        slow = self.pool(self.slow(video[:, :, ::self.slow_stride]))
        slow = slow.flatten(1)
        return self.head(torch.cat([slow, fast], dim=1)).squeeze(1)
