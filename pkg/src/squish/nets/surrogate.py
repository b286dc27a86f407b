import torch
import torch.nn as nn


def _conv_block(cin, cout, stride=1):
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride=stride, padding=1), nn.ReLU())


class SurrogatePurifier(nn.Module):
    """ U-Net style differentiable stand-in g' for a codec: two downsampling stages with skip
    connections, sigmoid output so reconstructions stay in [0,1].
    """
    arch = 'surrogate'

    def __init__(self, width: int = 16):
        super().__init__()
        self.width = width
        c = width
        self.enc0 = nn.Sequential(_conv_block(3, c), _conv_block(c, c))
        self.down1 = _conv_block(c, 2 * c, stride=2)
        self.down2 = _conv_block(2 * c, 4 * c, stride=2)
        self.up2 = nn.Sequential(nn.ConvTranspose2d(4 * c, 2 * c, 4, stride=2, padding=1), nn.ReLU())
        self.fuse2 = _conv_block(4 * c, 2 * c)
        self.up1 = nn.Sequential(nn.ConvTranspose2d(2 * c, c, 4, stride=2, padding=1), nn.ReLU())
        self.fuse1 = _conv_block(2 * c, c)
        self.out = nn.Conv2d(c, 3, 1)

    def config(self):
        return dict(width=self.width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        assert x.shape[-1] % 4 == 0 and x.shape[-2] % 4 == 0, \
            f'SurrogatePurifier needs H and W divisible by 4, got {tuple(x.shape)}'
        s0 = self.enc0(x)
        s1 = self.down1(s0)
        s2 = self.down2(s1)
        y = self.fuse2(torch.cat([self.up2(s2), s1], dim=1))
        y = self.fuse1(torch.cat([self.up1(y), s0], dim=1))
        return torch.sigmoid(self.out(y))
