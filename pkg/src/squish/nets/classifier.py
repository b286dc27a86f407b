import torch
import torch.nn as nn

from squish.common.errors import ShapeError


class Classifier(nn.Module):
    """ Small conv net for 3x32x32 inputs: three conv-relu-pool blocks and a linear head. """
    arch = 'classifier'

    def __init__(self, num_classes: int = 10, width: int = 16, image_size: int = 32):
        super().__init__()
        assert image_size % 8 == 0, f'image_size must be a multiple of 8, got {image_size}'
        self.num_classes = num_classes
        self.width = width
        self.image_size = image_size
        chs = (3, width, width * 2, width * 4)
        blocks = []
        for cin, cout in zip(chs[:-1], chs[1:]):
            blocks += [nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2)]
        self.features = nn.Sequential(*blocks)
        self.head = nn.Linear(chs[-1] * (image_size // 8) ** 2, num_classes)

    def config(self):
        return dict(num_classes=self.num_classes, width=self.width, image_size=self.image_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = (3, self.image_size, self.image_size)
        if x.dim() != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(f'Classifier expects [B,{",".join(map(str, expected))}] input, got {tuple(x.shape)}.')
        return self.head(self.features(x).flatten(1))


def classifier_forward(f: Classifier, x: torch.Tensor) -> torch.Tensor:
    return f(x)


@torch.no_grad()
def predict(model: nn.Module, images: torch.Tensor, batch_size: int = 256) -> torch.Tensor:
    """ Argmax predictions, ties resolve to the lowest class index. """
    preds = []
    for start in range(0, images.shape[0], batch_size):
        logits = model(images[start:start + batch_size])
        preds.append(logits.argmax(dim=1))
    if not preds:
        return torch.zeros(0, dtype=torch.long)
    return torch.cat(preds)
