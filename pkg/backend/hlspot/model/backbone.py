import numpy as np

from hlspot.errors import ShapeError
from hlspot.model.layers import Module
from hlspot.utils import tensor as T
from hlspot.utils.tensor import parameter


def _conv_weight(rng, c_out, c_in, k):
    fan_in = c_in * k * k
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, k, k))


class ConvBlock(Module):
    """conv3x3 stride 2 + ReLU"""

    def __init__(self, c_in, c_out, rng):
        self.weight = parameter(_conv_weight(rng, c_out, c_in, 3))
        self.bias = parameter(np.zeros(c_out))

    def __call__(self, x):
        return T.relu(T.conv2d(x, self.weight, self.bias, stride=2, padding=1))


class Projection(Module):
    """conv1x1 para d_model canais, viés zerado"""

    def __init__(self, c_in, d_model, rng):
        self.weight = parameter(_conv_weight(rng, d_model, c_in, 1))
        self.bias = parameter(np.zeros(d_model))

    def __call__(self, x):
        return T.conv2d(x, self.weight, self.bias)


class Backbone(Module):
    """
    Pirâmide de L níveis nos strides 4·2^l

    Duas convoluções de stride 2 formam o stem (stride 4); cada nível
    seguinte acrescenta mais uma.
    """

    def __init__(self, n_levels, d_model, width, rng):
        self.n_levels = n_levels
        channels = [3] + [width * 2 ** min(b, 2) for b in range(n_levels + 1)]
        self.blocks = [ConvBlock(channels[b], channels[b + 1], rng) for b in range(n_levels + 1)]
        self.projections = [Projection(channels[l + 2], d_model, rng) for l in range(n_levels)]

    def __call__(self, image):
        image = T.as_tensor(image)
        _, h, w = image.shape
        factor = 2 ** (self.n_levels + 1)
        if h % factor or w % factor:
            raise ShapeError('backbone_forward', image.shape, (3, factor, factor))
        x = self.blocks[1](self.blocks[0](image))
        pyramid = [self.projections[0](x)]
        for l in range(1, self.n_levels):
            x = self.blocks[l + 1](x)
            pyramid.append(self.projections[l](x))
        return pyramid


def backbone_forward(backbone, image):
    return backbone(image)
