"""Branch encoders, classifier heads and the dual-branch model."""

from dataclasses import dataclass

import numpy as np

from . import autograd as ag


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int = 3
    channels: tuple = (16, 32)
    feature_dim: int = 64
    # without a projection the pooled last block is the feature (feature_dim == channels[-1])
    projection: bool = True
    projection_bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.in_channels < 1 or self.feature_dim < 1 or not self.channels:
            raise ValueError(f"invalid encoder config {self}")
        if not self.projection and self.feature_dim != self.channels[-1]:
            raise ValueError(f"feature_dim {self.feature_dim} must equal the last block width "
                             f"{self.channels[-1]} when projection is off")

    @property
    def min_size(self):
        # every pooling stage halves the grid; at least 2x2 must reach the last pool
        return 2 ** (len(self.channels) + 1)


def kaiming_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class BranchEncoder:
    """Stack of (conv3x3 + bias, ReLU, 2x2 avg-pool) blocks, global average pool, optional linear projection."""

    def __init__(self, config=EncoderConfig(), rng=None):
        self.config = config
        rng = np.random.default_rng(rng)
        self.blocks = []
        cin = config.in_channels
        for i, cout in enumerate(config.channels):
            w = ag.parameter(kaiming_uniform(rng, (3, 3, cin, cout), 9 * cin), name=f"conv{i}.w")
            b = ag.parameter(np.zeros(cout), name=f"conv{i}.b")
            self.blocks.append((w, b))
            cin = cout
        self.proj_w = self.proj_b = None
        if config.projection:
            self.proj_w = ag.parameter(kaiming_uniform(rng, (cin, config.feature_dim), cin), name="proj.w")
            if config.projection_bias:
                self.proj_b = ag.parameter(np.zeros(config.feature_dim), name="proj.b")

    @property
    def feature_dim(self):
        return self.config.feature_dim

    def parameters(self):
        out = []
        for w, b in self.blocks:
            out += [w, b]
        out += [p for p in (self.proj_w, self.proj_b) if p is not None]
        return out

    def __call__(self, images):
        return self.forward(images)

    def forward(self, images):
        """Encode images ``(N, C, H, W)`` (or one ``(C, H, W)``) into features ``(N, d)``."""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 3:
            images = images[None]
        if images.ndim != 4:
            raise ValueError(f"expected (N, C, H, W) images, got shape {images.shape}")
        n, c, h, w = images.shape
        if c != self.config.in_channels:
            raise ValueError(f"encoder expects {self.config.in_channels} channels, got {c}")
        if min(h, w) < self.config.min_size:
            raise ValueError(f"image {h}x{w} below the receptive minimum {self.config.min_size}")
        x = ag.Tensor(np.ascontiguousarray(images.transpose(0, 2, 3, 1)))
        for wt, bt in self.blocks:
            x = ag.avg_pool2(ag.relu(ag.conv3x3(x, wt, bt)))
        x = ag.global_avg_pool(x)
        if self.proj_w is None:
            return x
        return ag.linear(x, self.proj_w, self.proj_b)


class ClassifierHead:
    def __init__(self, in_dim, num_classes, rng=None):
        rng = np.random.default_rng(rng)
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.weight = ag.parameter(kaiming_uniform(rng, (in_dim, num_classes), in_dim), name="fc.w")
        self.bias = ag.parameter(np.zeros(num_classes), name="fc.b")

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, features):
        if features.shape[-1] != self.in_dim:
            raise ValueError(f"head expects {self.in_dim} input features, got {features.shape[-1]}")
        return ag.linear(features, self.weight, self.bias)


def _seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


class DualModel:
    """Pass and stop encoders feeding one linear head on their concatenated features.

    With ``shared=True`` both branches use the same encoder object (the
    "two same branches" ablation).
    """

    def __init__(self, num_classes=7, encoder=EncoderConfig(), seed=0, shared=False):
        s_pass, s_stop, s_head = _seeds(seed, 3)
        self.encoder_config = encoder
        self.num_classes = num_classes
        self.shared = shared
        self.pass_encoder = BranchEncoder(encoder, np.random.default_rng(s_pass))
        self.stop_encoder = self.pass_encoder if shared else BranchEncoder(encoder, np.random.default_rng(s_stop))
        self.head = ClassifierHead(2 * encoder.feature_dim, num_classes, np.random.default_rng(s_head))

    @property
    def feature_dim(self):
        return self.encoder_config.feature_dim

    def parameters(self):
        params = self.pass_encoder.parameters()
        if not self.shared:
            params = params + self.stop_encoder.parameters()
        return params + self.head.parameters()

    def logits(self, z_pass, z_stop):
        return classify(self.head, z_pass, z_stop)

    def forward(self, pass_images, stop_images=None):
        """Logits with pass images to N_pass and stop images to N_stop (same images if omitted)."""
        if stop_images is None:
            stop_images = pass_images
        z_pass = self.pass_encoder(pass_images)
        z_stop = self.stop_encoder(stop_images)
        return self.logits(z_pass, z_stop), z_pass, z_stop

    def predict_logits(self, images):
        return self.forward(images)[0].value


class SingleModel:
    """One encoder plus a d -> classes head: the ERM baseline and single-branch ablations."""

    def __init__(self, num_classes=7, encoder=EncoderConfig(), seed=0):
        s_enc, s_head = _seeds(seed, 2)
        self.encoder_config = encoder
        self.num_classes = num_classes
        self.encoder = BranchEncoder(encoder, np.random.default_rng(s_enc))
        self.head = ClassifierHead(encoder.feature_dim, num_classes, np.random.default_rng(s_head))

    def parameters(self):
        return self.encoder.parameters() + self.head.parameters()

    def forward(self, images):
        z = self.encoder(images)
        return self.head(z), z

    def predict_logits(self, images):
        return self.forward(images)[0].value


def encode(encoder, image):
    """Feature vector ``(d,)`` for one ``(C, H, W)`` image."""
    return ag.reshape(encoder(np.asarray(image)[None]), (encoder.feature_dim,))


def classify(head, z_pass, z_stop):
    """``FC(concat(z_pass, z_stop))``; accepts single vectors or row batches."""
    z_pass, z_stop = ag.as_tensor(z_pass), ag.as_tensor(z_stop)
    if z_pass.shape != z_stop.shape:
        raise ValueError(f"feature shapes differ: {z_pass.shape} vs {z_stop.shape}")
    if 2 * z_pass.shape[-1] != head.in_dim:
        raise ValueError(f"head expects 2 x {head.in_dim // 2} features, got {z_pass.shape[-1]}")
    single = len(z_pass.shape) == 1
    if single:
        z_pass = ag.reshape(z_pass, (1, -1))
        z_stop = ag.reshape(z_stop, (1, -1))
    out = head(ag.concat([z_pass, z_stop], axis=-1))
    if single:
        out = ag.reshape(out, (head.num_classes,))
    return out
