"""Complementary Gaussian band filter banks on a 2-D DFT grid.

Each band is a radial Gaussian profile. The raw profiles are normalized
pointwise so the pass responses form an exact partition of unity; the stop
response of band ``i`` is ``1 - pass_i``.

Radii are expressed at a reference image size (227 pixels by default) and
rescaled to the working grid, so one band table serves any image size.
"""

from dataclasses import dataclass, field

import numpy as np

REFERENCE_SIZE = 227
# Gaussian sigma as a fraction of the band's bandwidth
SIGMA_SCALE = 0.5


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class BandSpec:
    center: float
    bandwidth: float

    def __post_init__(self):
        # floats throughout, so configs written as 0 or 0.0 serialize (and hash) alike
        object.__setattr__(self, "center", float(self.center))
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        if not np.isfinite(self.center) or self.center < 0:
            raise ValueError(f"band center must be >= 0, got {self.center}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")

    def sigma(self, sigma_scale=SIGMA_SCALE):
        return self.bandwidth * sigma_scale


def default_bands():
    """The six (center, bandwidth) pairs used at 227-pixel reference scale."""
    pairs = [(0, 6), (7, 8), (20, 20), (40, 20), (60, 20), (92, 44)]
    return [BandSpec(float(c), float(w)) for c, w in pairs]


def uniform_bands(k, reference_size=REFERENCE_SIZE):
    """Split ``[0, reference_size / 2]`` into ``k`` equal-width bands."""
    if k < 1:
        raise ValueError(f"need at least one band, got k={k}")
    width = reference_size / 2 / k
    return [BandSpec((j + 0.5) * width, width) for j in range(k)]


def radial_distance(u, v, height, width, reference_size=REFERENCE_SIZE):
    """Wrap-metric radius of DFT bin ``(u, v)``, in reference-scale cycles."""
    if not (0 <= u < height and 0 <= v < width):
        raise ValueError(f"bin ({u}, {v}) outside {height}x{width} grid")
    uu = min(u, height - u)
    vv = min(v, width - v)
    return float(np.hypot(uu, vv) * (reference_size / min(height, width)))


def radial_grid(height, width, reference_size=REFERENCE_SIZE):
    """Vectorized :func:`radial_distance` over the whole ``height x width`` grid."""
    if height < 1 or width < 1:
        raise ValueError(f"invalid grid {height}x{width}")
    u = np.arange(height)
    v = np.arange(width)
    uu = np.minimum(u, height - u)[:, None]
    vv = np.minimum(v, width - v)[None, :]
    return np.hypot(uu, vv) * (reference_size / min(height, width))


def _log_profile(r, spec, sigma_scale):
    s = spec.sigma(sigma_scale)
    return -((r - spec.center) ** 2) / (2.0 * s * s)


def gaussian_profile(r, spec, sigma_scale=SIGMA_SCALE):
    """Unnormalized Gaussian response of ``spec`` at radius ``r``."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    out = np.exp(_log_profile(r, spec, sigma_scale))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class FilterBank:
    """K pass responses on an ``height x width`` grid plus their band specs."""

    specs: tuple
    height: int
    width: int
    reference_size: float = REFERENCE_SIZE
    sigma_scale: float = SIGMA_SCALE
    pass_responses: np.ndarray = field(default=None, repr=False)

    @property
    def k(self):
        return len(self.specs)

    @property
    def shape(self):
        return (self.height, self.width)

    def passband(self, i):
        self._check_index(i)
        return self.pass_responses[i]

    def stop(self, i):
        """Stop response ``1 - pass_i`` of band ``i`` (0-based)."""
        if self.k < 2:
            raise UnsupportedConfiguration("stop responses need at least two bands")
        self._check_index(i)
        return 1.0 - self.pass_responses[i]

    @property
    def stop_responses(self):
        if self.k < 2:
            raise UnsupportedConfiguration("stop responses need at least two bands")
        return 1.0 - self.pass_responses

    def _check_index(self, i):
        if not (0 <= i < self.k):
            raise IndexError(f"band index {i} out of range for K={self.k}")

    def band_energy(self):
        """Fraction of the grid's total response mass owned by each pass band."""
        mass = self.pass_responses.reshape(self.k, -1).sum(axis=1)
        return mass / mass.sum()


def build_bank(specs, height, width, reference_size=REFERENCE_SIZE, sigma_scale=SIGMA_SCALE):
    """Build a normalized bank: ``pass_i = g_i / sum_j g_j`` at every bin.

    Normalization runs in the log domain, so bins far from every center (where
    all raw Gaussians underflow) still get a well-defined partition.
    """
    specs = tuple(specs)
    if not specs:
        raise ValueError("at least one band spec is required")
    r = radial_grid(height, width, reference_size)
    logg = np.stack([_log_profile(r, s, sigma_scale) for s in specs])
    logg -= logg.max(axis=0, keepdims=True)
    g = np.exp(logg)
    pass_responses = g / g.sum(axis=0, keepdims=True)
    pass_responses.setflags(write=False)
    return FilterBank(specs, int(height), int(width), reference_size, sigma_scale, pass_responses)


def stop_response(bank, i):
    return bank.stop(i)
