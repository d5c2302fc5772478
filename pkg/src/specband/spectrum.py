"""2-D discrete Fourier analysis/synthesis and pointwise spectral filtering.

Convention: the forward transform is unnormalized and the inverse carries the
1/(H*W) factor, so ``idft2(dft2(x)) == x``. Spectra stay in natural index
order (DC at ``[..., 0, 0]``); nothing here shifts the origin.

All functions operate on the last two axes, so a single ``(C, H, W)`` image,
a batch ``(N, C, H, W)`` or a bare ``(H, W)`` plane are all accepted. The same
response is applied to every channel.
"""

import warnings

import numpy as np

# imaginary residual, relative to max |real|, above which idft2 warns
SYMMETRY_TOL = 1e-6


class SymmetryWarning(RuntimeWarning):
    """Inverse transform produced a non-negligible imaginary part."""


def _check_grid(shape):
    if len(shape) < 2:
        raise ValueError(f"expected at least 2 dimensions, got shape {shape}")
    if any(n == 0 for n in shape):
        raise ValueError(f"zero-sized dimension in shape {shape}")


def dft2(image):
    """Forward 2-D DFT over the last two axes (unnormalized)."""
    image = np.asarray(image, dtype=np.float64)
    _check_grid(image.shape)
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains NaN or Inf")
    return np.fft.fft2(image, axes=(-2, -1))


def idft2(spectrum, return_residual=False):
    """Inverse 2-D DFT returning the real part.

    The largest absolute imaginary component is the symmetry residual. When it
    exceeds ``SYMMETRY_TOL * max|real|`` a :class:`SymmetryWarning` is issued;
    with ``return_residual=True`` the residual is also returned.
    """
    spectrum = np.asarray(spectrum)
    _check_grid(spectrum.shape)
    if not np.all(np.isfinite(spectrum)):
        raise ValueError("spectrum contains NaN or Inf")
    out = np.fft.ifft2(spectrum, axes=(-2, -1))
    real = np.ascontiguousarray(out.real)
    residual = float(np.max(np.abs(out.imag)))
    scale = float(np.max(np.abs(real)))
    if residual > SYMMETRY_TOL * scale:
        warnings.warn(
            f"inverse DFT imaginary residual {residual:.3g} exceeds "
            f"{SYMMETRY_TOL:g} x max|real| ({scale:.3g}); spectrum is not conjugate-symmetric",
            SymmetryWarning,
            stacklevel=2,
        )
    if return_residual:
        return real, residual
    return real


def apply_response(spectrum, response):
    """Multiply every channel of ``spectrum`` pointwise by a real ``response``."""
    spectrum = np.asarray(spectrum)
    response = np.asarray(response, dtype=np.float64)
    if response.ndim != 2:
        raise ValueError(f"response must be 2-D, got shape {response.shape}")
    if spectrum.shape[-2:] != response.shape:
        raise ValueError(
            f"response grid {response.shape} does not match spectrum grid {spectrum.shape[-2:]}"
        )
    return spectrum * response


def band_slice(image, response, return_residual=False):
    """Frequency slice of ``image``: inverse DFT of its spectrum times ``response``."""
    return idft2(apply_response(dft2(image), response), return_residual=return_residual)


def band_slices(image, responses):
    """Slices for a stack of responses ``(K, H, W)``; output has a new leading K axis.

    Equivalent to ``[band_slice(image, r) for r in responses]`` but transforms
    the image only once.
    """
    responses = np.asarray(responses, dtype=np.float64)
    if responses.ndim != 3:
        raise ValueError(f"responses must be (K, H, W), got shape {responses.shape}")
    spec = dft2(image)
    if spec.shape[-2:] != responses.shape[-2:]:
        raise ValueError(
            f"response grid {responses.shape[-2:]} does not match image grid {spec.shape[-2:]}"
        )
    expand = (slice(None),) + (None,) * (spec.ndim - 2)
    return idft2(spec[None] * responses[expand])
