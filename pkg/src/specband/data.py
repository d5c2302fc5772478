"""Seeded band-coded synthetic datasets, plus PPM/PGM and manifest I/O.

Synthetic images are built in the Fourier domain. For every band ``b`` the
generator owns the "core" bins where the normalized pass response of ``b``
is at least ``core_purity``. Each (class, band) pair gets a class-keyed
pattern on a band-specific angular sector of those bins:

* in the class's signal band the pattern is placed deterministically, so it
  survives averaging over samples;
* in every other band it is applied with a random circular shift and a sign
  that alternates between paired samples, so its class mean is exactly zero
  while its power spectrum still identifies the class (``texture_gain``).

Class-independent distractor textures and white noise are added on top, and
a per-domain gain scales every band. The image is ``0.5 + contrast * raw``
clipped to [0, 1].
"""

import csv
import json
import os
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectrum
from .filters import REFERENCE_SIZE, SIGMA_SCALE, BandSpec, build_bank


def desk_bands():
    """Six bands laid out for 32x32 images, at 227-pixel reference scale.

    The 227-pixel table collapses on small grids (its lowest five bands never
    reach 0.95 purity at 32x32); these keep a pure core for every band.
    """
    pairs = [(0, 11), (19, 5), (31, 6), (47, 7), (66, 9), (96, 12.8)]
    return [BandSpec(float(c), float(w)) for c, w in pairs]


DEFAULT_DOMAINS = {
    "flat": [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    "lowheavy": [2.0, 1.6, 1.0, 0.6, 0.5, 0.5],
    "midheavy": [0.5, 0.8, 1.6, 1.6, 0.8, 0.5],
    "highheavy": [0.5, 0.5, 0.6, 1.0, 1.6, 2.0],
}


class DataError(ValueError):
    """Malformed dataset input; ``lineno`` is set for manifest rows."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass
class SynthConfig:
    num_classes: int = 7
    image_size: int = 32
    channels: int = 3
    bands: list = field(default_factory=desk_bands)
    reference_size: float = REFERENCE_SIZE
    sigma_scale: float = SIGMA_SCALE
    domain_profiles: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_DOMAINS.items()})
    signal_band_per_class: list = None
    noise_sigma: float = 0.02
    samples_per_class: int = 16
    seed: int = 0
    signal_gain: float = 1.0
    texture_gain: float = 1.0
    distractor_gain: float = 0.5
    core_purity: float = 0.95
    contrast: float = 0.06
    band_jitter: float = 0.0

    def __post_init__(self):
        self.bands = [b if isinstance(b, BandSpec) else BandSpec(*b) for b in self.bands]
        if self.signal_band_per_class is None:
            self.signal_band_per_class = [c % len(self.bands) for c in range(self.num_classes)]
        self.validate()

    def validate(self):
        k = len(self.bands)
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.image_size < 8 or self.channels < 1:
            raise ValueError("image_size must be >= 8 and channels >= 1")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")
        if len(self.signal_band_per_class) != self.num_classes:
            raise ValueError("signal_band_per_class needs one entry per class")
        if any(not (0 <= int(b) < k) for b in self.signal_band_per_class):
            raise ValueError(f"signal bands must be indices in [0, {k})")
        for name, gains in self.domain_profiles.items():
            if len(gains) != k:
                raise ValueError(f"domain {name!r} has {len(gains)} gains for {k} bands")
            if any(g < 0 for g in gains):
                raise ValueError(f"domain {name!r} has a negative gain")
        if min(self.noise_sigma, self.signal_gain, self.texture_gain, self.distractor_gain, self.band_jitter) < 0:
            raise ValueError("gains and noise_sigma must be non-negative")
        if not 0 < self.core_purity <= 1:
            raise ValueError("core_purity must lie in (0, 1]")

    @property
    def domains(self):
        return list(self.domain_profiles)

    def bank(self):
        return build_bank(self.bands, self.image_size, self.image_size,
                          self.reference_size, self.sigma_scale)

    def to_dict(self):
        d = asdict(self)
        d["bands"] = [[b.center, b.bandwidth] for b in self.bands]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Sample:
    image: np.ndarray
    label: int
    domain: str


@dataclass
class Dataset:
    """Images ``(N, C, H, W)`` in [0, 1] with integer labels and domain tags."""

    images: np.ndarray
    labels: np.ndarray
    domains: list
    num_classes: int = 7

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels) or len(self.labels) != len(self.domains):
            raise ValueError("images, labels and domains must have equal length")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return Sample(self.images[i], int(self.labels[i]), self.domains[i])

    def subset(self, mask):
        idx = np.flatnonzero(mask)
        return Dataset(self.images[idx], self.labels[idx], [self.domains[i] for i in idx], self.num_classes)

    def by_domain(self, domain):
        return self.subset(np.array([d == domain for d in self.domains]))

    @staticmethod
    def concat(parts):
        parts = list(parts)
        return Dataset(np.concatenate([p.images for p in parts]),
                       np.concatenate([p.labels for p in parts]),
                       [d for p in parts for d in p.domains],
                       parts[0].num_classes)


# -- synthetic generator ----------------------------------------------------

def _key(*parts):
    # stable across processes, unlike hash()
    return zlib.crc32("/".join(str(p) for p in parts).encode())


def _rng(seed, *parts):
    return np.random.default_rng([int(seed), _key(*parts)])


def _half_plane(size):
    """Mask keeping one bin of each conjugate pair (self-conjugate bins included)."""
    u = np.arange(size)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    cu, cv = (-uu) % size, (-vv) % size
    return (uu < cu) | ((uu == cu) & (vv <= cv))


def _bin_angles(size):
    u = np.arange(size)
    fu = np.where(u <= size // 2, u, u - size).astype(float)
    uu, vv = np.meshgrid(fu, fu, indexing="ij")
    return np.mod(np.arctan2(vv, uu), np.pi)


class _Layout:
    """Per-band core bins and the class-to-bin assignment."""

    def __init__(self, config):
        n = config.image_size
        bank = config.bank()
        half = _half_plane(n)
        angles = _bin_angles(n)
        self.bank = bank
        self.core = []
        self.class_bins = []
        for b in range(bank.k):
            core = (bank.pass_responses[b] >= config.core_purity) & half
            bins = np.argwhere(core)
            if len(bins) == 0:
                raise ValueError(f"band {b} has no bins with pass response >= {config.core_purity} "
                                 f"on a {n}x{n} grid")
            self.core.append(bins)
            # classes take contiguous angular runs; the run order is permuted per band
            order = np.argsort(angles[bins[:, 0], bins[:, 1]], kind="stable")
            runs = np.array_split(order, config.num_classes) if len(bins) >= config.num_classes \
                else [order] * config.num_classes
            perm = _rng(config.seed, "perm", b).permutation(config.num_classes)
            self.class_bins.append([bins[runs[perm[c]]] for c in range(config.num_classes)])


def _hermitian_image(n, channels, bins, coeffs):
    """Real image whose spectrum holds ``coeffs[ch, j]`` at ``bins[j]`` plus conjugates."""
    spec = np.zeros((channels, n, n), dtype=np.complex128)
    u, v = bins[:, 0], bins[:, 1]
    selfconj = ((-u) % n == u) & ((-v) % n == v)
    c = np.where(selfconj[None], coeffs.real + 0j, coeffs)
    spec[:, u, v] += c
    spec[:, (-u) % n, (-v) % n] += np.conj(c)
    spec[:, u[selfconj], v[selfconj]] = c[:, selfconj]
    return spectrum.idft2(spec)


def _unit(pattern):
    rms = np.sqrt(np.mean(pattern ** 2))
    return pattern / rms if rms > 0 else pattern


def _pattern(config, layout, cls, band):
    """Unit-RMS class pattern for ``(cls, band)``, deterministic in the config seed."""
    rng = _rng(config.seed, "pattern", cls, band)
    bins = layout.class_bins[band][cls]
    # an independent complex colour per bin: the per-bin magnitudes survive shifts
    coeffs = rng.normal(size=(config.channels, len(bins))) + 1j * rng.normal(size=(config.channels, len(bins)))
    return _unit(_hermitian_image(config.image_size, config.channels, bins, coeffs))


def _shift(img, rng):
    n = img.shape[-1]
    dy, dx = rng.integers(0, n, size=2)
    return np.roll(img, (int(dy), int(dx)), axis=(-2, -1))


def _distractor(config, layout, band, rng):
    bins = layout.core[band]
    coeffs = rng.normal(size=(config.channels, len(bins))) * np.exp(2j * np.pi * rng.random(len(bins)))
    return _unit(_hermitian_image(config.image_size, config.channels, bins, coeffs))


def generate_synth(config, domain, split="train", n_per_class=None):
    """Generate a labeled dataset for ``domain``.

    ``split`` keys an independent sample stream (e.g. "train"/"test") while
    class patterns depend only on ``config.seed``.
    """
    config.validate()
    if domain not in config.domain_profiles:
        raise ValueError(f"unknown domain {domain!r}; have {config.domains}")
    gains = np.asarray(config.domain_profiles[domain], dtype=np.float64)
    layout = _Layout(config)
    k = layout.bank.k
    n = n_per_class or config.samples_per_class
    patterns = {(c, b): _pattern(config, layout, c, b)
                for c in range(config.num_classes) for b in range(k)}
    size, ch = config.image_size, config.channels

    images, labels = [], []
    for c in range(config.num_classes):
        rng = _rng(config.seed, "samples", domain, split, c)
        signal_band = int(config.signal_band_per_class[c])
        for j in range(n):
            # antithetic pairs: samples 2m and 2m+1 share shifts and flip texture signs
            if j % 2 == 0:
                pair_rng = np.random.default_rng(rng.integers(2 ** 63))
                shifts = [pair_rng.integers(0, size, size=2) for _ in range(k)]
                dseeds = pair_rng.integers(2 ** 63, size=k)
                jitter = np.exp(config.band_jitter * pair_rng.normal(size=k))
            sign = 1.0 if j % 2 == 0 else -1.0
            raw = np.zeros((ch, size, size))
            for b in range(k):
                band = np.zeros((ch, size, size))
                pat = patterns[(c, b)]
                if b == signal_band:
                    band += config.signal_gain * pat
                dy, dx = shifts[b]
                band += sign * config.texture_gain * np.roll(pat, (int(dy), int(dx)), axis=(-2, -1))
                if config.distractor_gain > 0:
                    band += sign * config.distractor_gain * _distractor(
                        config, layout, b, np.random.default_rng(dseeds[b]))
                raw += gains[b] * jitter[b] * band
            if config.noise_sigma > 0:
                raw += rng.normal(scale=config.noise_sigma / config.contrast, size=raw.shape)
            images.append(np.clip(0.5 + config.contrast * raw, 0.0, 1.0))
            labels.append(c)
    return Dataset(np.stack(images), np.array(labels), [domain] * len(labels), config.num_classes)


def class_band_energy(dataset, bank, cls, reference=None):
    """Fraction of class-mean deviation energy captured by each pass response.

    The deviation is ``mean(class images) - reference``; ``reference``
    defaults to the mean of the whole dataset.
    """
    images = dataset.images
    if reference is None:
        reference = images.mean(axis=0)
    delta = images[dataset.labels == cls].mean(axis=0) - reference
    power = np.abs(spectrum.dft2(delta)) ** 2
    total = power.sum()
    return np.array([(np.abs(r) ** 2 * power).sum() / total for r in bank.pass_responses])


# -- PPM / PGM codec --------------------------------------------------------

def _read_header_tokens(data, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError("truncated header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_pnm(data):
    """Decode binary P5/P6 bytes (maxval 255) into a ``(C, H, W)`` uint8 array."""
    tokens, pos = _read_header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"unsupported PNM variant {magic!r}; only binary P5/P6 are read")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError("non-integer PNM header field") from None
    if maxval != 255:
        raise DataError(f"unsupported maxval {maxval}; only 8-bit (255) is read")
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raster = data[pos:pos + need]
    if len(raster) != need:
        raise DataError(f"raster has {len(raster)} bytes, expected {need}")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def encode_pnm(pixels):
    """Encode a ``(C, H, W)`` or ``(H, W)`` uint8 array as P6 (3 channels) or P5 (1)."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[None]
    c, h, w = pixels.shape
    if c not in (1, 3):
        raise ValueError(f"PNM holds 1 or 3 channels, got {c}")
    magic = b"P6" if c == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (w, h)
    return header + np.ascontiguousarray(pixels.transpose(1, 2, 0)).astype(np.uint8).tobytes()


def to_bytes(image):
    """[0, 1] floats to uint8, rounding to nearest."""
    return np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def read_ppm(path):
    """Read a binary PPM/PGM as ``(C, H, W)`` floats in [0, 1]."""
    return decode_pnm(Path(path).read_bytes()).astype(np.float64) / 255.0


def write_ppm(path, image):
    Path(path).write_bytes(encode_pnm(to_bytes(image)))


def write_pgm(path, plane):
    """Write a single [0, 1] plane as 8-bit P5."""
    Path(path).write_bytes(encode_pnm(to_bytes(np.asarray(plane))[None]))


# -- manifests ---------------------------------------------------------------

MANIFEST_HEADER = ["path", "label", "domain"]


def save_dataset(dataset, out_dir, manifest_name="manifest.csv"):
    """Write every sample as a PPM plus a ``path,label,domain`` manifest; returns its path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(len(dataset)):
        s = dataset[i]
        rel = f"images/{i:05d}_{s.domain}_{s.label}.ppm"
        write_ppm(out / rel, s.image)
        rows.append([rel, str(s.label), s.domain])
    manifest = out / manifest_name
    with open(manifest, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        w.writerows(rows)
    return manifest


def load_manifest(path, num_classes=7):
    """Load a ``path,label,domain`` CSV whose paths are relative to the manifest."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    root = path.parent
    images, labels, domains = [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise DataError(f"expected header {','.join(MANIFEST_HEADER)}", lineno=1)
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise DataError(f"expected 3 fields, got {len(row)}", lineno)
            rel, label, domain = (cell.strip() for cell in row)
            try:
                label = int(label)
            except ValueError:
                raise DataError(f"label {label!r} is not an integer", lineno) from None
            if not 0 <= label < num_classes:
                raise DataError(f"label {label} outside [0, {num_classes})", lineno)
            img_path = root / rel
            try:
                data = img_path.read_bytes()
            except OSError as e:
                raise DataError(f"cannot read image {rel}: {e.strerror}", lineno) from None
            try:
                img = decode_pnm(data)
            except DataError as e:
                raise DataError(f"{rel}: {e}", lineno) from None
            images.append(img.astype(np.float64) / 255.0)
            labels.append(label)
            domains.append(domain)
    if not images:
        raise DataError("manifest lists no images")
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise DataError(f"images have mixed shapes {sorted(shapes)}")
    return Dataset(np.stack(images), np.array(labels), domains, num_classes)


def save_slices(dataset, bank, out_dir):
    """Write per-sample, per-band pass slices as PPMs plus a ``scales.json`` sidecar.

    Each slice ``s`` is stored as ``(s - offset) / scale`` in [0, 1], with
    ``offset = -m`` and ``scale = 2m`` for ``m = max|s|``, so zero maps to
    mid-gray. The sidecar maps file name to ``{offset, scale}``.
    """
    images = dataset.images
    if tuple(images.shape[-2:]) != bank.shape:
        raise ValueError(f"bank grid {bank.shape} does not match image grid {tuple(images.shape[-2:])}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"cannot write to {out}")
    slices = spectrum.band_slices(images, bank.pass_responses)  # K, N, C, H, W
    sidecar = {}
    for i in range(len(dataset)):
        # slices below round-off relative to their image are stored as zero (mid-gray)
        floor = 1e-9 * max(1.0, float(np.max(np.abs(images[i]))))
        for b in range(bank.k):
            s = slices[b, i]
            m = float(np.max(np.abs(s)))
            if m <= floor:
                s, m = np.zeros_like(s), 0.0
            scale = 2.0 * m if m > 0 else 1.0
            offset = -scale / 2.0
            name = f"{i:05d}_F{b + 1}.ppm"
            write_ppm(out / name, (s - offset) / scale)
            sidecar[name] = {"offset": offset, "scale": scale}
    with open(out / "scales.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
    return out


def load_slice(path, sidecar):
    """Undo :func:`save_slices` normalization for one file."""
    path = Path(path)
    meta = sidecar[path.name]
    return read_ppm(path) * meta["scale"] + meta["offset"]
