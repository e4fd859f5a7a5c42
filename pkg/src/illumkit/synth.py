"""Synthetic Lambertian scenes with exact ground-truth illumination.

Pixels come from a rectangle-rule discretization of the diffuse image
formation integral: channel c of a patch with reflectance R is
sum_l I(l) * S_c(l) * R(l) * dl over the wavelength grid. The ground truth
is the sensor response to a perfect white reflector, which is how the
benchmark datasets define their targets.

Default grid is 400-700 nm in 10 nm steps. The illuminant family is
normalized blackbody curves over 2500-9500 K, a realistic one-parameter
manifold for learning experiments. Narrow-band (single-sample) sensors make
the von Kries diagonal model exact, which the correction round-trip tests
exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import IllumkitError, Illuminant, LinearImage, normalize_illuminant

DEFAULT_TEMP_RANGE = (2500.0, 9500.0)


class DegenerateConfigError(IllumkitError):
    """Spectral configuration that produces no response in some channel."""


@dataclass(frozen=True)
class SpectralConfig:
    """Wavelength grid plus illuminant SPD, sensor curves and a reflectance set."""

    wavelengths_nm: np.ndarray    # (L,)
    illuminant_spd: np.ndarray    # (L,) power per wavelength sample
    sensor_responses: np.ndarray  # (3, L) non-negative response curves
    reflectance_set: np.ndarray   # (K, L) reflectances in [0, 1]

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        spd = np.asarray(self.illuminant_spd, dtype=np.float64)
        sens = np.asarray(self.sensor_responses, dtype=np.float64)
        refl = np.atleast_2d(np.asarray(self.reflectance_set, dtype=np.float64))
        L = wl.size
        if spd.shape != (L,) or sens.shape != (3, L) or refl.shape[1] != L:
            raise DegenerateConfigError("spectral arrays must share the wavelength grid length")
        for name, arr in (("wavelengths", wl), ("spd", spd), ("sensors", sens), ("reflectances", refl)):
            if not np.all(np.isfinite(arr)):
                raise DegenerateConfigError(f"{name} contain non-finite values")
        if np.any(spd < 0) or np.any(sens < 0):
            raise DegenerateConfigError("illuminant and sensor curves must be non-negative")
        if np.any(refl < 0) or np.any(refl > 1):
            raise DegenerateConfigError("reflectances must lie in [0, 1]")
        for name, arr in (("wavelengths_nm", wl), ("illuminant_spd", spd),
                          ("sensor_responses", sens), ("reflectance_set", refl)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def bin_widths(self) -> np.ndarray:
        wl = self.wavelengths_nm
        if wl.size == 1:
            return np.ones(1)
        return np.gradient(wl)


def default_wavelengths() -> np.ndarray:
    return np.arange(400.0, 701.0, 10.0)


def blackbody_spd(wavelengths_nm: np.ndarray, temperature_k: float) -> np.ndarray:
    """Planck radiance over the grid, scaled to peak 1."""
    lam = np.asarray(wavelengths_nm, dtype=np.float64) * 1e-9
    c2 = 1.438776877e-2  # second radiation constant, m*K
    spd = lam ** -5.0 / np.expm1(c2 / (lam * temperature_k))
    return spd / spd.max()


def gaussian_sensors(wavelengths_nm: np.ndarray,
                     centers=(610.0, 550.0, 465.0),
                     width: float = 30.0) -> np.ndarray:
    wl = np.asarray(wavelengths_nm, dtype=np.float64)
    return np.stack([np.exp(-((wl - c) ** 2) / (2.0 * width ** 2)) for c in centers])


def narrowband_sensors(wavelengths_nm: np.ndarray,
                       centers=(610.0, 550.0, 465.0)) -> np.ndarray:
    """Delta-like sensors: a single unit response at the grid point nearest each center."""
    wl = np.asarray(wavelengths_nm, dtype=np.float64)
    sens = np.zeros((3, wl.size))
    for c, center in enumerate(centers):
        sens[c, int(np.argmin(np.abs(wl - center)))] = 1.0
    return sens


def white_response(config: SpectralConfig) -> np.ndarray:
    """Unnormalized sensor response to a perfect white reflector."""
    weights = config.illuminant_spd * config.bin_widths
    return config.sensor_responses @ weights


def ground_truth_illuminant(config: SpectralConfig) -> Illuminant:
    resp = white_response(config)
    if np.any(resp <= 0):
        raise DegenerateConfigError("illuminant produces zero response in a sensor channel")
    return normalize_illuminant(resp)


def render_mondrian(config: SpectralConfig, layout: np.ndarray,
                    patch_size: int) -> tuple[LinearImage, Illuminant]:
    """Render a grid of flat reflectance patches and return it with its ground truth.

    ``layout`` is a 2-d integer grid indexing ``config.reflectance_set``; each
    cell becomes a ``patch_size`` x ``patch_size`` block of pixels.
    """
    layout = np.asarray(layout)
    if layout.ndim != 2:
        raise DegenerateConfigError("layout must be a 2-d grid of reflectance indices")
    k = config.reflectance_set.shape[0]
    if layout.min() < 0 or layout.max() >= k:
        raise DegenerateConfigError(f"layout indexes {layout.max()} outside the {k} reflectances")
    gt = ground_truth_illuminant(config)
    weights = config.illuminant_spd * config.bin_widths  # (L,)
    patch_colors = config.reflectance_set @ (config.sensor_responses * weights).T  # (K, 3)
    image = patch_colors[layout]  # (gh, gw, 3)
    image = np.repeat(np.repeat(image, patch_size, axis=0), patch_size, axis=1)
    return LinearImage(image), gt


def random_reflectance_bank(n: int, wavelengths_nm: np.ndarray, rng: np.random.Generator,
                            lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """Smooth random reflectances built from a few spectral bumps, clipped to [lo, hi]."""
    wl = np.asarray(wavelengths_nm, dtype=np.float64)
    span = wl.max() - wl.min()
    bank = np.empty((n, wl.size))
    for i in range(n):
        base = rng.uniform(0.1, 0.7)
        curve = np.full(wl.size, base)
        for _ in range(rng.integers(1, 4)):
            center = rng.uniform(wl.min(), wl.max())
            width = rng.uniform(0.08, 0.35) * span
            amp = rng.uniform(-0.6, 0.6)
            curve += amp * np.exp(-((wl - center) ** 2) / (2.0 * width ** 2))
        bank[i] = np.clip(curve, lo, hi)
    return bank


def complementary_reflectance_bank(n_pairs: int, wavelengths_nm: np.ndarray,
                                   rng: np.random.Generator) -> np.ndarray:
    """2*n_pairs reflectances whose mean spectrum is exactly flat at 0.5.

    Each random curve is paired with its complement 1 - R, so any layout using
    every entry equally often satisfies the gray-world assumption exactly.
    """
    half = random_reflectance_bank(n_pairs, wavelengths_nm, rng, lo=0.05, hi=0.95)
    bank = np.empty((2 * n_pairs, half.shape[1]))
    bank[0::2] = half
    bank[1::2] = 1.0 - half
    return bank


def balanced_layout(grid_shape: tuple[int, int], n_reflectances: int) -> np.ndarray:
    """Layout cycling through all reflectance indices with equal counts."""
    cells = grid_shape[0] * grid_shape[1]
    if cells % n_reflectances != 0:
        raise DegenerateConfigError(
            f"{cells} cells cannot hold {n_reflectances} reflectances equally often")
    return (np.arange(cells) % n_reflectances).reshape(grid_shape)


@dataclass(frozen=True)
class SceneFamily:
    """Generator settings for a rendered dataset: shared world, varying light."""

    wavelengths_nm: np.ndarray = field(default_factory=default_wavelengths)
    sensor_responses: np.ndarray | None = None   # defaults to gaussian_sensors
    reflectance_bank: np.ndarray | None = None   # defaults to a seeded random bank
    temp_range_k: tuple[float, float] = DEFAULT_TEMP_RANGE
    grid_shape: tuple[int, int] = (4, 4)
    patch_size: int = 16
    bank_size: int = 40
    layout: str = "random"   # or "balanced": every reflectance equally often


def render_dataset(family: SceneFamily, n_scenes: int,
                   rng_seed: int) -> list[tuple[LinearImage, Illuminant, str]]:
    """Render ``n_scenes`` Mondrians under blackbody illuminants drawn per scene.

    Deterministic given the seed; every scene derives its own child RNG so
    rendering order never changes the result.
    """
    if n_scenes < 1:
        raise DegenerateConfigError("n_scenes must be >= 1")
    wl = np.asarray(family.wavelengths_nm, dtype=np.float64)
    root = np.random.SeedSequence(rng_seed)
    bank_seq, scenes_seq = root.spawn(2)
    sensors = family.sensor_responses
    if sensors is None:
        sensors = gaussian_sensors(wl)
    bank = family.reflectance_bank
    if bank is None:
        bank = random_reflectance_bank(family.bank_size, wl, np.random.default_rng(bank_seq))

    if family.layout not in ("random", "balanced"):
        raise DegenerateConfigError(f"unknown layout {family.layout!r}")
    fixed_layout = None
    if family.layout == "balanced":
        fixed_layout = balanced_layout(family.grid_shape, bank.shape[0])

    lo, hi = family.temp_range_k
    scenes = []
    for i, child in enumerate(scenes_seq.spawn(n_scenes)):
        rng = np.random.default_rng(child)
        temp = rng.uniform(lo, hi) if hi > lo else float(lo)
        layout = fixed_layout if fixed_layout is not None \
            else rng.integers(0, bank.shape[0], size=family.grid_shape)
        config = SpectralConfig(wl, blackbody_spd(wl, temp), sensors, bank)
        image, gt = render_mondrian(config, layout, family.patch_size)
        scenes.append((image, gt, f"scene_{i:04d}"))
    return scenes
