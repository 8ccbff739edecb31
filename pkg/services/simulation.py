import logging
from typing import Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import expit

from models.dataset import Dataset
from models.experiment import VirtualSpeciesParams
from services.geospatial import project_local

logger = logging.getLogger(__name__)


def exponential_covariance(h: np.ndarray, range_km: float) -> np.ndarray:
    """Unit-sill exponential covariance whose effective (95%) range is range_km."""
    return np.exp(-3.0 * h / range_km)


class SpectralFieldSimulator:
    """Stationary Gaussian random fields on a regular km grid by FFT spectral synthesis.

    The grid is padded by twice the range so the periodic wrap-around of the
    FFT does not correlate opposite edges of the simulated window.
    """

    def __init__(self, nx: int, ny: int, spacing_km: float, range_km: float):
        self.nx, self.ny = nx, ny
        self.spacing_km = spacing_km
        pad = min(int(np.ceil(2.0 * range_km / spacing_km)), 4 * max(nx, ny))
        self.shape = (int(np.ceil((ny + pad) / 8.0) * 8), int(np.ceil((nx + pad) / 8.0) * 8))

        iy, ix = np.meshgrid(np.arange(self.shape[0]), np.arange(self.shape[1]), indexing="ij")
        iy = np.minimum(iy, self.shape[0] - iy)
        ix = np.minimum(ix, self.shape[1] - ix)
        h = spacing_km * np.sqrt(ix ** 2 + iy ** 2)

        spectrum = np.real(np.fft.fft2(exponential_covariance(h, range_km)))
        negative = -spectrum[spectrum < 0].sum()
        if negative > 1e-6 * np.abs(spectrum).sum():
            logger.warning(f"Covariance spectrum has negative mass {negative:.3g}; clipping to zero")
        self.sqrt_spectrum = np.sqrt(np.clip(spectrum, 0.0, None) / spectrum.size)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal(self.shape) + 1j * rng.standard_normal(self.shape)
        field = np.real(np.fft.ifft2(noise * self.sqrt_spectrum)) * self.sqrt_spectrum.size
        return field[:self.ny, :self.nx]


def _grid_geometry(p: VirtualSpeciesParams) -> Tuple[float, float, float, int, int]:
    lon_min, lat_min, lon_max, lat_max = p.bbox
    mean_lat = 0.5 * (lat_min + lat_max)
    width, height = project_local(lon_max, lat_max, lon_min, lat_min, mean_lat)
    spacing = max(float(width), float(height)) / (p.grid_cells - 1)
    nx = int(np.ceil(float(width) / spacing)) + 1
    ny = int(np.ceil(float(height) / spacing)) + 1
    return mean_lat, spacing, float(width), nx, ny


def _latent_component(p: VirtualSpeciesParams, simulator: SpectralFieldSimulator, axes, points: np.ndarray,
                      years: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unobserved unit-variance field, one fresh draw per block of latent_period_years."""
    period = (years - p.years[0]) // p.latent_period_years
    latent = np.zeros(len(years))
    for block in range(int(period.max()) + 1):
        field = RegularGridInterpolator(axes, simulator.sample(rng), method="linear")
        mask = period == block
        if mask.any():
            latent[mask] = field(points[mask])
    return latent


def simulate_virtual_species(p: VirtualSpeciesParams) -> Dataset:
    """Virtual presence/absence data with known spatial autocorrelation.

    Each environmental feature is an independent Gaussian random field with
    exponential covariance of effective range p.range_km, read at uniform
    random locations in the bounding box. Labels are Bernoulli draws of the
    logistic response, then flipped at p.noise_rate; years are uniform.

    With p.latent_sd > 0 the logit also carries a field that is never exposed
    as a feature, so residuals are spatially autocorrelated and drift between
    year blocks.

    With p.coordinate_features the projected km coordinates are appended as
    features, so a learner can memorise that field locally.
    """
    rng = np.random.default_rng(p.seed)
    lon_min, lat_min, lon_max, lat_max = p.bbox
    mean_lat, spacing, _, nx, ny = _grid_geometry(p)

    simulator = SpectralFieldSimulator(nx, ny, spacing, p.range_km)
    xs = np.arange(nx) * spacing
    ys = np.arange(ny) * spacing

    lon = rng.uniform(lon_min, lon_max, size=p.n_points)
    lat = rng.uniform(lat_min, lat_max, size=p.n_points)
    x, y = project_local(lon, lat, lon_min, lat_min, mean_lat)
    points = np.column_stack([np.clip(y, 0.0, ys[-1]), np.clip(x, 0.0, xs[-1])])

    features = np.empty((p.n_points, p.n_env_features))
    for j in range(p.n_env_features):
        field = RegularGridInterpolator((ys, xs), simulator.sample(rng), method="linear")
        features[:, j] = field(points)

    years = rng.integers(p.years[0], p.years[1] + 1, size=p.n_points)
    logits = p.intercept + features @ np.asarray(p.response(), dtype=np.float64)
    if p.latent_sd > 0:
        logits += p.latent_sd * _latent_component(p, simulator, (ys, xs), points, years, rng)
    labels = (rng.random(p.n_points) < expit(logits)).astype(np.int64)
    flips = rng.random(p.n_points) < p.noise_rate
    labels = np.where(flips, 1 - labels, labels)

    names = [f"env_{j + 1}" for j in range(p.n_env_features)]
    columns = names
    if p.coordinate_features:
        features = np.column_stack([features, x, y])
        columns = names + ["easting_km", "northing_km"]
    dataset = Dataset(
        ids=np.arange(p.n_points, dtype=np.int64),
        lon=lon,
        lat=lat,
        year=years,
        label=labels,
        X=features,
        feature_names=columns,
        continuous=names,
    )
    logger.info(f"Simulated {p.n_points} records on a {nx}x{ny} grid ({spacing:.2f} km), "
                f"prevalence {labels.mean():.3f}, {int(flips.sum())} labels flipped")
    return dataset
