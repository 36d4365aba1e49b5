"""
seeded generators for the anomaly archetypes, a labeled corpus for checking
detector behavior without external data
"""
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datamodel import Dataset, validate_dataset, write_csv
from .utils import write_json

logger = logging.getLogger(__name__)

ARCHETYPES = (
    "enclosed",
    "peripheral",
    "global",
    "local",
    "isolated",
    "clustered",
    "univariate",
    "multivariate",
)

# construction constants, all written to the sidecar
GLOBAL_SHELL = (6.0, 9.0)
LOCAL_SIGMAS = (1.0, 5.0)
LOCAL_OFFSET = 40.0
LOCAL_RING = (3.0, 4.0)
CLUSTER_OFFSET = 6.0
CLUSTER_SIGMA = 0.25
ANNULUS = (3.0, 5.0)
CORE_RADIUS = 1.0
UNIVARIATE_IQRS = 6.0
CORRELATION = 0.9
PERIPHERAL_GAP = (0.5, 2.0)
ISOLATED_RADIUS = (10.0, 15.0)
ISOLATED_SEPARATION = 3.0
MAX_DRAWS = 100000


@dataclass(frozen=True)
class ArchetypeSpec:
    archetype: str
    n: int = 1000
    d: int = 2
    contamination: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.archetype!r}")
        if self.d < 2:
            raise ValueError(f"archetypes need d >= 2, got {self.d}")
        if not 0 < self.contamination < 0.5:
            raise ValueError(f"contamination must be in (0, 0.5): {self.contamination}")
        if self.n_anomalies < 1:
            raise ValueError(
                f"contamination {self.contamination} x n {self.n} gives no anomaly"
            )

    @property
    def n_anomalies(self):
        return int(round(self.contamination * self.n))

    @property
    def n_normal(self):
        return self.n - self.n_anomalies


def _directions(rng, count, d):
    v = rng.standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _global(spec, rng):
    normal = rng.standard_normal((spec.n_normal, spec.d))
    radius = rng.uniform(*GLOBAL_SHELL, size=(spec.n_anomalies, 1))
    return normal, _directions(rng, spec.n_anomalies, spec.d) * radius, {
        "shell_radius": list(GLOBAL_SHELL)
    }


def _local(spec, rng):
    tight_sigma, wide_sigma = LOCAL_SIGMAS
    half = spec.n_normal // 2
    tight = rng.standard_normal((half, spec.d)) * tight_sigma
    wide = rng.standard_normal((spec.n_normal - half, spec.d)) * wide_sigma
    wide[:, 0] += LOCAL_OFFSET
    radius = rng.uniform(*LOCAL_RING, size=(spec.n_anomalies, 1)) * tight_sigma
    anomalies = _directions(rng, spec.n_anomalies, spec.d) * radius
    return np.vstack([tight, wide]), anomalies, {
        "sigmas": list(LOCAL_SIGMAS),
        "wide_offset": LOCAL_OFFSET,
        "anomaly_radius_sigmas": list(LOCAL_RING),
    }


def _clustered(spec, rng):
    normal = rng.standard_normal((spec.n_normal, spec.d))
    anomalies = rng.standard_normal((spec.n_anomalies, spec.d)) * CLUSTER_SIGMA
    anomalies[:, 0] += CLUSTER_OFFSET
    return normal, anomalies, {
        "offset_sigmas": CLUSTER_OFFSET,
        "anomaly_sigma": CLUSTER_SIGMA,
    }


def _ring(rng, count, d, lo, hi):
    "uniform over the annulus lo <= r <= hi in the first two coordinates"
    angle = rng.uniform(0, 2 * np.pi, count)
    radius = np.sqrt(rng.uniform(lo**2, hi**2, count))
    out = rng.uniform(-1, 1, (count, d))
    out[:, 0] = radius * np.cos(angle)
    out[:, 1] = radius * np.sin(angle)
    return out


def _enclosed(spec, rng):
    normal = _ring(rng, spec.n_normal, spec.d, *ANNULUS)
    anomalies = _ring(rng, spec.n_anomalies, spec.d, 0.0, CORE_RADIUS)
    return normal, anomalies, {
        "annulus": list(ANNULUS),
        "core_radius": CORE_RADIUS,
    }


def _univariate(spec, rng):
    normal = rng.standard_normal((spec.n_normal, spec.d))
    anomalies = rng.standard_normal((spec.n_anomalies, spec.d))
    median = np.median(normal, axis=0)
    q1, q3 = np.percentile(normal, [25, 75], axis=0)
    for row in anomalies:
        j = rng.integers(spec.d)
        sign = rng.choice([-1.0, 1.0])
        row[j] = median[j] + sign * UNIVARIATE_IQRS * (q3[j] - q1[j])
    return normal, anomalies, {"iqrs": UNIVARIATE_IQRS}


def _correlated_cov(d):
    cov = np.eye(d)
    cov[0, 1] = cov[1, 0] = CORRELATION
    return cov


def mahalanobis_sq(X, reference):
    mean = reference.mean(axis=0)
    inv = np.linalg.inv(np.cov(reference, rowvar=False))
    diff = X - mean
    return np.einsum("ij,jk,ik->i", diff, inv, diff)


def _multivariate(spec, rng):
    cov = _correlated_cov(spec.d)
    normal = rng.multivariate_normal(np.zeros(spec.d), cov, spec.n_normal)
    lo, hi = normal.min(axis=0), normal.max(axis=0)
    cutoff = np.percentile(mahalanobis_sq(normal, normal), 99)
    anomalies = []
    for _ in range(MAX_DRAWS):
        if len(anomalies) == spec.n_anomalies:
            break
        x = rng.multivariate_normal(np.zeros(spec.d), cov)
        # mirror across the minor axis: the second coordinate changes sign
        x[1] = -x[1]
        inside = np.all((x > lo) & (x < hi))
        if inside and mahalanobis_sq(x[None, :], normal)[0] > cutoff:
            anomalies.append(x)
    if len(anomalies) < spec.n_anomalies:
        raise ValueError("could not place multivariate anomalies, raise n")
    return normal, np.array(anomalies), {"correlation": CORRELATION}


def _peripheral(spec, rng):
    normal = rng.standard_normal((spec.n_normal, spec.d))
    lo, hi = normal.min(axis=0), normal.max(axis=0)
    anomalies = rng.standard_normal((spec.n_anomalies, spec.d))
    anomalies = np.clip(anomalies, lo, hi)
    for row in anomalies:
        j = rng.integers(spec.d)
        gap = rng.uniform(*PERIPHERAL_GAP)
        row[j] = hi[j] + gap if rng.random() < 0.5 else lo[j] - gap
    return normal, anomalies, {"gap": list(PERIPHERAL_GAP)}


def isolated_shell(n_anomalies, d):
    """
    inner and outer radius of the shell the isolated anomalies are drawn from;
    the outer radius grows until the shell holds (2 x separation)^d of volume
    per anomaly
    """
    inner, outer = ISOLATED_RADIUS
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    needed = n_anomalies * (2 * ISOLATED_SEPARATION) ** d / ball
    return inner, max(outer, (inner**d + needed) ** (1 / d))


def _isolated(spec, rng):
    normal = rng.standard_normal((spec.n_normal, spec.d))
    inner, outer = isolated_shell(spec.n_anomalies, spec.d)
    placed = []
    for _ in range(MAX_DRAWS):
        if len(placed) == spec.n_anomalies:
            break
        # uniform in volume over the shell
        u = rng.uniform()
        radius = (inner**spec.d + u * (outer**spec.d - inner**spec.d)) ** (1 / spec.d)
        x = _directions(rng, 1, spec.d)[0] * radius
        gaps = np.linalg.norm(np.reshape(placed, (-1, spec.d)) - x, axis=1)
        if np.all(gaps >= ISOLATED_SEPARATION):
            placed.append(x)
    if len(placed) < spec.n_anomalies:
        raise ValueError("could not place isolated anomalies, lower contamination")
    return normal, np.array(placed), {
        "radius": [inner, outer],
        "separation": ISOLATED_SEPARATION,
    }


BUILDERS = {
    "global": _global,
    "local": _local,
    "clustered": _clustered,
    "enclosed": _enclosed,
    "univariate": _univariate,
    "multivariate": _multivariate,
    "peripheral": _peripheral,
    "isolated": _isolated,
}


def generate_archetype(spec: ArchetypeSpec) -> Dataset:
    """
    labeled dataset of the requested archetype, rows in a seeded random order;
    the generation parameters travel in Dataset.meta
    """
    rng = np.random.default_rng(spec.seed)
    normal, anomalies, params = BUILDERS[spec.archetype](spec, rng)
    X = np.vstack([normal, anomalies])
    y = np.concatenate([np.zeros(len(normal), int), np.ones(len(anomalies), int)])
    order = rng.permutation(spec.n)
    meta = {**asdict(spec), "n_anomalies": spec.n_anomalies, "construction": params}
    raw = Dataset(
        name=f"{spec.archetype}-{spec.seed}",
        features=X[order],
        labels=y[order],
        feature_names=tuple(f"x{j}" for j in range(spec.d)),
        meta=meta,
    )
    return validate_dataset(raw, expected_anomalies=spec.n_anomalies)


def write_archetype(dataset: Dataset, out_dir):
    "CSV interchange file plus a JSON sidecar of the generation parameters"
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{dataset.name}.csv"
    write_csv(dataset, csv_path)
    write_json(out_dir / f"{dataset.name}.json", dataset.meta)
    logger.info("wrote %s", csv_path)
    return csv_path
