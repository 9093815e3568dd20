"""Simulated homodyne records.

Records are rows (theta_A, theta_B, x_A, x_B): the local-oscillator phases
and the two quadrature outcomes of one joint measurement.  Sampling is
chunked with one RNG substream per fixed-size chunk, derived from
(seed, chunk index), so the output is byte-identical regardless of how
many workers process the chunks.

The modulation schemes draw a per-sample classical displacement for the
pre-splitter beam, mix it through the splitter (vacuum on the idle port)
and add independent vacuum noise to each output quadrature.  That is
exactly sampling from the classical-mixture joint density, so the scheme
records match the analytic output densities.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .marginals import joint_marginal_form
from .states import DEFAULT_V0, GaussianBipartiteState

CHUNK = 1 << 16

CSV_HEADER = "theta_A,theta_B,x_A,x_B"

# default signed displacement of the switched-phase scheme, chosen so the
# measured-mode peak of the displaced component sits at -12 vacuum units
# for a balanced splitter and a -6 threshold falls between the two peaks
SWITCHED_PHASE_AMPLITUDE = -12.0 * np.sqrt(2.0)
SWITCHED_PHASE_THRESHOLD = -6.0


@dataclass(frozen=True)
class GaussianModulation:
    """Independent Gaussian displacement noise on each quadrature."""

    depth_x: float = 0.0
    depth_p: float = 0.0

    kind = "gaussian"

    def __post_init__(self):
        if self.depth_x < 0 or self.depth_p < 0:
            raise ValidationError("modulation depths must be non-negative")


@dataclass(frozen=True)
class SwitchedNoise:
    """Gaussian displacement noise gated on with probability duty."""

    depth_x: float = 0.0
    depth_p: float = 0.0
    duty: float = 0.5

    kind = "switched_noise"

    def __post_init__(self):
        if self.depth_x < 0 or self.depth_p < 0:
            raise ValidationError("modulation depths must be non-negative")
        _check_duty(self.duty)


@dataclass(frozen=True)
class SwitchedPhase:
    """Fixed p-quadrature displacement gated on with probability duty.

    The amplitude is a signed coherent displacement (the sign is the
    demodulation phase), unlike the noise depths which are magnitudes.
    """

    amplitude: float = SWITCHED_PHASE_AMPLITUDE
    duty: float = 0.5
    threshold_hint: float = SWITCHED_PHASE_THRESHOLD

    kind = "switched_phase"

    def __post_init__(self):
        _check_duty(self.duty)


@dataclass(frozen=True)
class AsyncSine:
    """x displacement depth*cos(phi) with phi uniform: sine modulation
    demodulated at an offset frequency."""

    depth: float = 0.0

    kind = "async_sine"

    def __post_init__(self):
        if self.depth < 0:
            raise ValidationError("modulation depth must be non-negative")


ModulationScheme = GaussianModulation | SwitchedNoise | SwitchedPhase | AsyncSine


def _check_duty(duty: float) -> None:
    if not 0.0 < duty <= 1.0:
        raise ValidationError(f"duty must lie in (0, 1], got {duty}")


@dataclass(frozen=True)
class SimulationConfig:
    scheme: ModulationScheme
    n_samples: int
    seed: int
    eta: float = 1.0 / np.sqrt(2.0)
    theta_a: float = 0.0
    theta_b: float = 0.0
    v0: float = DEFAULT_V0

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValidationError("n_samples must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"transmissivity must lie in [0, 1], got {self.eta}")
        if self.v0 <= 0:
            raise ValidationError("vacuum variance must be positive")


@dataclass
class RecordSet:
    """Columnar record store plus provenance metadata."""

    theta_a: np.ndarray
    theta_b: np.ndarray
    x_a: np.ndarray
    x_b: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.x_a)
        for name in ("theta_a", "theta_b", "x_b"):
            if len(getattr(self, name)) != n:
                raise ValidationError("record columns have mismatched lengths")

    def __len__(self) -> int:
        return len(self.x_a)

    def pair_keys(self) -> list[tuple[float, float]]:
        pairs = np.unique(np.column_stack([self.theta_a, self.theta_b]), axis=0)
        return [tuple(row) for row in pairs]

    def select_pair(self, theta_a: float, theta_b: float,
                    atol: float = 1e-9) -> "RecordSet":
        mask = (np.abs(self.theta_a - theta_a) <= atol) & (
            np.abs(self.theta_b - theta_b) <= atol
        )
        return RecordSet(
            self.theta_a[mask], self.theta_b[mask],
            self.x_a[mask], self.x_b[mask], dict(self.meta),
        )


def concat_records(parts: list[RecordSet], meta: dict | None = None) -> RecordSet:
    if not parts:
        raise ValidationError("nothing to concatenate")
    return RecordSet(
        np.concatenate([p.theta_a for p in parts]),
        np.concatenate([p.theta_b for p in parts]),
        np.concatenate([p.x_a for p in parts]),
        np.concatenate([p.x_b for p in parts]),
        meta if meta is not None else dict(parts[0].meta),
    )


def _chunk_ranges(n: int) -> list[tuple[int, int, int]]:
    return [(idx, start, min(start + CHUNK, n))
            for idx, start in enumerate(range(0, n, CHUNK))]


def _run_chunks(n: int, seed, fill, workers: int | None = None) -> None:
    """Run fill(rng, start, stop) over fixed-size chunks with per-chunk
    substreams; the chunk layout never depends on the worker count."""
    ranges = _chunk_ranges(n)
    if workers is None:
        workers = int(os.environ.get("CVDISCORD_WORKERS", "1"))

    def job(item):
        idx, start, stop = item
        rng = np.random.default_rng(np.random.SeedSequence((seed, idx)))
        fill(rng, start, stop)

    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, ranges))
    else:
        for item in ranges:
            job(item)


def sample_gaussian(state: GaussianBipartiteState, theta_a: float, theta_b: float,
                    n: int, seed: int, workers: int | None = None) -> RecordSet:
    """Draw n joint outcomes from a Gaussian state at fixed phases."""
    if n <= 0:
        raise ValidationError("n must be positive")
    form = joint_marginal_form(state, theta_a, theta_b)
    det = form.lam * form.mu - form.nu**2
    cov = np.array([[form.mu, form.nu], [form.nu, form.lam]]) / (2.0 * det)
    chol = np.linalg.cholesky(cov)
    mean = np.array([form.mean_a, form.mean_b])

    x_a = np.empty(n)
    x_b = np.empty(n)

    def fill(rng, start, stop):
        z = rng.standard_normal((stop - start, 2))
        xy = z @ chol.T + mean
        x_a[start:stop] = xy[:, 0]
        x_b[start:stop] = xy[:, 1]

    _run_chunks(n, seed, fill, workers)
    meta = {
        "kind": "gaussian_state",
        "theta_a": theta_a,
        "theta_b": theta_b,
        "n": n,
        "seed": seed,
        "v0": state.v0,
    }
    return RecordSet(np.full(n, float(theta_a)), np.full(n, float(theta_b)),
                     x_a, x_b, meta)


def _displacements(scheme: ModulationScheme, rng, m: int, v0: float) -> np.ndarray:
    """Per-sample pre-splitter displacement, shape (m, 2) in absolute units."""
    root = np.sqrt(v0)
    d = np.zeros((m, 2))
    if isinstance(scheme, GaussianModulation):
        d[:, 0] = scheme.depth_x * root * rng.standard_normal(m)
        d[:, 1] = scheme.depth_p * root * rng.standard_normal(m)
    elif isinstance(scheme, SwitchedNoise):
        gate = rng.random(m) < scheme.duty
        d[:, 0] = np.where(gate, scheme.depth_x * root * rng.standard_normal(m), 0.0)
        d[:, 1] = np.where(gate, scheme.depth_p * root * rng.standard_normal(m), 0.0)
    elif isinstance(scheme, SwitchedPhase):
        gate = rng.random(m) < scheme.duty
        d[:, 1] = np.where(gate, scheme.amplitude * root, 0.0)
    elif isinstance(scheme, AsyncSine):
        phi = rng.uniform(0.0, 2.0 * np.pi, m)
        d[:, 0] = scheme.depth * root * np.cos(phi)
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    return d


def sample_scheme(config: SimulationConfig, workers: int | None = None) -> RecordSet:
    """Draw homodyne records for a modulation scheme.

    Per sample: draw the latent gate/phase, form the displacement, send it
    through the splitter (mode A keeps eta of it, mode B sqrt(1-eta^2)),
    project onto the measured quadratures and add independent vacuum noise.
    """
    n = config.n_samples
    eta = config.eta
    eta_t = np.sqrt(1.0 - eta * eta)
    proj_a = np.array([np.cos(config.theta_a), np.sin(config.theta_a)])
    proj_b = np.array([np.cos(config.theta_b), np.sin(config.theta_b)])
    root = np.sqrt(config.v0)

    x_a = np.empty(n)
    x_b = np.empty(n)

    def fill(rng, start, stop):
        m = stop - start
        d = _displacements(config.scheme, rng, m, config.v0)
        noise = rng.standard_normal((m, 2)) * root
        x_a[start:stop] = eta * (d @ proj_a) + noise[:, 0]
        x_b[start:stop] = eta_t * (d @ proj_b) + noise[:, 1]

    _run_chunks(n, config.seed, fill, workers)
    meta = {
        "kind": "scheme",
        "scheme": scheme_to_dict(config.scheme),
        "eta": eta,
        "theta_a": config.theta_a,
        "theta_b": config.theta_b,
        "n": n,
        "seed": config.seed,
        "v0": config.v0,
    }
    return RecordSet(np.full(n, float(config.theta_a)),
                     np.full(n, float(config.theta_b)), x_a, x_b, meta)


def scheme_to_dict(scheme: ModulationScheme) -> dict:
    if isinstance(scheme, GaussianModulation):
        return {"kind": scheme.kind, "depth_x": scheme.depth_x, "depth_p": scheme.depth_p}
    if isinstance(scheme, SwitchedNoise):
        return {"kind": scheme.kind, "depth_x": scheme.depth_x,
                "depth_p": scheme.depth_p, "duty": scheme.duty}
    if isinstance(scheme, SwitchedPhase):
        return {"kind": scheme.kind, "amplitude": scheme.amplitude,
                "duty": scheme.duty, "threshold_hint": scheme.threshold_hint}
    if isinstance(scheme, AsyncSine):
        return {"kind": scheme.kind, "depth": scheme.depth}
    raise ValidationError(f"unknown scheme {scheme!r}")


def scheme_from_dict(doc: dict) -> ModulationScheme:
    kind = doc.get("kind")
    if kind == "gaussian":
        return GaussianModulation(doc.get("depth_x", 0.0), doc.get("depth_p", 0.0))
    if kind == "switched_noise":
        return SwitchedNoise(doc.get("depth_x", 0.0), doc.get("depth_p", 0.0),
                             doc.get("duty", 0.5))
    if kind == "switched_phase":
        return SwitchedPhase(doc.get("amplitude", SWITCHED_PHASE_AMPLITUDE),
                             doc.get("duty", 0.5),
                             doc.get("threshold_hint", SWITCHED_PHASE_THRESHOLD))
    if kind == "async_sine":
        return AsyncSine(doc.get("depth", 0.0))
    raise ValidationError(f"unknown scheme kind {kind!r}")


# ---------------------------------------------------------------------------
# record file I/O
# ---------------------------------------------------------------------------


def write_records(rs: RecordSet, path, sidecar: bool = True) -> None:
    """Write records as CSV (17 significant digits, so float64 round-trips
    bitwise) plus an optional JSON provenance sidecar."""
    path = Path(path)
    data = np.column_stack([rs.theta_a, rs.theta_b, rs.x_a, rs.x_b])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=CSV_HEADER,
               comments="")
    if sidecar and rs.meta:
        path.with_suffix(path.suffix + ".meta.json").write_text(
            json.dumps(rs.meta, indent=2, sort_keys=True) + "\n"
        )


def read_records(path) -> RecordSet:
    """Read a record CSV written by write_records (or any file with the
    same four-column layout)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such record file: {path}")
    try:
        with warnings.catch_warnings():
            # header-only files are a legal empty record set, not a warning
            warnings.filterwarnings("ignore", message=".*no data.*")
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"cannot parse {path}: {_locate_bad_row(path, exc)}") from exc
    if data.size == 0:
        data = data.reshape(0, 4)
    if data.shape[1] != 4:
        raise ParseError(f"{path} has {data.shape[1]} columns, expected 4")
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta = {}
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad sidecar {meta_path}: {exc}") from exc
    return RecordSet(data[:, 0].copy(), data[:, 1].copy(),
                     data[:, 2].copy(), data[:, 3].copy(), meta)


def _locate_bad_row(path: Path, exc: Exception) -> str:
    with open(path) as fh:
        next(fh, None)  # header
        for row, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 4:
                return f"row {row}: expected 4 fields, got {len(parts)}"
            try:
                [float(p) for p in parts]
            except ValueError:
                return f"row {row}: non-numeric field"
    return str(exc)
