"""Pufferfish scenario data model and ingestion.

A scenario couples a secret space (identifiers plus the ordered
discriminatory pairs) with empirical conditional sample sets indexed by
(prior, secret).  Slice profiles hold the unit directions and weights
that all guarantees are stated against.

Manifest grammar (UTF-8, ``#`` starts a comment)::

    secrets = a, b, c
    pairs = a->b; b->a
    [world]
    prior = theta0
    secret = a
    file = worlds/theta0_a.csv

Sample CSV files carry a header ``f0,f1,...,f{d-1}`` followed by rows of
decimal floats.  World file paths are resolved relative to the manifest.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from srpp.errors import DataError
from srpp.rng import rng_stream

_UNIT_TOL = 1e-9
_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class SliceProfile:
    """Finite set of unit directions with weights on the sphere in R^d.

    ``seed`` records the generator seed for sampled profiles and is 0
    for user-supplied direction sets.
    """

    dim: int
    directions: np.ndarray
    weights: np.ndarray
    seed: int = 0

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if directions.ndim != 2 or directions.shape[1] != self.dim:
            raise ValueError("directions must be an m x dim matrix")
        if directions.shape[0] < 1:
            raise ValueError("profile needs at least one direction")
        if weights.shape != (directions.shape[0],):
            raise ValueError("weights length must match direction count")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValueError("directions must be unit vectors (tol 1e-9)")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to 1 (tol 1e-9)")
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class SecretSpace:
    """Secret identifiers plus the ordered discriminatory pairs."""

    secrets: tuple
    pairs: tuple

    def __post_init__(self):
        secrets = tuple(self.secrets)
        pairs = tuple((a, b) for a, b in self.pairs)
        if len(set(secrets)) != len(secrets):
            raise ValueError("duplicate secret identifiers")
        if not pairs:
            raise ValueError("discriminatory pair set must be nonempty")
        known = set(secrets)
        for a, b in pairs:
            if a == b:
                raise ValueError(f"pair ({a!r}, {b!r}) must name two distinct secrets")
            for s in (a, b):
                if s not in known:
                    raise ValueError(f"unknown secret {s!r} in pairs")
        object.__setattr__(self, "secrets", secrets)
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True)
class WorldSample:
    """n i.i.d. draws of the query output conditioned on (secret, prior)."""

    prior_id: str
    secret_id: str
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("samples must be a nonempty n x d matrix")
        if not np.all(np.isfinite(samples)):
            raise ValueError(
                f"non-finite sample entries in world ({self.prior_id}, {self.secret_id})"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class ScenarioDataset:
    """Instantiated Pufferfish family: worlds for every (prior, pair)."""

    secret_space: SecretSpace
    worlds: tuple
    dim: int
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        worlds = tuple(self.worlds)
        index = {}
        for w in worlds:
            if w.samples.shape[1] != self.dim:
                raise ValueError(
                    f"world ({w.prior_id}, {w.secret_id}) has dimension "
                    f"{w.samples.shape[1]}, scenario has {self.dim}"
                )
            key = (w.prior_id, w.secret_id)
            if key in index:
                raise ValueError(f"duplicate world for {key}")
            index[key] = w
        priors = sorted({w.prior_id for w in worlds})
        if not priors:
            raise ValueError("scenario must contain at least one world")
        for prior in priors:
            for a, b in self.secret_space.pairs:
                for s in (a, b):
                    if (prior, s) not in index:
                        raise ValueError(
                            f"missing world for prior {prior!r}, secret {s!r}"
                        )
        object.__setattr__(self, "worlds", worlds)
        object.__setattr__(self, "_index", index)

    @property
    def priors(self) -> tuple:
        """Prior identifiers in lexicographic order."""
        return tuple(sorted({w.prior_id for w in self.worlds}))

    @property
    def instance_count(self) -> int:
        return len(self.priors) * len(self.secret_space.pairs)

    def world(self, prior_id: str, secret_id: str) -> WorldSample:
        return self._index[(prior_id, secret_id)]

    def instances(self):
        """Yield (prior_id, (s_i, s_j)) in deterministic order."""
        for prior in self.priors:
            for pair in self.secret_space.pairs:
                yield prior, pair


def sample_slice_profile(dim: int, m: int, seed: int) -> SliceProfile:
    """Draw m directions i.i.d. uniform on the sphere, uniform weights.

    Directions are normalized standard-normal vectors from a
    counter-based generator; the output is bitwise reproducible for a
    fixed seed.  Rows with norm below 1e-12 are redrawn.
    """
    if dim < 1 or m < 1:
        raise ValueError("dim and m must be positive integers")
    rng = rng_stream(seed, 0x511CE)
    mat = rng.standard_normal((m, dim))
    norms = np.linalg.norm(mat, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        mat[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(mat, axis=1)
    directions = mat / norms[:, None]
    weights = np.full(m, 1.0 / m)
    return SliceProfile(dim=dim, directions=directions, weights=weights, seed=seed)


def project(samples: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Inner product of every sample row with a unit direction."""
    samples = np.asarray(samples, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if samples.ndim != 2 or direction.ndim != 1:
        raise ValueError("expected an n x d matrix and a length-d vector")
    if samples.shape[1] != direction.shape[0]:
        raise ValueError(
            f"dimension mismatch: samples have d={samples.shape[1]}, "
            f"direction has d={direction.shape[0]}"
        )
    if abs(np.linalg.norm(direction) - 1.0) > _UNIT_TOL:
        raise ValueError("direction must be unit-norm (tol 1e-9)")
    return samples @ direction


def _read_sample_csv(path: Path, entry: str) -> np.ndarray:
    if not path.exists():
        raise DataError(f"{entry}: missing file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{entry}: empty sample file {path}") from None
        header = [h.strip() for h in header]
        d = len(header)
        if header != [f"f{i}" for i in range(d)]:
            raise DataError(f"{entry}: bad header in {path}, expected f0..f{d - 1}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d:
                raise DataError(
                    f"{entry}: dimension mismatch in {path} line {lineno}: "
                    f"expected {d} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(
                    f"{entry}: non-numeric value in {path} line {lineno}"
                ) from None
    if not rows:
        raise DataError(f"{entry}: empty sample file {path}")
    return np.asarray(rows, dtype=np.float64)


def _parse_manifest(text: str, origin: str):
    top = {}
    worlds = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[world]":
            current = {}
            worlds.append((lineno, current))
            continue
        if "=" not in line:
            raise DataError(f"{origin} line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            if key in top:
                raise DataError(f"{origin} line {lineno}: duplicate key {key!r}")
            top[key] = value
        else:
            if key not in ("prior", "secret", "file"):
                raise DataError(f"{origin} line {lineno}: unknown world key {key!r}")
            if key in current:
                raise DataError(f"{origin} line {lineno}: duplicate world key {key!r}")
            current[key] = value
    return top, worlds


def load_scenario(manifest_path) -> ScenarioDataset:
    """Parse a manifest and its referenced sample CSVs into a scenario."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"missing manifest {manifest_path}")
    origin = str(manifest_path)
    top, world_entries = _parse_manifest(
        manifest_path.read_text(encoding="utf-8"), origin
    )

    if "secrets" not in top:
        raise DataError(f"{origin}: missing top-level key 'secrets'")
    if "pairs" not in top:
        raise DataError(f"{origin}: missing top-level key 'pairs'")
    secrets = tuple(s.strip() for s in top["secrets"].split(",") if s.strip())
    pairs = []
    for chunk in top["pairs"].split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "->" not in chunk:
            raise DataError(f"{origin}: pair entry {chunk!r} is not of the form a->b")
        a, b = (part.strip() for part in chunk.split("->", 1))
        pairs.append((a, b))
    try:
        space = SecretSpace(secrets=secrets, pairs=tuple(pairs))
    except ValueError as exc:
        raise DataError(f"{origin}: {exc}") from exc

    base = manifest_path.parent
    worlds = []
    dim = None
    for lineno, entry in world_entries:
        for key in ("prior", "secret", "file"):
            if key not in entry:
                raise DataError(f"{origin} line {lineno}: [world] missing key {key!r}")
        label = f"{origin} [world] line {lineno}"
        if entry["secret"] not in secrets:
            raise DataError(f"{label}: unknown secret {entry['secret']!r}")
        samples = _read_sample_csv(base / entry["file"], label)
        if dim is None:
            dim = samples.shape[1]
        elif samples.shape[1] != dim:
            raise DataError(
                f"{label}: dimension mismatch: file has d={samples.shape[1]}, "
                f"scenario has d={dim}"
            )
        worlds.append(
            WorldSample(
                prior_id=entry["prior"], secret_id=entry["secret"], samples=samples
            )
        )
    if not worlds:
        raise DataError(f"{origin}: manifest declares no [world] blocks")
    try:
        return ScenarioDataset(secret_space=space, worlds=tuple(worlds), dim=dim)
    except ValueError as exc:
        raise DataError(f"{origin}: {exc}") from exc


def write_profile(profile: SliceProfile, path) -> None:
    """Write a slice profile as CSV with header u0..u{d-1},weight."""
    path = Path(path)
    header = ",".join([f"u{i}" for i in range(profile.dim)] + ["weight"])
    lines = [header]
    for row, w in zip(profile.directions, profile.weights):
        lines.append(",".join(repr(float(v)) for v in row) + f",{float(w)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_profile(path) -> SliceProfile:
    """Read a slice-profile CSV written by :func:`write_profile`.

    Weight vectors summing to within [0.999, 1.001] are renormalized
    (text round-off); anything further off is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing profile file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty profile file {path}") from None
        d = len(header) - 1
        if d < 1 or [h.strip() for h in header] != [f"u{i}" for i in range(d)] + [
            "weight"
        ]:
            raise DataError(f"bad profile header in {path}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d + 1:
                raise DataError(f"{path} line {lineno}: expected {d + 1} columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path} line {lineno}: non-numeric value") from None
    if not rows:
        raise DataError(f"profile file {path} has no directions")
    mat = np.asarray(rows, dtype=np.float64)
    directions, weights = mat[:, :d], mat[:, d]
    total = weights.sum()
    if not (0.999 <= total <= 1.001):
        raise DataError(f"profile weights in {path} sum to {total!r}, want 1")
    weights = weights / total
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise DataError(f"profile directions in {path} are not unit vectors")
    directions = directions / norms[:, None]
    try:
        return SliceProfile(dim=d, directions=directions, weights=weights, seed=0)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
