"""Spiked population model: configuration, distribution families and sampling.

A row of the data matrix is ``x = (xi, eta)`` with ``xi`` the ``r`` spike
coordinates (``Cov(xi) = diag(alphas)``) followed by ``p - r`` unit-variance
noise coordinates.  Spike coordinates are indexed 0..r-1 in decreasing order
of ``alpha``.

Random streams come from numpy's Philox counter-based generator, keyed by a
``SeedSequence``; replicate ``k`` under master seed ``m`` always uses
``SeedSequence(m, spawn_key=(k,))`` so results do not depend on the order in
which replicates are run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import theory
from .errors import ModelError

CONFIG_SCHEMA = "spikelab.config/1"

IID_KINDS = ("gaussian", "rademacher", "uniform")
FAMILY_KINDS = IID_KINDS + ("scale_mixture",)

# E w^4 for a unit-variance coordinate of each i.i.d. family.
_MARGINAL_FOURTH = {"gaussian": 3.0, "rademacher": 1.0, "uniform": 9.0 / 5.0}


def make_rng(seed, replicate=None) -> np.random.Generator:
    """Philox generator for ``seed`` (and optionally replicate index)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif replicate is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def _iid(kind, rng, shape):
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "rademacher":
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    if kind == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
    raise ModelError(f"unknown i.i.d. family {kind!r}")


@dataclass(frozen=True)
class SpikeSpec:
    alpha: float
    multiplicity: int = 1


@dataclass(frozen=True)
class DistributionFamily:
    """Law of the unit-variance spike coordinates ``w`` (then ``xi = sqrt(alpha) w``).

    ``scale_mixture`` draws one radial factor ``r`` per row and sets
    ``w = r g`` with ``g`` standard Gaussian, so coordinates are uncorrelated
    but dependent.  ``r**2`` takes ``radial_values`` with ``radial_probs``
    and must have mean one.
    """

    kind: str = "gaussian"
    radial_values: tuple = (0.5, 2.5)
    radial_probs: tuple = (0.75, 0.25)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ModelError(f"unknown family {self.kind!r}; expected one of {FAMILY_KINDS}")
        if self.kind == "scale_mixture":
            vals = np.asarray(self.radial_values, float)
            probs = np.asarray(self.radial_probs, float)
            if vals.shape != probs.shape or vals.ndim != 1 or len(vals) < 1:
                raise ModelError("radial_values and radial_probs must be equal-length sequences")
            if np.any(vals < 0) or np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-12):
                raise ModelError("radial law must be a probability distribution on [0, inf)")
            if not math.isclose(float(vals @ probs), 1.0, abs_tol=1e-12):
                raise ModelError(f"radial law must have E r^2 = 1, got {float(vals @ probs)!r}")

    @classmethod
    def scale_mixture(cls, values, probs):
        return cls("scale_mixture", tuple(float(v) for v in values), tuple(float(p) for p in probs))

    @property
    def radial_fourth(self):
        """``E r^4`` of the radial factor (1 for the i.i.d. families)."""
        if self.kind != "scale_mixture":
            return 1.0
        return float(np.dot(np.square(self.radial_values), self.radial_probs))

    @property
    def marginal_fourth(self):
        if self.kind == "scale_mixture":
            return 3.0 * self.radial_fourth
        return _MARGINAL_FOURTH[self.kind]

    def unit_fourth_moment(self, i, j, k, l):
        """``E[w_i w_j w_k w_l]`` for unit-variance coordinates."""
        if i == j == k == l:
            return self.marginal_fourth
        paired = (i == j and k == l) or (i == k and j == l) or (i == l and j == k)
        if not paired:
            return 0.0
        return self.radial_fourth

    def sample(self, rng, n, r):
        if r == 0:
            return np.empty((n, 0))
        if self.kind in IID_KINDS:
            return _iid(self.kind, rng, (n, r))
        rsq = rng.choice(np.asarray(self.radial_values, float), size=n, p=np.asarray(self.radial_probs, float))
        return rng.standard_normal((n, r)) * np.sqrt(rsq)[:, None]

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "scale_mixture":
            out["radial_values"] = list(self.radial_values)
            out["radial_probs"] = list(self.radial_probs)
        return out

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        kind = d.pop("kind", "gaussian")
        if kind == "scale_mixture":
            return cls.scale_mixture(d.get("radial_values", (0.5, 2.5)), d.get("radial_probs", (0.75, 0.25)))
        return cls(kind)


@dataclass(frozen=True)
class Pack:
    alpha: float
    multiplicity: int
    offset: int


@dataclass(frozen=True)
class ModelConfig:
    """Geometry and law of one spiked-model experiment.

    ``p = round(n / gamma_sq)``; theory is evaluated at the realized ratio
    ``n / p`` (`gamma_sq_realized`).  ``noise`` is the i.i.d. law of the
    noise coordinates; it defaults to the spike family for i.i.d. families and
    to Gaussian for the scale mixture.
    """

    spikes: tuple
    gamma_sq: float
    n: int
    family: DistributionFamily = field(default_factory=DistributionFamily)
    noise: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "spikes", tuple(
            s if isinstance(s, SpikeSpec) else SpikeSpec(*s) if isinstance(s, (tuple, list)) else SpikeSpec(float(s))
            for s in self.spikes))
        if isinstance(self.family, str):
            object.__setattr__(self, "family", DistributionFamily(self.family))

    @property
    def p(self):
        return int(round(self.n / self.gamma_sq))

    @property
    def r(self):
        return sum(s.multiplicity for s in self.spikes)

    @property
    def gamma_sq_realized(self):
        return self.n / self.p

    @property
    def noise_kind(self):
        if self.noise is not None:
            return self.noise
        return self.family.kind if self.family.kind in IID_KINDS else "gaussian"

    @property
    def alphas(self):
        return tuple(s.alpha for s in self.spikes for _ in range(s.multiplicity))

    @property
    def packs(self):
        out, off = [], 0
        for s in self.spikes:
            out.append(Pack(s.alpha, s.multiplicity, off))
            off += s.multiplicity
        return out

    @property
    def top_packs(self):
        return [pk for pk in self.packs if pk.alpha > 1]

    @property
    def r_plus(self):
        return sum(pk.multiplicity for pk in self.top_packs)

    @property
    def r_minus(self):
        return self.r - self.r_plus

    @property
    def distinct(self):
        return all(s.multiplicity == 1 for s in self.spikes)

    def fourth_moment(self, i, j, k, l):
        """Analytic ``E[xi_i xi_j xi_k xi_l]`` (0-based spike coordinates)."""
        r = self.r
        for idx in (i, j, k, l):
            if not 0 <= idx < r:
                raise IndexError(f"spike index {idx} out of range 0..{r - 1}")
        al = self.alphas
        scale = math.sqrt(al[i] * al[j] * al[k] * al[l])
        return scale * self.family.unit_fourth_moment(i, j, k, l)

    def with_spikes(self, spikes):
        return ModelConfig(tuple(spikes), self.gamma_sq, self.n, self.family, self.noise)

    def to_dict(self):
        out = {
            "spikes": [{"alpha": s.alpha, "multiplicity": s.multiplicity} for s in self.spikes],
            "gamma_sq": self.gamma_sq,
            "n": self.n,
            "family": self.family.to_dict(),
        }
        if self.noise is not None:
            out["noise"] = self.noise
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            spikes = tuple(SpikeSpec(float(s["alpha"]), int(s.get("multiplicity", 1))) for s in d["spikes"])
            return cls(spikes, float(d["gamma_sq"]), int(d["n"]),
                       DistributionFamily.from_dict(d.get("family", "gaussian")), d.get("noise"))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model config: {exc!r}") from exc


@dataclass(frozen=True)
class Issue:
    level: str  # "error" or "warning"
    code: str
    message: str


def validate(config: ModelConfig, experiment=None):
    """Check ``config`` and return a list of `Issue` (never raises).

    ``experiment`` is ``None``, ``"eigenvalues"`` or ``"eigenvectors"``.  For
    an experiment, non-detaching spikes are errors rather than warnings, and
    eigenvector experiments additionally require multiplicity one.
    """
    issues = []
    err = lambda code, msg: issues.append(Issue("error", code, msg))
    if not config.gamma_sq > 1:
        err("AspectRatio", f"gamma_sq must exceed 1, got {config.gamma_sq!r}")
        return issues
    if config.n < 1:
        err("SampleSize", f"n must be positive, got {config.n!r}")
        return issues
    p = config.p
    if config.n <= p:
        err("SampleSize", f"need n > p, got n={config.n}, p={p}")
    if not config.spikes:
        err("Spikes", "at least one spike is required")
    if config.r > p:
        err("Spikes", f"total spike count r={config.r} exceeds p={p}")
    alphas = [s.alpha for s in config.spikes]
    for s in config.spikes:
        if not s.alpha > 0 or s.alpha == 1:
            err("Spikes", f"spike values must be positive and differ from 1, got {s.alpha!r}")
        if s.multiplicity < 1:
            err("Spikes", f"multiplicity must be >= 1, got {s.multiplicity!r}")
    if any(a <= b for a, b in zip(alphas, alphas[1:])):
        err("Spikes", "spike values must be distinct and listed in strictly decreasing order")
    if config.noise_kind not in IID_KINDS:
        err("Noise", f"noise law must be one of {IID_KINDS}, got {config.noise_kind!r}")
    g2 = config.gamma_sq_realized if config.n > p > 0 else config.gamma_sq
    for s in config.spikes:
        if s.alpha > 0 and s.alpha != 1 and not theory.is_supercritical(s.alpha, g2):
            level = "error" if experiment else "warning"
            issues.append(Issue(level, "TransitionWindow",
                                f"spike {s.alpha!r} does not detach at gamma^2={g2:.6g}"))
    if experiment == "eigenvectors" and not config.distinct:
        err("Multiplicity", "eigenvector experiments need every spike to have multiplicity one")
    return issues


def check(config, experiment=None):
    """Raise `ModelError` on the first validation error."""
    for issue in validate(config, experiment):
        if issue.level == "error":
            raise ModelError(f"{issue.code}: {issue.message}")
    return config


def sample_data(config: ModelConfig, seed) -> np.ndarray:
    """Draw the ``n x p`` data matrix: spike block first, then noise block."""
    rng = make_rng(seed)
    n, p, r = config.n, config.p, config.r
    X = np.empty((n, p))
    X[:, :r] = config.family.sample(rng, n, r) * np.sqrt(np.asarray(config.alphas, float))
    X[:, r:] = _iid(config.noise_kind, rng, (n, p - r))
    return X


# ---------------------------------------------------------------------------
# Config files


@dataclass(frozen=True)
class RunConfig:
    """A parsed config file: the model plus run-level settings."""

    model: ModelConfig
    seed: int = 0
    theory_spikes: tuple | None = None

    @property
    def theory_model(self):
        if self.theory_spikes is None:
            return self.model
        return self.model.with_spikes(self.theory_spikes)


def parse_config(d) -> RunConfig:
    schema = d.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ModelError(f"unsupported config schema {schema!r}; expected {CONFIG_SCHEMA!r}")
    model = ModelConfig.from_dict(d)
    ts = d.get("theory_spikes")
    if ts is not None:
        ts = tuple(SpikeSpec(float(s["alpha"]), int(s.get("multiplicity", 1))) for s in ts)
    return RunConfig(model, int(d.get("seed", 0)), ts)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ModelError(f"{path}: config must be a JSON object")
    return parse_config(d)


def dump_config(run: RunConfig):
    d = {"schema": CONFIG_SCHEMA, **run.model.to_dict(), "seed": run.seed}
    if run.theory_spikes is not None:
        d["theory_spikes"] = [{"alpha": s.alpha, "multiplicity": s.multiplicity} for s in run.theory_spikes]
    return d
