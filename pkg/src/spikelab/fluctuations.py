"""Per-replicate limit statistics and replicate ensembles.

For each replicate we record

* pack fluctuations ``z_s = sqrt(N) (lambda_hat - rho)`` for every pack,
* eigenvector fluctuations ``sqrt(N) u_i`` (``i != j``) and the residual
  ``N (1 - u_j)`` for distinct spikes,
* the angle statistic ``scaling**1.5 sqrt(N) (cos - cos_limit)``.

Sign, orientation and pack assignment follow `spikelab.eigen.oriented_extremes`.
Centering always uses the realized ratio ``n / p``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .eigen import extreme_spectrum, oriented_extremes, sample_covariance
from .errors import DegenerateProjection, PackMismatch
from .model import ModelConfig, make_rng, sample_data

__all__ = [
    "PackFluct", "VecFluct", "AngleFluct", "ReplicateStats", "Ensemble",
    "extract", "simulate_replicate", "run_ensemble", "MAX_FLAGGED_FRACTION",
]

MAX_FLAGGED_FRACTION = 0.01


@dataclass
class PackFluct:
    pack: int
    alpha: float
    z: np.ndarray  # descending within the pack


@dataclass
class VecFluct:
    pack: int
    indices: tuple  # the i != j coordinates, in order
    entries: np.ndarray  # sqrt(N) u_i
    residual: float  # N (1 - u_j)


@dataclass
class AngleFluct:
    pack: int
    cos: float
    statistic: float


@dataclass
class ReplicateStats:
    replicate: int
    seed: int
    packs: list = field(default_factory=list)
    vecs: list = field(default_factory=list)
    angles: list = field(default_factory=list)
    flag: str | None = None

    @property
    def flagged(self):
        return self.flag is not None


def extract(config: ModelConfig, spectrum, theory_model=None, replicate=0, seed=0) -> ReplicateStats:
    """Limit statistics of one replicate from its extreme spectrum.

    ``theory_model`` (default ``config``) supplies the centering constants;
    passing a different model is how falsification runs are built.
    Raises `PackMismatch` when an assigned eigenvalue sits inside the sea.
    """
    tm = config if theory_model is None else theory_model
    g2 = config.gamma_sq_realized
    N = config.n
    sea = theory.mp_support(g2)
    pairs = oriented_extremes(spectrum, config.r_plus, config.r_minus, config.r)
    for pr in pairs:
        if sea.lambda_minus <= pr.value <= sea.lambda_plus:
            raise PackMismatch(
                f"eigenvalue {pr.value:.6g} for spike coordinate {pr.index} lies inside the sea "
                f"[{sea.lambda_minus:.6g}, {sea.lambda_plus:.6g}]")
    sqn = math.sqrt(N)
    out = ReplicateStats(replicate, seed)
    for j, (pk, tpk) in enumerate(zip(config.packs, tm.packs)):
        rho = theory.rho(tpk.alpha, g2)
        vals = np.array([pairs[k].value for k in range(pk.offset, pk.offset + pk.multiplicity)])
        out.packs.append(PackFluct(j, pk.alpha, sqn * (vals - rho)))
    if config.distinct:
        r = config.r
        for j, tpk in enumerate(tm.packs):
            pr = pairs[j]
            others = tuple(i for i in range(r) if i != j)
            out.vecs.append(VecFluct(j, others, sqn * pr.u[list(others)], N * (1.0 - float(pr.u[j]))))
            sc = theory.scaling(tpk.alpha, g2)
            stat = sc ** 1.5 * sqn * (pr.cos_angle - theory.cos_limit(tpk.alpha, g2))
            out.angles.append(AngleFluct(j, pr.cos_angle, stat))
    return out


def simulate_replicate(config: ModelConfig, master_seed, k, theory_model=None, method="lapack") -> ReplicateStats:
    """Draw replicate ``k`` and extract its statistics; detachment failures are flagged, not raised."""
    rng = make_rng(master_seed, k)
    X = sample_data(config, rng)
    S = sample_covariance(X)
    spec = extreme_spectrum(S, config.r_plus, config.r_minus, method=method)
    try:
        return extract(config, spec, theory_model, replicate=k, seed=int(master_seed))
    except (PackMismatch, DegenerateProjection) as exc:
        return ReplicateStats(k, int(master_seed), flag=f"{type(exc).__name__}: {exc}")


def _run_chunk(args):
    config, master_seed, ks, theory_model, method = args
    return [simulate_replicate(config, master_seed, k, theory_model, method) for k in ks]


@dataclass
class Ensemble:
    """Replicate results in replicate order, with accessors returning arrays over unflagged replicates."""

    config: ModelConfig
    master_seed: int
    replicates: list

    @property
    def good(self):
        return [rep for rep in self.replicates if not rep.flagged]

    @property
    def flagged(self):
        return [rep for rep in self.replicates if rep.flagged]

    def z(self, pack, s=None):
        """``(R, r_j)`` array of pack fluctuations, or column ``s``."""
        arr = np.array([rep.packs[pack].z for rep in self.good])
        return arr if s is None else arr[:, s]

    def pack_trace(self, pack):
        return self.z(pack).sum(axis=1)

    def vector_entry(self, pack, i):
        out = []
        for rep in self.good:
            v = rep.vecs[pack]
            out.append(v.entries[v.indices.index(i)])
        return np.array(out)

    def residual(self, pack):
        return np.array([rep.vecs[pack].residual for rep in self.good])

    def angle_statistic(self, pack):
        return np.array([rep.angles[pack].statistic for rep in self.good])

    def cos(self, pack):
        return np.array([rep.angles[pack].cos for rep in self.good])

    def rows(self):
        """``(replicate, kind, pack, index, value)`` tuples in a fixed order."""
        for rep in self.replicates:
            if rep.flagged:
                continue
            for pf in rep.packs:
                for s, v in enumerate(pf.z):
                    yield rep.replicate, "z", pf.pack, s, float(v)
            for vf in rep.vecs:
                for i, v in zip(vf.indices, vf.entries):
                    yield rep.replicate, "u", vf.pack, i, float(v)
                yield rep.replicate, "u_residual", vf.pack, vf.pack, vf.residual
            for af in rep.angles:
                yield rep.replicate, "cos", af.pack, af.pack, af.cos
                yield rep.replicate, "angle_stat", af.pack, af.pack, af.statistic

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "kind", "pack", "index", "value"])
        for rep, kind, pack, idx, val in self.rows():
            w.writerow([rep, kind, pack, idx, repr(val)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({
            "config": self.config.to_dict(),
            "master_seed": self.master_seed,
            "replicates": len(self.replicates),
            "flagged": [{"replicate": rep.replicate, "reason": rep.flag} for rep in self.flagged],
            "rows": [list(row) for row in self.rows()],
        })


def run_ensemble(config: ModelConfig, replicates, master_seed=0, workers=1, theory_model=None,
                 method="lapack", max_flagged=MAX_FLAGGED_FRACTION) -> Ensemble:
    """Simulate ``replicates`` independent replicates.

    Replicate ``k`` depends only on ``(config, master_seed, k)``, so the worker
    count never changes the result.  Raises `PackMismatch` if more than
    ``max_flagged`` of the replicates were flagged.
    """
    if int(replicates) < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates!r}")
    R = int(replicates)
    if workers is None or workers <= 1 or R < 2:
        reps = [simulate_replicate(config, master_seed, k, theory_model, method) for k in range(R)]
    else:
        chunks = [list(range(R))[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(config, master_seed, ks, theory_model, method) for ks in chunks])
            reps = sorted((rep for part in parts for rep in part), key=lambda rep: rep.replicate)
    ens = Ensemble(config, int(master_seed), reps)
    n_bad = len(ens.flagged)
    if n_bad > max_flagged * R:
        raise PackMismatch(f"{n_bad} of {R} replicates flagged (limit {max_flagged:.0%}); "
                           f"first: {ens.flagged[0].flag}")
    return ens
