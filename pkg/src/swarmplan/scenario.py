"""Scenario configuration: schema, validation, YAML round trip."""
from __future__ import annotations

import dataclasses
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .errors import InvalidParameterError
from .gaussians import Gaussian2, Gmm

PLANNERS = ("adoc", "pdf-apf", "sapf", "spp")
REPLAN_MODES = ("triggered", "every-step")


@dataclass
class ScenarioConfig:
    """Everything a run needs besides the seed-driven randomness.

    Mixtures are stored in plain list form ([{mean, cov, weight}, ...]) so the
    file format stays a flat YAML document; use :meth:`initial_pdf` and
    :meth:`target_pdf` for the structured view.
    """

    lx: float
    ly: float
    initial_mixture: list
    target_mixture: list
    true_obstacles: list = field(default_factory=list)
    prior_obstacles: list = field(default_factory=list)
    n_robots: int = 100
    fov_radius: float = 1.0  # km
    dt: float = 0.01  # hr
    dbar: float = 0.05  # km, macro step length and terminal tolerance
    d_th: float = 4.0  # km
    colloc_spacing: float = 1.0  # km
    colloc_cov_scale: float = 0.5  # km^2, isotropic
    grid_spacing: float = 0.1  # km, occupancy cells
    gamma: float = 0.85
    rho_obs: float = 0.3  # km
    rho_rob: float = 0.1  # km
    omega_th: float = 1e-4
    lambda_obs: float = 1.0
    v_max: float = 5.0  # km/hr
    tf_max: int = 2000
    seed: int = 0
    planner: str = "adoc"
    replan_mode: str = "triggered"
    bandwidth: float = 0.3  # km, swarm density kernel
    attract_gain: float = 50.0
    sapf_gain: float = 2000.0
    pdf_apf_gain: float = 400.0
    claim_radius: float = 0.05  # km
    rng_algorithm: str = "pcg64"  # numpy default_rng; echoed into outputs

    def __post_init__(self):
        for name in ("lx", "ly", "fov_radius", "dt", "dbar", "d_th",
                     "colloc_spacing", "colloc_cov_scale", "grid_spacing",
                     "rho_obs", "rho_rob", "v_max", "bandwidth"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.n_robots < 1:
            raise InvalidParameterError("n_robots must be >= 1")
        if self.tf_max < 1:
            raise InvalidParameterError("tf_max must be >= 1")
        if self.planner not in PLANNERS:
            raise InvalidParameterError(
                f"planner must be one of {PLANNERS}, got {self.planner!r}"
            )
        if self.replan_mode not in REPLAN_MODES:
            raise InvalidParameterError(
                f"replan_mode must be one of {REPLAN_MODES}"
            )
        # fail fast on malformed mixtures
        self.initial_pdf()
        self.target_pdf()

    def _mixture(self, entries) -> Gmm:
        comps = []
        weights = []
        for e in entries:
            cov = np.asarray(e["cov"], dtype=float)
            if cov.ndim == 0:
                cov = float(cov) * np.eye(2)
            comps.append(Gaussian2(np.asarray(e["mean"], dtype=float), cov))
            weights.append(float(e.get("weight", 1.0)))
        w = np.asarray(weights)
        return Gmm(tuple(comps), w / w.sum())

    def initial_pdf(self) -> Gmm:
        return self._mixture(self.initial_mixture)

    def target_pdf(self) -> Gmm:
        return self._mixture(self.target_mixture)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        fields = ScenarioConfig.__dataclass_fields__
        extra = set(d) - set(fields)
        if extra:
            raise InvalidParameterError(f"unknown scenario keys: {sorted(extra)}")
        required = {
            name for name, f in fields.items()
            if f.default is dataclasses.MISSING
            and f.default_factory is dataclasses.MISSING
        }
        missing = required - set(d)
        if missing:
            raise InvalidParameterError(
                f"missing scenario keys: {sorted(missing)}"
            )
        return ScenarioConfig(**d)


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise InvalidParameterError(f"scenario file {path} is not a mapping")
    return ScenarioConfig.from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
