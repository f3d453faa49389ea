"""Experiment configuration: a single strict JSON document."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .model import NetworkInstance, draw_variances, zipf_demand

__all__ = ["ExperimentConfig", "load_config", "config_hash"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ListVariances(_Strict):
    kind: Literal["list"]
    values: list[Annotated[float, Field(gt=0)]]


class ConstantVariances(_Strict):
    kind: Literal["constant"]
    value: Annotated[float, Field(gt=0)]


class UniformVariances(_Strict):
    kind: Literal["uniform"]
    low: Annotated[float, Field(gt=0)]
    high: Annotated[float, Field(gt=0)]
    seed: Optional[int] = None  # falls back to the master seed

    @model_validator(mode="after")
    def _order(self):
        if self.high < self.low:
            raise ValueError("high must be >= low")
        return self


VarianceSpec = Annotated[Union[ListVariances, ConstantVariances, UniformVariances], Field(discriminator="kind")]


class Network(_Strict):
    K: Annotated[int, Field(ge=1)]
    M: list[Annotated[float, Field(ge=0)]] = Field(min_length=1)


class Library(_Strict):
    N: Annotated[int, Field(ge=1)]
    variances: VarianceSpec = ConstantVariances(kind="constant", value=1.0)


class Demand(_Strict):
    alpha: Union[Annotated[float, Field(ge=0)], list[Annotated[float, Field(ge=0)]]] = 0.0


class Budget(_Strict):
    R: list[Annotated[float, Field(ge=0)]] = Field(min_length=1)


class Design(_Strict):
    """Explicit cache design; ``p`` and ``omega`` are (K, N) nested lists."""

    p: list[list[float]]
    mu: list[float]
    omega: list[list[float]]


class Sim(_Strict):
    tau: Annotated[float, Field(gt=0)] = 1000.0
    T: Annotated[float, Field(gt=0)] = 1.0
    trials: Annotated[int, Field(ge=1)] = 30
    demand: Optional[list[Annotated[int, Field(ge=0)]]] = None
    design: Optional[Design] = None


class Lcu(_Strict):
    trials: Annotated[int, Field(ge=1)] = 10_000
    enumeration_cap: Annotated[int, Field(ge=1)] = 10**6


class ExperimentConfig(_Strict):
    network: Network
    library: Library
    demand: Demand = Demand()
    budget: Budget
    seed: Annotated[int, Field(ge=0, lt=2**64)] = 0
    scheme: Optional[Literal["lcu", "ccm"]] = None
    sim: Sim = Sim()
    lcu: Lcu = Lcu()
    output: Optional[str] = None

    @model_validator(mode="after")
    def _shapes(self):
        if isinstance(self.demand.alpha, list) and len(self.demand.alpha) != self.network.K:
            raise ValueError("demand.alpha list must have one entry per receiver")
        v = self.library.variances
        if isinstance(v, ListVariances) and len(v.values) != self.library.N:
            raise ValueError("library.variances.values must have N entries")
        return self

    def variances(self) -> np.ndarray:
        v = self.library.variances
        N = self.library.N
        if isinstance(v, ListVariances):
            return draw_variances(v.values)
        if isinstance(v, ConstantVariances):
            return draw_variances((v.value, N))
        seed = self.seed if v.seed is None else v.seed
        return draw_variances({"low": v.low, "high": v.high, "seed": seed, "n": N})

    def variance_seed(self):
        v = self.library.variances
        if isinstance(v, UniformVariances):
            return self.seed if v.seed is None else v.seed
        return None

    def demand_matrix(self) -> np.ndarray:
        a = self.demand.alpha
        alphas = a if isinstance(a, list) else [a] * self.network.K
        return np.vstack([zipf_demand(self.library.N, x) for x in alphas])

    def instance(self, M=None, R=None) -> NetworkInstance:
        M = self.network.M[0] if M is None else M
        R = self.budget.R[0] if R is None else R
        return NetworkInstance.build(np.full(self.network.K, float(M)), self.demand_matrix(), self.variances(), float(R))


def _field_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def load_config(source, seed: Optional[int] = None) -> ExperimentConfig:
    """Parse a config from a path, JSON string or dict; ``seed`` overrides the master seed.

    Raises
    ------
    ConfigError
        With one ``field.path: message`` line per problem.
    """
    if isinstance(source, dict):
        data = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"<root>: invalid JSON ({e})") from None
    if seed is not None:
        data = {**data, "seed": seed}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_field_errors(e)) from None


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
