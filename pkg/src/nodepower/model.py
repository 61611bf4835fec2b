"""Power-model functional forms, TDP baselines, and fitted-model files.

All calibrated variants map a node's log10 computational intensity x to
average node power in kW:

* ``asymptotic``   p_idle + beta * x / (alpha + x)
* ``arch-fe``      same, with architecture-specific beta (LLM vs CNN)
* ``sigmoid``      p_idle + beta * logistic((x - x0) / k)
* ``simple``       p_idle + beta * r / (alpha + r) on raw operations r = 10^x

The simple raw-scale variant is kept for completeness but has no calibrated
preset: the published shape values only make sense on the log scale. Every
variant is strictly increasing in x and strictly inside
(p_idle, p_idle + magnitude) for finite intensity, mirroring the physical
picture of a node that can neither dip below idle nor exceed the sum of its
component maxima.

Predictions are of *average* node power over a training run; multiplying by
node count and duration gives the energy estimate used across the toolkit.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Any, Mapping

import numpy as np
from scipy.special import expit

from . import reference
from .reference import Architecture_CNN, Architecture_LLM

__all__ = [
    "ModelForm",
    "PowerParams",
    "TdpConfig",
    "FittedModel",
    "predict_power",
    "predict_energy",
    "tdp_bounds",
    "save_model",
    "load_model",
    "preset",
    "preset_names",
    "MODEL_FILE_FORMAT",
]

MODEL_FILE_FORMAT = "nodepower-model/1"


class ModelForm(enum.Enum):
    """The selectable functional forms."""

    SIMPLE_ASYMPTOTIC = "simple"
    LOG_ASYMPTOTIC = "asymptotic"
    LOG_ASYMPTOTIC_ARCH_FE = "arch-fe"
    SIGMOID = "sigmoid"

    @classmethod
    def from_string(cls, value: str) -> "ModelForm":
        for form in cls:
            if form.value == value:
                return form
        raise ValueError(
            f"unknown model form {value!r}; choose from "
            f"{[f.value for f in cls]}"
        )


# fields each variant populates (everything else must stay None)
_REQUIRED_FIELDS: dict[ModelForm, tuple[str, ...]] = {
    ModelForm.SIMPLE_ASYMPTOTIC: ("p_idle_kw", "beta_comp_kw", "alpha"),
    ModelForm.LOG_ASYMPTOTIC: ("p_idle_kw", "beta_comp_kw", "alpha"),
    ModelForm.LOG_ASYMPTOTIC_ARCH_FE: (
        "p_idle_kw", "beta_llm_kw", "beta_cnn_kw", "alpha",
    ),
    ModelForm.SIGMOID: ("p_idle_kw", "beta_comp_kw", "x0", "k"),
}

_ALL_PARAM_FIELDS = (
    "p_idle_kw", "beta_comp_kw", "beta_llm_kw", "beta_cnn_kw",
    "alpha", "x0", "k",
)


@dataclass(frozen=True)
class PowerParams:
    """Parameter set for one model variant.

    Only the fields a variant uses may be populated; ``validate_for`` is the
    gate every prediction and serialization path goes through.
    """

    p_idle_kw: float
    beta_comp_kw: float | None = None
    beta_llm_kw: float | None = None
    beta_cnn_kw: float | None = None
    alpha: float | None = None
    x0: float | None = None
    k: float | None = None

    def validate_for(self, form: ModelForm) -> None:
        required = _REQUIRED_FIELDS[form]
        for name in _ALL_PARAM_FIELDS:
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise ValueError(f"{form.value} model requires {name}")
            elif value is not None:
                raise ValueError(
                    f"{form.value} model does not use {name} (got {value!r})"
                )
        if not self.p_idle_kw > 0:
            raise ValueError("p_idle_kw must be positive")
        for name in ("beta_comp_kw", "beta_llm_kw", "beta_cnn_kw"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.k is not None and not self.k > 0:
            raise ValueError("k must be positive")

    def as_dict(self) -> dict[str, float]:
        """Populated fields only, in declaration order."""
        return {
            name: getattr(self, name)
            for name in _ALL_PARAM_FIELDS
            if getattr(self, name) is not None
        }


def _magnitude(form: ModelForm, params: PowerParams, arch: str | None) -> float:
    if form is ModelForm.LOG_ASYMPTOTIC_ARCH_FE:
        if arch == Architecture_LLM:
            return params.beta_llm_kw  # type: ignore[return-value]
        if arch == Architecture_CNN:
            return params.beta_cnn_kw  # type: ignore[return-value]
        raise ValueError(
            "the architecture-fixed-effect form needs arch='llm' or 'cnn', "
            f"got {arch!r}"
        )
    return params.beta_comp_kw  # type: ignore[return-value]


def predict_power(
    form: ModelForm,
    params: PowerParams,
    x: float | np.ndarray,
    arch: str | None = None,
):
    """Predicted average node power in kW at log10 intensity ``x``.

    Parameters
    ----------
    form : ModelForm
    params : PowerParams
        Must be populated consistently with ``form``.
    x : float or ndarray
        log10 of effective operations per node per iteration. Asymptotic
        forms require x > 0 (intensities below one operation per node are
        outside the model's domain).
    arch : str, optional
        "llm" or "cnn"; required by the architecture-fixed-effect form and
        ignored otherwise.

    Returns
    -------
    float or ndarray, matching the shape of ``x``.
    """
    params.validate_for(form)
    beta = _magnitude(form, params, arch)
    xv = np.asarray(x, dtype=float)
    scalar = xv.ndim == 0

    if form is ModelForm.SIGMOID:
        out = params.p_idle_kw + beta * expit((xv - params.x0) / params.k)
    else:
        if np.any(xv <= 0):
            raise ValueError(
                "asymptotic forms are defined for x > 0 "
                "(log10 intensity above one operation per node)"
            )
        # the saturation ratio is computed before scaling by beta so that
        # the half-power point lands exactly on x = alpha
        if form is ModelForm.SIMPLE_ASYMPTOTIC:
            r = np.power(10.0, xv)
            out = params.p_idle_kw + beta * (r / (params.alpha + r))
        else:
            out = params.p_idle_kw + beta * (xv / (params.alpha + xv))

    return float(out) if scalar else out


def predict_energy(
    form: ModelForm,
    params: PowerParams,
    x: float,
    arch: str | None,
    nodes: int,
    duration_h: float,
) -> float:
    """Predicted IT energy in kWh: power(x) x nodes x duration."""
    if not isinstance(nodes, int) or nodes < 1:
        raise ValueError("nodes must be a positive integer")
    if not duration_h > 0:
        raise ValueError("duration_h must be positive")
    return predict_power(form, params, x, arch) * nodes * duration_h


# ---------------------------------------------------------------------------
# TDP baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TdpConfig:
    """Rated-power figures used for baseline energy estimates.

    ``chip_tdp_kw`` has no default on purpose: no per-GPU rating was published
    for the measured systems, so callers must state the value they are using
    (0.7 kW per GPU is a typical vendor board rating and is the documented
    example default in the CLI).
    """

    chip_tdp_kw: float
    node_tdp_kw: float = reference.NODE_TDP_KW
    gpus_per_node: int = reference.GPUS_PER_NODE

    def __post_init__(self) -> None:
        if not isinstance(self.gpus_per_node, int) or self.gpus_per_node < 1:
            raise ValueError("gpus_per_node must be a positive integer")
        chip_total = self.chip_tdp_kw * self.gpus_per_node
        if not 0 < chip_total <= self.node_tdp_kw:
            raise ValueError(
                f"chip_tdp_kw*gpus_per_node = {chip_total:g} kW must be "
                f"positive and at most node_tdp_kw = {self.node_tdp_kw:g} kW"
            )


def tdp_bounds(
    tdp: TdpConfig, nodes: int, duration_h: float
) -> tuple[float, float]:
    """Chip- and node-rating energy estimates in kWh.

    The chip figure (GPU count x chip rating x hours) ignores everything
    outside the accelerators and acts as the lower rated-power bound; the
    node figure uses the full node rating and acts as the upper one.
    """
    if not isinstance(nodes, int) or nodes < 1:
        raise ValueError("nodes must be a positive integer")
    if duration_h < 0:
        raise ValueError("duration_h must be non-negative")
    chip = tdp.chip_tdp_kw * tdp.gpus_per_node * nodes * duration_h
    node = tdp.node_tdp_kw * nodes * duration_h
    return chip, node


# ---------------------------------------------------------------------------
# fitted-model files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedModel:
    """A model variant plus parameters, uncertainty, and provenance.

    ``provenance`` carries at least: how the parameters came to be ("preset"
    or "fit"), the training workload ids, and the exclusions applied; fits
    add the dataset hash and a timestamp.
    """

    form: ModelForm
    params: PowerParams
    robust_se: Mapping[str, float] = field(default_factory=dict)
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def power_kw(self, x: float, arch: str | None = None) -> float:
        return predict_power(self.form, self.params, x, arch)

    def energy_kwh(
        self, x: float, arch: str | None, nodes: int, duration_h: float
    ) -> float:
        return predict_energy(
            self.form, self.params, x, arch, nodes, duration_h
        )


def _model_document(model: FittedModel) -> dict[str, Any]:
    model.params.validate_for(model.form)
    return {
        "format": MODEL_FILE_FORMAT,
        "variant": model.form.value,
        "params": model.params.as_dict(),
        "robust_se": dict(model.robust_se),
        "provenance": dict(model.provenance),
    }


def save_model(model: FittedModel, path_or_stream: str | Path | IO[str]) -> None:
    """Write a fitted model as JSON.

    Parameters round-trip bit-exactly: floats are serialized with Python's
    shortest-exact decimal representation. Keys are sorted so identical
    models produce identical bytes.
    """
    text = json.dumps(_model_document(model), sort_keys=True, indent=2) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)  # type: ignore[union-attr]
    else:
        Path(path_or_stream).write_text(text, encoding="utf-8")


def load_model(path_or_stream: str | Path | IO[str]) -> FittedModel:
    """Read a fitted-model JSON file written by save_model."""
    if hasattr(path_or_stream, "read"):
        doc = json.load(path_or_stream)  # type: ignore[arg-type]
    else:
        with open(path_or_stream, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    if doc.get("format") != MODEL_FILE_FORMAT:
        raise ValueError(
            f"not a recognized model file (format={doc.get('format')!r})"
        )
    form = ModelForm.from_string(doc["variant"])
    params = PowerParams(**doc["params"])
    params.validate_for(form)
    return FittedModel(
        form=form,
        params=params,
        robust_se=dict(doc.get("robust_se", {})),
        provenance=dict(doc.get("provenance", {})),
    )


# ---------------------------------------------------------------------------
# calibrated presets
# ---------------------------------------------------------------------------

def _preset_provenance(name: str) -> dict[str, Any]:
    excluded = {wid for wid, _ in reference.DEFAULT_EXCLUSIONS}
    training = [
        row.workload_id
        for row in reference.REFERENCE_WORKLOADS
        if row.workload_id not in excluded
    ]
    return {
        "kind": "preset",
        "name": name,
        "training_workload_ids": training,
        "exclusions": [list(pair) for pair in reference.DEFAULT_EXCLUSIONS],
        "note": (
            "published coefficients from the calibration study; magnitudes "
            "refit at idle 1.86 kW with the shape pinned from the "
            "constrained stage"
        ),
    }


def _build_presets() -> dict[str, FittedModel]:
    presets: dict[str, FittedModel] = {}
    presets["asymptotic"] = FittedModel(
        form=ModelForm.LOG_ASYMPTOTIC,
        params=PowerParams(
            p_idle_kw=reference.FINAL_IDLE_KW,
            beta_comp_kw=reference.BETA_SINGLE_KW,
            alpha=reference.ALPHA_POST_EXCLUSION,
        ),
        robust_se={"beta_comp_kw": 0.35},
        provenance=_preset_provenance("asymptotic"),
    )
    presets["arch-fe"] = FittedModel(
        form=ModelForm.LOG_ASYMPTOTIC_ARCH_FE,
        params=PowerParams(
            p_idle_kw=reference.FINAL_IDLE_KW,
            beta_llm_kw=reference.BETA_LLM_KW,
            beta_cnn_kw=reference.BETA_CNN_KW,
            alpha=reference.ALPHA_POST_EXCLUSION,
        ),
        robust_se={"beta_llm_kw": 0.50, "beta_cnn_kw": 0.32},
        provenance=_preset_provenance("arch-fe"),
    )
    presets["sigmoid"] = FittedModel(
        form=ModelForm.SIGMOID,
        params=PowerParams(
            p_idle_kw=reference.FINAL_IDLE_KW,
            beta_comp_kw=reference.SIGMOID_BETA_KW,
            x0=reference.SIGMOID_X0_FULL_DATA,
            k=reference.SIGMOID_K_REFIT,
        ),
        robust_se={"beta_comp_kw": 1.33, "k": 0.16},
        provenance=_preset_provenance("sigmoid"),
    )
    # the published record is ambiguous about which sigmoid midpoint the
    # final magnitudes were paired with; both candidates ship
    post = replace(
        presets["sigmoid"].params, x0=reference.SIGMOID_X0_POST_EXCLUSION
    )
    presets["sigmoid-postexclusion"] = FittedModel(
        form=ModelForm.SIGMOID,
        params=post,
        robust_se=dict(presets["sigmoid"].robust_se),
        provenance=_preset_provenance("sigmoid-postexclusion"),
    )
    return presets


_PRESETS = _build_presets()


def preset_names() -> tuple[str, ...]:
    return tuple(_PRESETS)


def preset(name: str) -> FittedModel:
    """Return a shipped calibrated model by name."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(_PRESETS)}"
        ) from None
