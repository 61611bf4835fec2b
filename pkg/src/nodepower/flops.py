"""Per-iteration FLOP accounting and the computational-intensity proxy.

Operation counts are closed-form estimates from architecture parameters, not
graph traversals of an actual model. For transformers the count follows the
standard six-operations-per-parameter accounting (coefficient 96 = 6 ops x
16 per parameter block); for CNNs it is three forward-pass equivalents per
image scaled by batch and input resolution. Dividing by node count gives the
effective per-node demand, and its base-10 logarithm is the intensity value
every power model consumes.

Counts are floats on purpose: magnitudes reach 1e19 and every downstream use
is logarithmic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

__all__ = [
    "FlopsMismatchWarning",
    "ParallelismConfig",
    "LlmArch",
    "CnnArch",
    "ComputeEstimate",
    "derive_global_batch",
    "resolve_global_batch",
    "llm_flops_per_iteration",
    "cnn_flops_per_iteration",
    "flops_per_iteration",
    "intensity",
    "estimate",
    "verify_against_reference",
]

CNN_REFERENCE_SIDE = 224  # input resolution the per-image counts are quoted at


class FlopsMismatchWarning(UserWarning):
    """Computed operation count disagrees with a recorded reference count."""


@dataclass(frozen=True)
class ParallelismConfig:
    """Degrees of tensor/context/pipeline parallelism for one training run."""

    tp: int
    cp: int
    pp: int
    total_gpus: int

    def __post_init__(self) -> None:
        for name in ("tp", "cp", "pp", "total_gpus"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        denom = self.tp * self.cp * self.pp
        if self.total_gpus % denom != 0:
            raise ValueError(
                f"total_gpus={self.total_gpus} is not divisible by "
                f"tp*cp*pp={denom}"
            )


@dataclass(frozen=True)
class LlmArch:
    """Transformer architecture parameters.

    The batch specification is either a direct ``global_batch`` or a
    (``minibatch``, ``parallelism``) pair from which the global batch is
    derived; supplying both (or neither) is rejected so a config can never
    carry two disagreeing batch stories.
    """

    hidden_size: int
    layers: int
    sequence_length: int
    vocab_size: int
    minibatch: int | None = None
    parallelism: ParallelismConfig | None = None
    global_batch: int | None = None

    def __post_init__(self) -> None:
        for name in ("hidden_size", "layers", "sequence_length", "vocab_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        derived = self.minibatch is not None or self.parallelism is not None
        direct = self.global_batch is not None
        if direct and derived:
            raise ValueError(
                "give either global_batch or (minibatch, parallelism), not both"
            )
        if direct:
            if not isinstance(self.global_batch, int) or self.global_batch < 1:
                raise ValueError("global_batch must be a positive integer")
        else:
            if self.minibatch is None or self.parallelism is None:
                raise ValueError(
                    "a batch specification is required: either global_batch "
                    "or both minibatch and parallelism"
                )
            if not isinstance(self.minibatch, int) or self.minibatch < 1:
                raise ValueError("minibatch must be a positive integer")


@dataclass(frozen=True)
class CnnArch:
    """CNN architecture parameters.

    ``flops_per_image`` is the forward-pass cost in raw operations at the
    224x224 reference resolution; training at ``image_side`` rescales it
    quadratically.
    """

    flops_per_image: float
    image_side: int
    global_batch: int

    def __post_init__(self) -> None:
        if not self.flops_per_image > 0:
            raise ValueError("flops_per_image must be positive")
        if not isinstance(self.image_side, int) or self.image_side < 1:
            raise ValueError("image_side must be a positive integer")
        if not isinstance(self.global_batch, int) or self.global_batch < 1:
            raise ValueError("global_batch must be a positive integer")


@dataclass(frozen=True)
class ComputeEstimate:
    """Operation counts and intensity for one workload.

    ``flops_per_node`` is ``flops_per_iteration / nodes`` and
    ``log_intensity`` its base-10 logarithm; both are stored rather than
    recomputed so a dataset row carries its provenance.
    """

    flops_per_iteration: float
    flops_per_node: float
    log_intensity: float


def derive_global_batch(minibatch: int, parallelism: ParallelismConfig) -> int:
    """Global batch size implied by a minibatch and parallelism degrees.

    Parameters
    ----------
    minibatch : int
        Per-model-replica batch size.
    parallelism : ParallelismConfig
        Degrees splitting the cluster into replicas.

    Returns
    -------
    int
        ``minibatch * total_gpus / (tp * cp * pp)``.
    """
    if not isinstance(minibatch, int) or minibatch < 1:
        raise ValueError("minibatch must be a positive integer")
    denom = parallelism.tp * parallelism.cp * parallelism.pp
    # divisibility of total_gpus by the degrees is a type invariant, so the
    # quotient below is exact
    return minibatch * (parallelism.total_gpus // denom)


def resolve_global_batch(arch: LlmArch) -> int:
    """Return the architecture's global batch, deriving it if necessary."""
    if arch.global_batch is not None:
        return arch.global_batch
    assert arch.minibatch is not None and arch.parallelism is not None
    return derive_global_batch(arch.minibatch, arch.parallelism)


def llm_flops_per_iteration(arch: LlmArch, b_global: int) -> float:
    """Operations per optimizer step for a transformer.

    Implements the six-ops-per-parameter accounting:
    ``96 * B * S * L * H^2 * (1 + S/(6H) + V/(16*L*H))``.

    Parameters
    ----------
    arch : LlmArch
        Architecture parameters (the batch fields on `arch` are ignored here;
        the caller passes the resolved global batch explicitly).
    b_global : int
        Global batch size.

    Returns
    -------
    float
        Estimated forward+backward operations for one iteration.
    """
    if b_global < 1:
        raise ValueError("b_global must be >= 1")
    h = float(arch.hidden_size)
    s = float(arch.sequence_length)
    l = float(arch.layers)
    v = float(arch.vocab_size)
    correction = 1.0 + s / (6.0 * h) + v / (16.0 * l * h)
    return 96.0 * b_global * s * l * h * h * correction


def cnn_flops_per_iteration(arch: CnnArch) -> float:
    """Operations per optimizer step for a CNN.

    ``3 * M_image * (side/224)^2 * B``: one forward plus roughly two
    forward-equivalents for the backward pass, rescaled for input resolution.
    """
    scale = (arch.image_side / CNN_REFERENCE_SIDE) ** 2
    return 3.0 * arch.flops_per_image * scale * arch.global_batch


def flops_per_iteration(arch: LlmArch | CnnArch) -> float:
    """Dispatch on architecture type and resolve the batch internally."""
    if isinstance(arch, LlmArch):
        return llm_flops_per_iteration(arch, resolve_global_batch(arch))
    if isinstance(arch, CnnArch):
        return cnn_flops_per_iteration(arch)
    raise TypeError(f"unsupported architecture object: {type(arch).__name__}")


def intensity(flops: float, nodes: int) -> ComputeEstimate:
    """Per-node intensity for a workload.

    Parameters
    ----------
    flops : float
        Operations per iteration (> 0).
    nodes : int
        Node count the iteration is spread across (>= 1).
    """
    if not flops > 0:
        raise ValueError("flops must be positive")
    if not isinstance(nodes, int) or nodes < 1:
        raise ValueError("nodes must be a positive integer")
    per_node = flops / nodes
    return ComputeEstimate(flops, per_node, math.log10(per_node))


def estimate(arch: LlmArch | CnnArch, nodes: int) -> ComputeEstimate:
    """Convenience: flops_per_iteration followed by intensity."""
    return intensity(flops_per_iteration(arch), nodes)


def verify_against_reference(
    computed: float,
    reference: float,
    rel_tol: float = 0.01,
    context: str = "",
) -> bool:
    """Compare a computed count against a recorded reference count.

    Emits a FlopsMismatchWarning and returns False when the relative
    disagreement exceeds ``rel_tol``. The computed value remains the one the
    pipeline uses; the warning exists so a disagreement is never silent.
    """
    if not (computed > 0 and reference > 0):
        raise ValueError("counts must be positive")
    rel = abs(computed - reference) / reference
    if rel > rel_tol:
        where = f" for {context}" if context else ""
        warnings.warn(
            f"computed operation count {computed:.4g}{where} disagrees with "
            f"the recorded reference {reference:.4g} by {100 * rel:.1f}% "
            f"(tolerance {100 * rel_tol:.1f}%)",
            FlopsMismatchWarning,
            stacklevel=2,
        )
        return False
    return True
