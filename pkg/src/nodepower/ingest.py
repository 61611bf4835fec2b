"""Trace-file parsing, workload configuration, and dataset assembly.

The on-disk layout this module consumes:

* trace file: CSV with header ``workload_id,node_id,elapsed_s,power_kw``,
  one row per power sample, UTF-8, ``.`` decimal separator;
* workload config: INI file with a ``[workload]`` section (identity, node
  count, duration, interconnect) and one of ``[llm]``/``[cnn]`` holding the
  architecture parameters the flops module needs;
* manifest: CSV with header ``config,trace`` listing the per-workload file
  pairs, paths relative to the manifest's own directory.

Energy is average power times node count times duration. That is how the
reference summaries were built (their reported energies reproduce within
rounding), and it keeps 2-second and 5-minute sampling comparable without
pretending either is a continuous waveform. Total interconnect power, when
metered, is split evenly across nodes and added as a constant to every
sample of the workload.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from . import flops
from .reference import Architecture_CNN, Architecture_LLM

__all__ = [
    "TraceFormatError",
    "ConfigError",
    "PowerSample",
    "NodeTrace",
    "WorkloadRecord",
    "WorkloadSummary",
    "RegressionDataset",
    "parse_trace_file",
    "write_trace_file",
    "allocate_interconnect",
    "summarize_workload",
    "with_compute",
    "assemble_dataset",
    "load_workload_config",
    "load_workload",
    "load_manifest",
    "load_and_assemble",
    "load_exclusions",
]


class TraceFormatError(ValueError):
    """A trace file violated the format contract; the message names the line."""


class ConfigError(ValueError):
    """A workload config file is missing or inconsistent."""


@dataclass(frozen=True)
class PowerSample:
    elapsed_s: float
    power_kw: float

    def __post_init__(self) -> None:
        if self.elapsed_s < 0:
            raise ValueError(f"elapsed_s must be >= 0, got {self.elapsed_s}")
        if not self.power_kw > 0:
            raise ValueError(f"power_kw must be positive, got {self.power_kw}")


@dataclass(frozen=True)
class NodeTrace:
    """Time-ordered power samples for one node of one workload."""

    workload_id: str
    node_id: str
    samples: tuple[PowerSample, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError(
                f"trace {self.workload_id}/{self.node_id} is empty"
            )
        times = [s.elapsed_s for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(
                f"trace {self.workload_id}/{self.node_id} is not strictly "
                "increasing in elapsed_s"
            )


@dataclass(frozen=True)
class WorkloadRecord:
    """One training run: configuration, traces, and (optionally) its
    compute estimate."""

    workload_id: str
    architecture: str
    arch_params: flops.LlmArch | flops.CnnArch | None
    nodes: int
    gpus_per_node: int
    traces: tuple[NodeTrace, ...]
    interconnect_total_kw: float
    duration_h: float
    source: str
    reference_flops: float | None = None
    compute: flops.ComputeEstimate | None = None

    def __post_init__(self) -> None:
        if self.architecture not in (Architecture_LLM, Architecture_CNN):
            raise ValueError(
                f"architecture must be 'llm' or 'cnn', got "
                f"{self.architecture!r}"
            )
        if not isinstance(self.nodes, int) or self.nodes < 1:
            raise ValueError("nodes must be a positive integer")
        if not isinstance(self.gpus_per_node, int) or self.gpus_per_node < 1:
            raise ValueError("gpus_per_node must be a positive integer")
        if len(self.traces) > self.nodes:
            raise ValueError(
                f"{self.workload_id}: {len(self.traces)} traces for "
                f"{self.nodes} nodes"
            )
        if self.interconnect_total_kw < 0:
            raise ValueError("interconnect_total_kw must be >= 0")
        if not self.duration_h > 0:
            raise ValueError("duration_h must be positive")
        for trace in self.traces:
            if trace.workload_id != self.workload_id:
                raise ValueError(
                    f"trace for {trace.workload_id!r} attached to record "
                    f"{self.workload_id!r}"
                )


@dataclass(frozen=True)
class WorkloadSummary:
    p_avg_kw: float
    p_max_kw: float
    p_sd_kw: float
    duration_h: float
    it_energy_kwh: float
    n_observations: int

    def __post_init__(self) -> None:
        if self.p_avg_kw > self.p_max_kw:
            raise ValueError("p_avg_kw must not exceed p_max_kw")
        if not self.it_energy_kwh > 0:
            raise ValueError("it_energy_kwh must be positive")


# ---------------------------------------------------------------------------
# trace files
# ---------------------------------------------------------------------------

_TRACE_HEADER = ("workload_id", "node_id", "elapsed_s", "power_kw")


def _open_text(path_or_stream: str | Path | IO[str]) -> tuple[IO[str], bool]:
    if hasattr(path_or_stream, "read"):
        return path_or_stream, False  # type: ignore[return-value]
    return open(path_or_stream, "r", encoding="utf-8", newline=""), True


def parse_trace_file(
    path_or_stream: str | Path | IO[str], workload_id: str
) -> tuple[NodeTrace, ...]:
    """Parse one workload's trace file into per-node traces.

    Parameters
    ----------
    path_or_stream : path or readable text stream
    workload_id : str
        Every row must carry this id; a row for a different workload is a
        format error (trace files are per-workload).

    Returns
    -------
    tuple of NodeTrace
        One per distinct node_id, in first-appearance order, samples sorted
        by elapsed_s.

    Raises
    ------
    TraceFormatError
        On a malformed row, a non-positive power, a negative elapsed time,
        or a duplicate (node_id, elapsed_s) pair; the message names the
        offending 1-based line number.
    """
    fh, owned = _open_text(path_or_stream)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError("line 1: empty trace file") from None
        if tuple(h.strip() for h in header) != _TRACE_HEADER:
            raise TraceFormatError(
                f"line 1: expected header {','.join(_TRACE_HEADER)!r}, "
                f"got {','.join(header)!r}"
            )
        by_node: dict[str, list[PowerSample]] = {}
        seen: set[tuple[str, float]] = set()
        for row in reader:
            line = reader.line_num
            if not row:
                continue  # blank trailing line
            if len(row) != 4:
                raise TraceFormatError(
                    f"line {line}: expected 4 fields, got {len(row)}"
                )
            wid, node_id, elapsed_text, power_text = (f.strip() for f in row)
            if wid != workload_id:
                raise TraceFormatError(
                    f"line {line}: row belongs to workload {wid!r}, "
                    f"expected {workload_id!r}"
                )
            if not node_id:
                raise TraceFormatError(f"line {line}: empty node_id")
            try:
                elapsed = float(elapsed_text)
                power = float(power_text)
            except ValueError:
                raise TraceFormatError(
                    f"line {line}: non-numeric elapsed_s or power_kw"
                ) from None
            if elapsed < 0:
                raise TraceFormatError(
                    f"line {line}: negative elapsed_s ({elapsed})"
                )
            if not power > 0:
                raise TraceFormatError(
                    f"line {line}: non-positive power_kw ({power})"
                )
            key = (node_id, elapsed)
            if key in seen:
                raise TraceFormatError(
                    f"line {line}: duplicate sample for node {node_id!r} "
                    f"at elapsed_s={elapsed}"
                )
            seen.add(key)
            by_node.setdefault(node_id, []).append(
                PowerSample(elapsed, power)
            )
    finally:
        if owned:
            fh.close()
    if not by_node:
        raise TraceFormatError("trace file has a header but no data rows")
    return tuple(
        NodeTrace(
            workload_id,
            node_id,
            tuple(sorted(samples, key=lambda s: s.elapsed_s)),
        )
        for node_id, samples in by_node.items()
    )


def write_trace_file(
    traces: Iterable[NodeTrace], path_or_stream: str | Path | IO[str]
) -> None:
    """Serialize traces in the trace-file format.

    Floats are written with their shortest exact decimal representation, so
    parse -> write -> parse is lossless for (node_id, elapsed_s, power_kw).
    """
    if hasattr(path_or_stream, "write"):
        fh: IO[str] = path_or_stream  # type: ignore[assignment]
        owned = False
    else:
        fh = open(path_or_stream, "w", encoding="utf-8", newline="")
        owned = True
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_TRACE_HEADER)
        for trace in traces:
            for s in trace.samples:
                writer.writerow(
                    (trace.workload_id, trace.node_id,
                     repr(s.elapsed_s), repr(s.power_kw))
                )
    finally:
        if owned:
            fh.close()


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def allocate_interconnect(record: WorkloadRecord) -> float:
    """Per-node interconnect power increment in kW (even split)."""
    return record.interconnect_total_kw / record.nodes


def summarize_workload(record: WorkloadRecord) -> WorkloadSummary:
    """Pooled power statistics and IT energy for one workload.

    The mean and maximum pool every sample across every node; the standard
    deviation is the population SD of the pooled samples (at the sample
    counts involved the sample/population distinction is noise, and the
    population form keeps the constant-trace case exactly zero). The
    interconnect increment shifts mean and max but not the SD. Energy is
    ``p_avg x nodes x duration`` by construction.
    """
    if not record.traces:
        raise ValueError(f"{record.workload_id}: no traces to summarize")
    powers = np.concatenate(
        [np.array([s.power_kw for s in t.samples]) for t in record.traces]
    )
    increment = allocate_interconnect(record)
    p_avg = float(powers.mean()) + increment
    p_max = float(powers.max()) + increment
    p_sd = float(powers.std(ddof=0))
    return WorkloadSummary(
        p_avg_kw=p_avg,
        p_max_kw=p_max,
        p_sd_kw=p_sd,
        duration_h=record.duration_h,
        it_energy_kwh=p_avg * record.nodes * record.duration_h,
        n_observations=int(powers.size),
    )


# ---------------------------------------------------------------------------
# compute estimates and the regression dataset
# ---------------------------------------------------------------------------

def with_compute(record: WorkloadRecord) -> WorkloadRecord:
    """Attach the architecture-derived compute estimate to a record.

    If the record carries a recorded reference count, the computed value is
    checked against it (>1% disagreement emits FlopsMismatchWarning); the
    computed value is what the dataset uses either way.
    """
    if record.arch_params is None:
        raise ConfigError(
            f"{record.workload_id}: no architecture parameters; cannot "
            "compute an operation count"
        )
    est = flops.estimate(record.arch_params, record.nodes)
    if record.reference_flops is not None:
        flops.verify_against_reference(
            est.flops_per_iteration,
            record.reference_flops,
            context=record.workload_id,
        )
    return replace(record, compute=est)


@dataclass(frozen=True)
class RegressionDataset:
    """Flat per-observation arrays: the regression's view of the data.

    One row per power sample, tagged with its workload (the cluster id for
    robust inference), node, architecture, and the workload's log intensity.
    """

    workload_ids: np.ndarray
    node_ids: np.ndarray
    power_kw: np.ndarray
    x: np.ndarray
    arch: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.power_kw)
        for name in ("workload_ids", "node_ids", "x", "arch"):
            if len(getattr(self, name)) != n:
                raise ValueError("dataset columns have unequal lengths")

    @property
    def n_observations(self) -> int:
        return int(len(self.power_kw))

    def workloads(self) -> tuple[str, ...]:
        """Unique workload ids in first-appearance order."""
        seen: dict[str, None] = {}
        for wid in self.workload_ids:
            seen.setdefault(str(wid), None)
        return tuple(seen)

    def cluster_index(self) -> dict[str, np.ndarray]:
        """Observation indices per workload."""
        return {
            wid: np.flatnonzero(self.workload_ids == wid)
            for wid in self.workloads()
        }

    def subset(self, workload_ids: Iterable[str]) -> "RegressionDataset":
        wanted = list(workload_ids)
        mask = np.isin(self.workload_ids, wanted)
        return RegressionDataset(
            self.workload_ids[mask],
            self.node_ids[mask],
            self.power_kw[mask],
            self.x[mask],
            self.arch[mask],
        )

    def drop(self, workload_ids: Iterable[str]) -> "RegressionDataset":
        unwanted = set(workload_ids)
        keep = [w for w in self.workloads() if w not in unwanted]
        return self.subset(keep)

    def iter_rows(self) -> Iterator[tuple[str, str, float, float, str]]:
        for i in range(self.n_observations):
            yield (
                str(self.workload_ids[i]),
                str(self.node_ids[i]),
                float(self.power_kw[i]),
                float(self.x[i]),
                str(self.arch[i]),
            )

    def sha256(self) -> str:
        """Canonical content hash (used in fit provenance)."""
        h = hashlib.sha256()
        for wid, nid, p, x, arch in self.iter_rows():
            h.update(f"{wid},{nid},{p!r},{x!r},{arch}\n".encode())
        return h.hexdigest()


def assemble_dataset(records: Iterable[WorkloadRecord]) -> RegressionDataset:
    """Concatenate per-sample observations from compute-tagged records.

    Every record must already carry a ComputeEstimate (see with_compute);
    cardinality is preserved exactly: one observation per power sample.
    """
    wids: list[str] = []
    nids: list[str] = []
    powers: list[float] = []
    xs: list[float] = []
    archs: list[str] = []
    for record in records:
        if record.compute is None:
            raise ValueError(
                f"{record.workload_id}: no compute estimate attached; "
                "call with_compute first"
            )
        increment = allocate_interconnect(record)
        for trace in record.traces:
            for s in trace.samples:
                wids.append(record.workload_id)
                nids.append(trace.node_id)
                powers.append(s.power_kw + increment)
                xs.append(record.compute.log_intensity)
                archs.append(record.architecture)
    if not wids:
        raise ValueError("no observations: records had no traces")
    return RegressionDataset(
        np.array(wids),
        np.array(nids),
        np.array(powers, dtype=float),
        np.array(xs, dtype=float),
        np.array(archs),
    )


# ---------------------------------------------------------------------------
# config and manifest files
# ---------------------------------------------------------------------------

def _get(section: configparser.SectionProxy, key: str, path: Path, kind=str):
    if key not in section:
        raise ConfigError(f"{path}: missing key {key!r} in [{section.name}]")
    raw = section[key]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"{path}: key {key!r} has invalid value {raw!r}"
        ) from None


def _parse_llm_section(
    section: configparser.SectionProxy, path: Path, total_gpus: int
) -> flops.LlmArch:
    common = dict(
        hidden_size=_get(section, "hidden_size", path, int),
        layers=_get(section, "layers", path, int),
        sequence_length=_get(section, "sequence_length", path, int),
        vocab_size=_get(section, "vocab_size", path, int),
    )
    has_direct = "global_batch" in section
    has_derived = any(
        key in section for key in ("minibatch", "tp", "cp", "pp")
    )
    if has_direct and has_derived:
        raise ConfigError(
            f"{path}: give either global_batch or minibatch+tp/cp/pp, "
            "not both"
        )
    try:
        if has_direct:
            return flops.LlmArch(
                **common, global_batch=_get(section, "global_batch", path, int)
            )
        parallelism = flops.ParallelismConfig(
            tp=_get(section, "tp", path, int),
            cp=_get(section, "cp", path, int),
            pp=_get(section, "pp", path, int),
            total_gpus=total_gpus,
        )
        return flops.LlmArch(
            **common,
            minibatch=_get(section, "minibatch", path, int),
            parallelism=parallelism,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_cnn_section(
    section: configparser.SectionProxy, path: Path
) -> flops.CnnArch:
    gflops = _get(section, "flops_per_image_gflops", path, float)
    try:
        return flops.CnnArch(
            flops_per_image=gflops * 1e9,
            image_side=_get(section, "image_side", path, int),
            global_batch=_get(section, "global_batch", path, int),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_workload_config(path: str | Path) -> WorkloadRecord:
    """Read a workload config file; the returned record has no traces yet."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: invalid config syntax ({exc})") from exc
    if "workload" not in parser:
        raise ConfigError(f"{path}: missing [workload] section")
    w = parser["workload"]
    architecture = _get(w, "architecture", path).lower()
    if architecture not in (Architecture_LLM, Architecture_CNN):
        raise ConfigError(
            f"{path}: architecture must be 'llm' or 'cnn', "
            f"got {architecture!r}"
        )
    nodes = _get(w, "nodes", path, int)
    gpus_per_node = _get(w, "gpus_per_node", path, int)
    if architecture not in parser:
        raise ConfigError(f"{path}: missing [{architecture}] section")
    if architecture == Architecture_LLM:
        arch_params: flops.LlmArch | flops.CnnArch = _parse_llm_section(
            parser[Architecture_LLM], path, nodes * gpus_per_node
        )
    else:
        arch_params = _parse_cnn_section(parser[Architecture_CNN], path)
    reference_flops = (
        float(w["reference_flops"]) if "reference_flops" in w else None
    )
    try:
        return WorkloadRecord(
            workload_id=_get(w, "id", path),
            architecture=architecture,
            arch_params=arch_params,
            nodes=nodes,
            gpus_per_node=gpus_per_node,
            traces=(),
            interconnect_total_kw=float(w.get("interconnect_total_kw", "0")),
            duration_h=_get(w, "duration_h", path, float),
            source=w.get("source", "unknown"),
            reference_flops=reference_flops,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_workload(
    config_path: str | Path, trace_path: str | Path
) -> WorkloadRecord:
    """Config plus traces: one fully populated record."""
    record = load_workload_config(config_path)
    traces = parse_trace_file(trace_path, record.workload_id)
    return replace(record, traces=traces)


def load_manifest(path: str | Path) -> tuple[WorkloadRecord, ...]:
    """Load every (config, trace) pair named by a manifest file.

    Paths inside the manifest resolve relative to the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    records: list[WorkloadRecord] = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read manifest ({exc})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["config", "trace"]:
            raise ConfigError(
                f"{path}: manifest must start with header 'config,trace'"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(
                    f"{path}: line {reader.line_num}: expected 2 fields"
                )
            config_rel, trace_rel = (f.strip() for f in row)
            records.append(
                load_workload(base / config_rel, base / trace_rel)
            )
    if not records:
        raise ConfigError(f"{path}: manifest lists no workloads")
    return tuple(records)


def load_and_assemble(
    manifest_path: str | Path,
) -> tuple[tuple[WorkloadRecord, ...], RegressionDataset]:
    """Manifest -> compute-tagged records -> regression dataset."""
    records = tuple(with_compute(r) for r in load_manifest(manifest_path))
    return records, assemble_dataset(records)


def load_exclusions(path: str | Path) -> tuple[tuple[str, str], ...]:
    """Read an exclusion policy file: CSV of workload_id,reason rows."""
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
            "workload_id", "reason",
        ]:
            raise ConfigError(
                f"{path}: exclusion file must start with header "
                "'workload_id,reason'"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(
                    f"{path}: line {reader.line_num}: expected 2 fields"
                )
            pairs.append((row[0].strip(), row[1].strip()))
    return tuple(pairs)
