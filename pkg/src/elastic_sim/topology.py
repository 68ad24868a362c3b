"""Model geometry, device inventory and parallel configurations.

The simulator models one aggregate expert layer and one aggregate attention
shard per device; layer count can be folded into the byte sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

GB = 1_000_000_000
MB = 1_000_000

# Devices are plain integer ids, unique within a ClusterSpec.
DeviceId = int


class ConfigError(ValueError):
    """Raised when a spec object violates its construction invariants."""


@dataclass(frozen=True)
class ModelSpec:
    """Byte-level geometry of one MoE model."""

    name: str
    num_experts_total: int
    experts_active_per_token: int
    bytes_per_expert: int
    attention_shard_bytes: int
    kv_bytes_per_token: int
    pages_per_expert: int = 1

    def __post_init__(self):
        problems = []
        for f in ("num_experts_total", "experts_active_per_token", "bytes_per_expert",
                  "attention_shard_bytes", "kv_bytes_per_token", "pages_per_expert"):
            if getattr(self, f) <= 0:
                problems.append(f"{f} must be > 0")
        if self.experts_active_per_token > self.num_experts_total:
            problems.append("experts_active_per_token exceeds num_experts_total")
        if self.bytes_per_expert % self.pages_per_expert != 0:
            problems.append("bytes_per_expert not divisible by pages_per_expert")
        if problems:
            raise ConfigError(f"ModelSpec {self.name!r}: " + "; ".join(problems))

    @property
    def page_size(self) -> int:
        return self.bytes_per_expert // self.pages_per_expert


@dataclass(frozen=True)
class ClusterSpec:
    """Device inventory plus the cost constants of the memory/transfer fabric."""

    devices: tuple[DeviceId, ...]
    hbm_bytes_per_device: int = 64 * GB
    disk_bandwidth: float = 1.0 * GB          # bytes/s
    p2p_bandwidth: float = 16.0 * GB          # bytes/s
    p2p_latency: float = 0.001                # s per transfer
    zero_copy_cost: float = 0.01              # s per attach
    page_map_cost: float = 0.001              # s per page remap
    enforce_fast_p2p: bool = True

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if len(set(self.devices)) != len(self.devices):
            raise ConfigError("duplicate device ids in cluster")
        for f in ("hbm_bytes_per_device", "disk_bandwidth", "p2p_bandwidth"):
            if getattr(self, f) <= 0:
                raise ConfigError(f"{f} must be > 0")
        if self.enforce_fast_p2p and self.p2p_bandwidth < 10 * self.disk_bandwidth:
            raise ConfigError("p2p_bandwidth below 10x disk_bandwidth "
                              "(pass enforce_fast_p2p=False to allow)")

    def extended(self, new_devices: tuple[DeviceId, ...]) -> "ClusterSpec":
        return replace(self, devices=self.devices + tuple(new_devices))


@dataclass(frozen=True)
class ParallelConfig:
    """A DP/TP/EP placement over an ordered device list.

    device_set is grouped by replica: devices[r*tp : (r+1)*tp] form DP
    replica r, and a device's position within its replica is its TP rank.
    """

    dp: int
    tp: int
    ep: int
    device_set: tuple[DeviceId, ...]

    def __post_init__(self):
        object.__setattr__(self, "device_set", tuple(self.device_set))

    def tp_rank_of(self, device: DeviceId) -> int:
        return self.device_set.index(device) % self.tp

    def replica_of(self, device: DeviceId) -> int:
        return self.device_set.index(device) // self.tp

    def key(self) -> tuple:
        return (self.dp, self.tp, self.ep, self.device_set)

    def describe(self) -> str:
        return f"DP{self.dp}-TP{self.tp}-EP{self.ep}"


@dataclass
class ExpertPlacement:
    """expert_id -> device, balanced over the config's EP ranks."""

    assignment: dict[int, DeviceId] = field(default_factory=dict)

    def device_of(self, expert_id: int) -> DeviceId:
        return self.assignment[expert_id]

    def experts_on(self, device: DeviceId) -> list[int]:
        return sorted(e for e, d in self.assignment.items() if d == device)

    def counts(self) -> dict[DeviceId, int]:
        out: dict[DeviceId, int] = {}
        for d in self.assignment.values():
            out[d] = out.get(d, 0) + 1
        return out

    def is_balanced_for(self, cfg: ParallelConfig, num_experts: int) -> bool:
        if sorted(self.assignment.keys()) != list(range(num_experts)):
            return False
        quota = balanced_quota(num_experts, cfg.ep)
        counts = self.counts()
        return all(counts.get(dev, 0) == quota[i] for i, dev in enumerate(cfg.device_set))


def balanced_quota(num_experts: int, ep: int) -> list[int]:
    """Per-rank expert counts: sum to E, max-min <= 1, surplus to earlier ranks."""
    if ep < 1:
        raise ConfigError("ep must be >= 1")
    base, extra = divmod(num_experts, ep)
    return [base + 1 if r < extra else base for r in range(ep)]


def initial_placement(model: ModelSpec, cfg: ParallelConfig) -> ExpertPlacement:
    """Experts assigned in id order: rank r holds a contiguous id block."""
    quota = balanced_quota(model.num_experts_total, cfg.ep)
    assignment: dict[int, DeviceId] = {}
    next_id = 0
    for rank, dev in enumerate(cfg.device_set):
        for _ in range(quota[rank]):
            assignment[next_id] = dev
            next_id += 1
    return ExpertPlacement(assignment)


def weights_per_device(model: ModelSpec, cfg: ParallelConfig) -> int:
    """Worst-case per-device weight bytes: attention shard + largest expert quota."""
    return model.attention_shard_bytes + math.ceil(model.num_experts_total / cfg.ep) * model.bytes_per_expert


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def raise_if_invalid(self):
        if not self.ok:
            raise ConfigError("; ".join(self.violations))


def validate_config(cfg: ParallelConfig, cluster: ClusterSpec, model: ModelSpec) -> ValidationReport:
    violations = []
    if cfg.dp < 1 or cfg.tp < 1 or cfg.ep < 1:
        violations.append("dp, tp, ep must all be >= 1")
    if cfg.ep != cfg.dp * cfg.tp:
        violations.append(f"ep ({cfg.ep}) != dp*tp ({cfg.dp * cfg.tp})")
    if len(cfg.device_set) != cfg.dp * cfg.tp:
        violations.append(f"device_set size {len(cfg.device_set)} != dp*tp {cfg.dp * cfg.tp}")
    if len(set(cfg.device_set)) != len(cfg.device_set):
        violations.append("device_set contains duplicates")
    missing = [d for d in cfg.device_set if d not in cluster.devices]
    if missing:
        violations.append(f"devices not in cluster: {missing}")
    if not violations and weights_per_device(model, cfg) > cluster.hbm_bytes_per_device:
        violations.append("per-device weights exceed hbm_bytes_per_device")
    return ValidationReport(ok=not violations, violations=violations)


# Shipped model presets; byte sizes are desk-scale calibration defaults and can
# be overridden from scenario files.
MODEL_PRESETS: dict[str, dict] = {
    "deepseek-v2-lite": dict(num_experts_total=64, experts_active_per_token=6,
                             bytes_per_expert=100 * MB, attention_shard_bytes=2 * GB,
                             kv_bytes_per_token=2 * MB),
    "qwen3-30b-a3b": dict(num_experts_total=128, experts_active_per_token=8,
                          bytes_per_expert=80 * MB, attention_shard_bytes=3 * GB,
                          kv_bytes_per_token=2 * MB),
    "deepseek-v3": dict(num_experts_total=256, experts_active_per_token=8,
                        bytes_per_expert=250 * MB, attention_shard_bytes=4 * GB,
                        kv_bytes_per_token=2 * MB),
}


def model_preset(name: str, **overrides) -> ModelSpec:
    if name not in MODEL_PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; have {sorted(MODEL_PRESETS)}")
    params = dict(MODEL_PRESETS[name])
    params.update(overrides)
    return ModelSpec(name=name, **params)
