"""Hardware-efficient PQC families: base1 (cx chain), base2 (ALA groups) and crosstalk-scheduled layers."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .circuit import Circuit, GateInstance, barrier, cx, ry, rz
from .device import DeviceModel, MappingError
from .scheduler import OMEGA_PRESETS, Schedule, ala_groups, xtalk_schedule

FAMILIES = ("base1", "base2", "xtalk")
MAX_BASE_LAYERS = 5


@dataclass(frozen=True)
class PqcConfig:
    family: str
    n: int
    L: int
    device: DeviceModel
    level: str = "medium"
    m: int = 2
    threshold: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 1 or self.L < 0:
            raise ValueError("need n >= 1 and L >= 0")
        if self.n > self.device.num_qubits:
            raise MappingError(f"{self.n} qubits requested on a {self.device.num_qubits}-qubit device")
        if self.family == "xtalk":
            if self.level not in OMEGA_PRESETS:
                raise ValueError(f"unknown level {self.level!r}; choose from {tuple(OMEGA_PRESETS)}")
            if not 0 <= self.m <= min(self.L, MAX_BASE_LAYERS):
                raise ValueError(f"m must lie in [0, min(L, {MAX_BASE_LAYERS})], got {self.m}")

    @property
    def omega(self) -> float:
        return OMEGA_PRESETS[self.level]

    @property
    def name(self) -> str:
        return f"{self.level}_xtalk" if self.family == "xtalk" else self.family


def _rotations(n: int, slot: int) -> list[GateInstance]:
    ops = []
    for q in range(n):
        ops += [ry(q, slot), rz(q, slot + 1)]
        slot += 2
    return ops


def _chain(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def _assemble(n: int, L: int, path, entanglers, **meta) -> Circuit:
    """Rotation layer + entangler block per layer, then a closing rotation layer."""
    ops: list[GateInstance] = []
    slot = 0
    for layer in range(L):
        ops += _rotations(n, slot)
        slot += 2 * n
        ops += entanglers(layer)
    ops += _rotations(n, slot)
    return Circuit.from_ops(n, ops, layout=tuple(path), **meta)


def build_base1(n: int, L: int, device: DeviceModel) -> Circuit:
    path = device.coupling.find_path(n)
    block = [cx(a, b) for a, b in _chain(n)]
    return _assemble(n, L, path, lambda _: block, family="base1", R=max(n - 1, 0))


def _grouped(groups: list[list[tuple[int, int]]], n: int) -> list[GateInstance]:
    ops: list[GateInstance] = []
    for k, group in enumerate(groups):
        if k:
            ops.append(barrier(*range(n)))
        ops += [cx(a, b) for a, b in group]
    return ops


def build_base2(n: int, L: int, device: DeviceModel) -> Circuit:
    path = device.coupling.find_path(n)
    chain = _chain(n)
    groups = [[chain[i] for i in g] for g in ala_groups(chain)]
    block = _grouped(groups, n)
    return _assemble(n, L, path, lambda _: block, family="base2", R=len(groups))


@lru_cache(maxsize=256)
def _cached_schedule(device: DeviceModel, path: tuple[int, ...], omega: float, threshold: float) -> Schedule:
    chain = _chain(len(path))
    ala = [chain[i] for g in ala_groups(chain) for i in g]
    return xtalk_schedule([(path[a], path[b]) for a, b in ala], device, omega, threshold=threshold, greedy_fallback=True)


def layer_schedule(cfg: PqcConfig) -> Schedule:
    """Scheduled sub-layers of the approximated entangling layer (device edges)."""
    path = tuple(cfg.device.coupling.find_path(cfg.n))
    return _cached_schedule(cfg.device, path, cfg.omega, cfg.threshold)


def build_xtalk(cfg: PqcConfig) -> Circuit:
    n, L = cfg.n, cfg.L
    path = cfg.device.coupling.find_path(n)
    local = {q: i for i, q in enumerate(path)}
    sched = layer_schedule(cfg) if n > 1 else None
    base = [cx(a, b) for a, b in _chain(n)]
    if sched is None:
        sub = []
        groups: list[list[tuple[int, int]]] = []
    else:
        groups = [[(local[a], local[b]) for a, b in layer] for layer in sched.sublayer_edges()]
        sub = _grouped(groups, n)
    return _assemble(
        n,
        L,
        path,
        lambda layer: base if layer < cfg.m else sub,
        family="xtalk",
        level=cfg.level,
        m=cfg.m,
        R=len(groups),
        omega=cfg.omega,
    )


def build(cfg: PqcConfig) -> Circuit:
    if cfg.family == "base1":
        return build_base1(cfg.n, cfg.L, cfg.device)
    if cfg.family == "base2":
        return build_base2(cfg.n, cfg.L, cfg.device)
    return build_xtalk(cfg)


def family_configs(n: int, L: int, device: DeviceModel, m: int = 2) -> dict[str, PqcConfig]:
    """The five families at equal (n, L)."""
    m = min(m, L, MAX_BASE_LAYERS)
    out = {f: PqcConfig(f, n, L, device) for f in ("base1", "base2")}
    for level in OMEGA_PRESETS:
        cfg = PqcConfig("xtalk", n, L, device, level, m)
        out[cfg.name] = cfg
    return out
