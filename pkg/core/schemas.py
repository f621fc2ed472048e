"""
业务对象定义 (Schemas)
定义几何、网格、求解器、径向打靶与实验各层之间传递的强类型数据结构，确保数据流透明且可预测。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace
from typing import Optional, List, Dict, Any, Tuple

import numpy as np

from core.exceptions import GeometryError, MeshError, NonConvergedError, ConfigurationError

# 边界环标签
INNER = 0
OUTER = 1
TAG_NAMES = {INNER: "inner", OUTER: "outer"}


def parse_tag(tag) -> int:
    """把 "inner"/"outer" 或 0/1 统一成整数标签"""
    if isinstance(tag, str):
        lookup = {v: k for k, v in TAG_NAMES.items()}
        if tag not in lookup:
            raise MeshError(f"未知的边界标签: {tag}")
        return lookup[tag]
    if tag not in TAG_NAMES:
        raise MeshError(f"未知的边界标签: {tag}")
    return int(tag)


def _coerce_fields(obj, kinds: Dict[str, type], error: type):
    """
    把配置文件读入的数值字段转成 float / int (YAML 1.1 会把 1.0e8 之类读成字符串)。
    frozen dataclass 通过 object.__setattr__ 写回。
    """
    for name, kind in kinds.items():
        value = getattr(obj, name)
        if value is None or (isinstance(value, kind) and not isinstance(value, bool)):
            continue
        try:
            object.__setattr__(obj, name, kind(float(value)) if kind is int else kind(value))
        except (TypeError, ValueError):
            raise error(f"字段 {name} 需要数值，实际为 {value!r}")


@dataclass(frozen=True)
class AnnulusSpec:
    """
    偏心圆环 Ω_s = B_{R1}(0) \\ closure(B_{R0}(s·e1)) 的几何描述。
    仅几何运算允许任意 s ≥ 0；网格相关路径要求内球严格包含 (s < R1 − R0)。
    """
    R1: float
    R0: float
    s: float = 0.0
    dim: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.R1) and math.isfinite(self.R0) and math.isfinite(self.s)):
            raise GeometryError(f"圆环参数必须为有限数: R1={self.R1}, R0={self.R0}, s={self.s}")
        if not (0.0 < self.R0 < self.R1):
            raise GeometryError(f"需要 0 < R0 < R1，实际 R0={self.R0}, R1={self.R1}")
        if self.s < 0.0:
            raise GeometryError(f"偏心距 s 必须非负，实际 s={self.s}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise GeometryError(f"空间维数必须是 ≥ 2 的整数，实际 dim={self.dim}")

    @property
    def gap(self) -> float:
        """同心情形下的环宽 R1 − R0"""
        return self.R1 - self.R0

    def with_offset(self, s: float) -> "AnnulusSpec":
        return replace(self, s=float(s))

    def is_contained(self, margin: float = 0.0) -> bool:
        """内球是否严格包含在外球内 (留出 margin·R1 的安全距离)"""
        return self.s <= self.R1 - self.R0 - margin * self.R1 and self.s < self.R1 - self.R0


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    二维偏心圆环的结构化三角网格。
    顶点编号 k = i·n_angular + j，i 为径向层 (0 为内环, n_radial 为外环)，j 为角向序号。
    生成后不可变，可在线程/进程间安全共享。
    """
    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (T, 3)，逆时针
    boundary_edges: np.ndarray    # (B, 2)
    boundary_tags: np.ndarray     # (B,)，INNER / OUTER
    n_radial: int
    n_angular: int
    spec: AnnulusSpec

    @property
    def params(self) -> Tuple[int, int]:
        return (self.n_radial, self.n_angular)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def boundary_mask(self) -> np.ndarray:
        """布尔数组：顶点是否位于内环或外环上"""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask())


@dataclass(eq=False)
class ScalarField:
    """网格顶点上的标量场 (分片线性插值的节点值)"""
    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise MeshError(
                f"标量场长度 {self.values.shape} 与网格顶点数 {self.mesh.n_vertices} 不一致"
            )

    def satisfies_dirichlet(self) -> bool:
        """边界顶点上取值是否严格为 0"""
        return bool(np.all(self.values[self.mesh.boundary_mask()] == 0.0))


@dataclass(frozen=True)
class SolverConfig:
    """p-Laplace 第一特征对求解参数"""
    p: float = 2.0
    epsilon: Optional[float] = None     # None 表示使用 epsilon_scale / R1
    epsilon_scale: float = 1.0e-8
    max_iter: int = 50_000
    tol: float = 1.0e-10
    step_shrink: float = 0.5
    min_step_ratio: float = 1.0e-14
    metric_refresh: int = 1
    initial: str = "tent"

    def __post_init__(self):
        _coerce_fields(self, {"p": float, "epsilon": float, "epsilon_scale": float, "max_iter": int, "tol": float,
                              "step_shrink": float, "min_step_ratio": float, "metric_refresh": int}, ConfigurationError)
        if not self.p > 1.0:
            raise ConfigurationError(f"指数 p 必须大于 1，实际 p={self.p}")
        if not self.tol > 0.0:
            raise ConfigurationError(f"tol 必须为正，实际 tol={self.tol}")
        if not (0.0 < self.step_shrink < 1.0):
            raise ConfigurationError(f"step_shrink 必须位于 (0,1)，实际 {self.step_shrink}")
        if self.max_iter < 1 or self.metric_refresh < 1:
            raise ConfigurationError("max_iter 与 metric_refresh 必须为正整数")
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ConfigurationError(f"epsilon 必须非负，实际 {self.epsilon}")
        if self.initial not in ("tent", "ones"):
            raise ConfigurationError(f"未知的初值类型: {self.initial}")

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]] = None, **overrides) -> "SolverConfig":
        """从 default.yaml 的 solver 段构造，overrides 中非 None 的值优先"""
        known = {f for f in cls.__dataclass_fields__}
        params = {k: v for k, v in (section or {}).items() if k in known}
        params.update({k: v for k, v in overrides.items() if v is not None and k in known})
        return cls(**params)

    def regularization(self, R1: float) -> float:
        return self.epsilon if self.epsilon is not None else self.epsilon_scale / R1

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class EigenResult:
    """
    第一特征对的求解结果。
    field 在离散 p-范数下归一化 (‖u‖_p = 1)，内部顶点上取正值。
    """
    lam: float
    field: ScalarField
    iterations: int
    residual: float
    converged: bool
    config: SolverConfig
    history: List[float] = field(default_factory=list)

    @property
    def mesh(self) -> Mesh:
        return self.field.mesh

    def raise_if_not_converged(self) -> "EigenResult":
        if not self.converged:
            raise NonConvergedError(
                f"特征对未收敛: iterations={self.iterations}, residual={self.residual:.3e}", result=self
            )
        return self


@dataclass(frozen=True, eq=False)
class BoundaryFlux:
    """某一条标记边界环上逐边的法向导数采样"""
    tag: int
    lengths: np.ndarray       # (E,)
    normals: np.ndarray       # (E, 2)，Ω_s 的外法向 (内环上指向内球)
    dudn: np.ndarray          # (E,)
    midpoints: np.ndarray     # (E, 2)

    @property
    def n1(self) -> np.ndarray:
        return self.normals[:, 0]


@dataclass(frozen=True)
class RadialProblem:
    """
    径向 p-Laplace 第一 Dirichlet 特征值问题。
    kind="annulus" 时区间为 [R0, R1]；kind="ball" 时区间为 [0, R1] (R0 为 None)。
    """
    kind: str
    R1: float
    p: float
    dim: int = 2
    R0: Optional[float] = None
    tol: float = 1.0e-10
    steps: int = 20_000
    lambda_max: float = 1.0e8
    start_offset: float = 1.0e-8

    def __post_init__(self):
        _coerce_fields(self, {"R1": float, "p": float, "R0": float, "tol": float, "steps": int,
                              "lambda_max": float, "start_offset": float}, GeometryError)
        if self.kind not in ("annulus", "ball"):
            raise GeometryError(f"未知的径向区域类型: {self.kind}")
        if not self.R1 > 0.0:
            raise GeometryError(f"半径必须为正，实际 R1={self.R1}")
        if self.kind == "annulus" and (self.R0 is None or not (0.0 < self.R0 < self.R1)):
            raise GeometryError(f"圆环需要 0 < R0 < R1，实际 R0={self.R0}, R1={self.R1}")
        if not self.p > 1.0:
            raise GeometryError(f"指数 p 必须大于 1，实际 p={self.p}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise GeometryError(f"空间维数必须是 ≥ 2 的整数，实际 dim={self.dim}")
        if self.steps < 10:
            raise GeometryError(f"积分步数过少: {self.steps}")

    @classmethod
    def annulus(cls, R0: float, R1: float, p: float, dim: int = 2, **kwargs) -> "RadialProblem":
        return cls(kind="annulus", R0=R0, R1=R1, p=p, dim=dim, **kwargs)

    @classmethod
    def ball(cls, R: float, p: float, dim: int = 2, **kwargs) -> "RadialProblem":
        return cls(kind="ball", R1=R, p=p, dim=dim, **kwargs)

    @property
    def start(self) -> float:
        return self.R0 if self.kind == "annulus" else self.start_offset * self.R1


@dataclass
class SweepRow:
    """扫描表中的一行：某个偏心距 s 的求解结果与导数估计"""
    s: float
    lam: float
    dlambda_inner: Optional[float] = None
    dlambda_outer: Optional[float] = None
    dlambda_fd: Optional[float] = None
    iterations: int = 0
    converged: bool = False
    symmetry: Optional[float] = None


@dataclass
class SweepTable:
    """
    s ↦ λ1(s) 的有序记录。
    verdict 为 None 表示存在未收敛的行 (判定被污染)，不静默丢弃。
    """
    rows: List[SweepRow]
    metadata: Dict[str, Any]
    config_string: str = ""
    config_hash: str = ""
    verdict: Optional[bool] = None
    failures: List[str] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)


@dataclass
class LimitCell:
    """极限实验中单个 (p, s) 格点"""
    p: float
    s: float
    lam: float
    target: float
    iterations: int
    converged: bool

    @property
    def lambda_root(self) -> float:
        return self.lam ** (1.0 / self.p)


@dataclass
class LimitReport:
    """p→∞ 或 p→1 极限实验报告"""
    kind: str
    cells: List[LimitCell]
    verdict: Optional[bool]
    checks: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)


@dataclass
class FucikReport:
    """Fučik 节点分裂机制检验报告"""
    R1: float
    p: float
    s_shift: float
    split_radius: float
    lambda_level: float                 # 分裂半径处内侧 (球或圆环) 的径向第一特征值，即候选函数所在能级
    lambda_out_oracle: float
    lambda_out_0: float
    lambda_out_s: float
    verdict: Optional[bool]
    R0: Optional[float] = None
    lambda_in_0: Optional[float] = None
    lambda_in_s: Optional[float] = None
    converged: bool = True
    note: str = ""
    failures: List[str] = field(default_factory=list)


@dataclass
class RunConfig:
    """命令行运行配置 (解析后、计算前已完成校验)"""
    subcommand: str
    R1: float = 1.0
    R0: Optional[float] = None
    s_values: List[float] = field(default_factory=lambda: [0.0])
    p_values: List[float] = field(default_factory=lambda: [2.0])
    n_radial: int = 32
    n_angular: int = 128
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    epsilon: Optional[float] = None
    initial: Optional[str] = None
    output: Optional[str] = None
    emit_mesh: Optional[str] = None
    jobs: int = 1
    with_fd: bool = False
    ds: Optional[float] = None
    s_shift: float = 0.05
    db: Optional[str] = None

    @property
    def resolution(self) -> Tuple[int, int]:
        return (self.n_radial, self.n_angular)

    def to_dict(self):
        return asdict(self)


@dataclass
class StepOutcome:
    """工作流一步的输出：CSV 表头与行、判定以及对应的退出码"""
    header: Tuple[str, ...]
    rows: List[list]
    verdict: Optional[bool] = None
    exit_code: int = 0
    failures: List[str] = field(default_factory=list)
