"""
自定义异常类
用于在几何、网格、求解器、径向打靶与实验各层之间传递具有明确语义的错误信息。
"""


class EccentraError(Exception):
    """所有数值实验室异常的基类"""
    pass


class GeometryError(EccentraError, ValueError):
    """圆环参数非法、坐标维度不匹配或镜像法向为零"""
    pass


class MeshError(EccentraError, ValueError):
    """网格非法 (InvalidMesh)：计数不合法、偏心超出包含区间、拓扑损坏或三角形退化"""
    pass


class SolverError(EccentraError, ValueError):
    """Rayleigh 商分母为零，或标量场与网格不匹配"""
    pass


class NonConvergedError(EccentraError):
    """
    特征对求解未收敛。
    部分结果通过 result 属性携带，调用方可以决定是否继续使用。
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class OracleError(EccentraError, ValueError):
    """径向打靶失败：λ_max 以下找不到区间、积分溢出或分裂半径无法括住"""
    pass


class ShapeDerivativeError(EccentraError, ValueError):
    """形状导数计算失败：输入未收敛、边界边缺少相邻三角形或差分步长越界"""
    pass


class ConfigurationError(EccentraError, ValueError):
    """当应用配置或命令行参数不正确或缺失时发生错误"""
    pass
