"""
一维求根 (Root Finding)
单调谓词二分 (定位第一个零点出现的 λ) 与 scipy 的 Brent 法 (端点异号时收敛到根)，
供径向打靶与分裂半径搜索使用。
"""
from typing import Callable, Tuple

from scipy.optimize import brentq

from core.exceptions import OracleError


def bisect_predicate(pred: Callable[[float], bool], lo: float, hi: float,
                     rtol: float, max_iter: int = 200) -> Tuple[float, float]:
    """
    对单调谓词二分：要求 pred(lo) 为假、pred(hi) 为真，
    区间相对宽度小于 rtol 时返回 (lo, hi)。
    """
    for _ in range(max_iter):
        if hi - lo <= rtol * abs(hi):
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def bracketed_root(f: Callable[[float], float], a: float, b: float,
                   xtol: float = 2e-12, max_iter: int = 200) -> float:
    """
    在 [a, b] 上用 brentq 求 f 的根。

    Raises:
        OracleError: 端点未括住根或迭代不收敛。
    """
    try:
        return brentq(f, a, b, xtol=xtol, maxiter=max_iter)
    except (ValueError, RuntimeError) as e:
        raise OracleError(f"区间 [{a}, {b}] 上求根失败: {e}") from e
