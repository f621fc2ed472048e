"""
结果导出 (Export)
CSV 报表与网格文本转储。浮点数统一以 17 位有效数字输出，布尔值输出 true/false，缺失值留空，
保证同一次运行的输出逐字节可复现。
"""
import io
import logging
import os
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from core.schemas import Mesh, SweepRow

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("s", "lambda", "dlambda_inner", "dlambda_outer", "dlambda_fd", "iterations", "converged")


def format_value(value) -> str:
    """单元格格式化：None → 空，bool → true/false，浮点 → 17 位有效数字"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def sweep_row_cells(row: SweepRow) -> list:
    return [row.s, row.lam, row.dlambda_inner, row.dlambda_outer, row.dlambda_fd, row.iterations, row.converged]


def render_csv(header: Sequence[str], rows: Iterable[Sequence], config_string: str = "") -> str:
    """生成完整的 CSV 文本，首行为 `# config: <规范配置串>`"""
    buf = io.StringIO()
    if config_string:
        buf.write(f"# config: {config_string}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(header: Sequence[str], rows: Iterable[Sequence], config_string: str = "",
              path: Optional[str] = None, stream: Optional[TextIO] = None) -> str:
    """写入 path (换行固定为 \\n)，或在未给出 path 时写入 stream；返回写出的文本"""
    text = render_csv(header, rows, config_string)
    if path:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info(f"CSV 已写入 {path}")
    elif stream is not None:
        stream.write(text)
        stream.flush()
    return text


def dump_mesh(mesh: Mesh, path: str):
    """
    纯文本网格转储：首行 "V T B"，随后 V 行 "x y"、T 行 "i j k" (0 起始)、
    B 行 "i j tag" (tag: 0=inner, 1=outer)。
    """
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {mesh.boundary_edges.shape[0]}"]
    lines += [f"{format_value(x)} {format_value(y)}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"{i} {j} {tag}" for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags)]
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"网格已转储到 {path} (V={mesh.n_vertices}, T={mesh.n_triangles})")
