"""
FEM Package
分片线性协调元的梯度、质量与刚度组装。
"""
