"""
Radial Package
同心圆环与球上径向 p-Laplace 特征值的打靶求解 (二维求解器的独立参照)。
"""
