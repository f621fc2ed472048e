"""
Mesh Package
二维偏心圆环的结构化网格生成、加密与拓扑校验。
"""
