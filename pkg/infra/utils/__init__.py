"""
Utils Package
CSV 结果输出与网格导出。
"""
