"""
Storage Package
运行存档 (SQLite)。
"""
