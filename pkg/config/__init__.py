"""
配置中心
统一加载 default.yaml 与可选的 user_config.yaml。
"""
from .loader import load_config, get_section, activate_config
