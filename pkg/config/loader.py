import yaml
import os
import logging
from typing import Optional

from core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
CONFIG_PATH = os.path.join(CONFIG_DIR, "default.yaml")
USER_CONFIG_PATH = os.path.join(CONFIG_DIR, "user_config.yaml")

SECTIONS = ("solver", "mesh", "radial", "experiments", "logging", "cli")


def _merge_configs(base_config: dict, user_config: dict) -> dict:
    """
    合并基础配置和用户配置。
    用户配置中每个段 (solver, mesh, radial, ...) 的键会覆盖或扩展基础配置的同名段。
    """
    merged_config = {k: dict(v or {}) for k, v in base_config.items()}

    for section, values in user_config.items():
        if section not in SECTIONS:
            logger.warning(f"忽略未知的配置段: {section}")
            continue
        if not isinstance(values, dict):
            raise ConfigurationError(f"配置段 '{section}' 必须是映射，实际为 {type(values).__name__}")
        merged_config[section] = merged_config.get(section, {})
        merged_config[section].update(values)

    return merged_config


def _read_yaml(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        return data if data else {}
    except yaml.YAMLError as e:
        logger.error(f"解析 {path} 文件失败: {e}", exc_info=True)
        raise ConfigurationError(f"错误: 解析 {path} 文件失败: {e}")


def load_user_config(path: str = USER_CONFIG_PATH) -> dict:
    """
    加载并解析 user_config.yaml 文件，不存在时返回空字典。
    """
    if not os.path.exists(path):
        return {}
    return _read_yaml(path)


def load_config(path: Optional[str] = None) -> dict:
    """
    加载并解析 default.yaml (或 path 指定的文件) 与 user_config.yaml，并进行合并。
    """
    base_path = path or CONFIG_PATH
    if not os.path.exists(base_path):
        if path:
            raise ConfigurationError(f"配置文件 {path} 不存在")
        logger.warning(f"配置文件 {base_path} 未找到，返回默认空配置。")
        base_config = {}
    else:
        base_config = _read_yaml(base_path)

    base_config = {section: base_config.get(section) or {} for section in SECTIONS}
    return _merge_configs(base_config, load_user_config())


def get_section(name: str, config: Optional[dict] = None) -> dict:
    """取出某个配置段 (缺省为空字典)"""
    source = CONFIG if config is None else config
    return dict(source.get(name, {}))


CONFIG = load_config()


def activate_config(config: dict) -> dict:
    """替换进程内的全局配置 (--config 指定的文件在计算开始前生效)"""
    global CONFIG
    CONFIG = config
    return CONFIG
