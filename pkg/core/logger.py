import logging
import logging.handlers
import os
import sys
from typing import Optional

# 默认日志文件路径
LOG_DIR = "logs"
LOG_FILE = os.path.join(LOG_DIR, "eccentra.log")

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


def setup_logging(level: str = "INFO", log_file: Optional[str] = LOG_FILE):
    """
    设置应用程序的日志。
    日志输出到标准错误 (标准输出保留给 CSV) 和可选的滚动文件，使用普通文本格式。
    log_file 为 None 或空字符串时只输出到控制台。
    """
    formatter = logging.Formatter(LOG_FORMAT)

    # 移除所有现有的handler，避免重复日志输出
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

    logging.root.setLevel(str(level).upper())

    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        logging.root.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logging.root.addHandler(console_handler)

    # 捕获警告 (例如 numpy 的 RuntimeWarning)
    logging.captureWarnings(True)


if __name__ == '__main__':
    setup_logging(log_file=None)
    logging.info("日志系统在独立运行时初始化完成。")
