"""
SQLite 运行存档 (SQL Store)
--db 指定的数据库文件中记录每次运行的配置、判定与结果行。存档不影响 CSV 输出。
"""
import os
import logging
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, Session

from core.models import Base, RunRecord, RowRecord
from infra.utils.export import format_value

logger = logging.getLogger(__name__)


@lru_cache(maxsize=5)
def get_engine(db_path: str):
    """
    获取指定数据库文件的引擎 (带缓存)，首次使用时自动建表。
    """
    parent = os.path.dirname(os.path.abspath(db_path))
    os.makedirs(parent, exist_ok=True)
    engine = create_engine(f"sqlite:///{os.path.abspath(db_path)}")
    Base.metadata.create_all(engine)
    return engine


def get_session(db_path: str) -> Session:
    """获取一个新的数据库会话"""
    SessionLocal = sessionmaker(bind=get_engine(db_path))
    return SessionLocal()


def archive_run(db_path: str, subcommand: str, config_string: str, config_hash: str,
                header: Sequence[str], rows: Iterable[Sequence], verdict: Optional[bool],
                exit_code: int) -> Optional[int]:
    """保存一次运行及其全部结果行，返回运行编号；失败时记录日志并返回 None"""
    session = get_session(db_path)
    try:
        run = RunRecord(
            subcommand=subcommand,
            config_string=config_string,
            config_hash=config_hash,
            verdict=verdict,
            exit_code=exit_code,
            header=",".join(header),
        )
        for k, row in enumerate(rows):
            run.rows.append(RowRecord(position=k, cells=",".join(format_value(v) for v in row)))
        session.add(run)
        session.commit()
        logger.info(f"运行已存档: {db_path} (id={run.id}, {len(run.rows)} 行)")
        return run.id
    except Exception as e:
        session.rollback()
        logger.error(f"存档运行失败 {db_path}: {e}", exc_info=True)
        return None
    finally:
        session.close()


def find_runs(db_path: str, config_hash: str) -> List[dict]:
    """按配置摘要查询历史运行，按编号升序"""
    session = get_session(db_path)
    try:
        runs = session.query(RunRecord).filter_by(config_hash=config_hash).order_by(RunRecord.id).all()
        return [
            {
                "id": r.id,
                "subcommand": r.subcommand,
                "verdict": r.verdict,
                "exit_code": r.exit_code,
                "header": r.header,
                "rows": [row.cells for row in r.rows],
            } for r in runs
        ]
    finally:
        session.close()
