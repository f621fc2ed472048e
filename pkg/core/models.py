"""
存档数据模型 (Data Models)
定义可选 SQLite 运行存档 (--db) 中的表结构。
"""
from sqlalchemy import Column, Integer, String, Text, Boolean, ForeignKey
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class RunRecord(Base):
    """
    运行记录表
    每次 CLI 调用一行：子命令、规范配置串及其摘要、判定与退出码。
    """
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    subcommand = Column(String, nullable=False)
    config_string = Column(Text, nullable=False)
    config_hash = Column(String(64), index=True, nullable=False)
    verdict = Column(Boolean, nullable=True)  # None: 未作判定
    exit_code = Column(Integer, nullable=False)
    header = Column(Text, nullable=False)  # CSV 表头 (逗号分隔)

    rows = relationship("RowRecord", back_populates="run", order_by="RowRecord.position",
                        cascade="all, delete-orphan")


class RowRecord(Base):
    """
    结果行表
    存放与 CSV 完全相同的格式化单元格 (逗号分隔)，保证与文件输出一致。
    """
    __tablename__ = 'rows'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    position = Column(Integer, nullable=False)
    cells = Column(Text, nullable=False)

    run = relationship("RunRecord", back_populates="rows")
