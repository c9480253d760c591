"""create run_records and ground_truth_batches tables

Revision ID: 5b1e0c7a9d42
Revises:
Create Date: 2026-10-19 10:30:12.418203

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '5b1e0c7a9d42'
down_revision: Union[str, Sequence[str], None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    """Upgrade schema."""
    # ### commands auto generated by Alembic - please adjust! ###
    op.create_table('run_records',
    sa.Column('experiment', sa.String(length=100), nullable=False, comment='실험 이름'),
    sa.Column('cell_id', sa.String(length=200), nullable=False, comment='스윕 셀 식별자'),
    sa.Column('algorithm', sa.String(length=20), nullable=False, comment='알고리즘 이름'),
    sa.Column('budget', sa.Integer(), nullable=False, comment='점수 평가당 질의 예산'),
    sa.Column('sweep_value', sa.Float(), nullable=True, comment='반경/차원 스윕 값'),
    sa.Column('seed', sa.Integer(), nullable=False, comment='셀 시드'),
    sa.Column('status', sa.String(length=20), nullable=False, comment='ok 또는 failed'),
    sa.Column('error', sa.Text(), nullable=True, comment='실패 사유'),
    sa.Column('ledger_total', sa.Integer(), nullable=False, comment='전체 0차 질의 수'),
    sa.Column('metrics', sa.JSON(), nullable=True, comment='지표 보고서'),
    sa.Column('samples_path', sa.String(length=500), nullable=True, comment='표본 CSV 경로'),
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('created_at', sa.DateTime(timezone=True), nullable=False),
    sa.Column('updated_at', sa.DateTime(timezone=True), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_run_records_experiment'), 'run_records', ['experiment'], unique=False)
    op.create_index(op.f('ix_run_records_id'), 'run_records', ['id'], unique=False)
    op.create_table('ground_truth_batches',
    sa.Column('key', sa.String(length=64), nullable=False, comment='목표/시드/표본 수 해시'),
    sa.Column('target_name', sa.String(length=100), nullable=False, comment='목표 분포 이름'),
    sa.Column('seed', sa.Integer(), nullable=False, comment='생성 시드'),
    sa.Column('n_samples', sa.Integer(), nullable=False, comment='표본 수'),
    sa.Column('dim', sa.Integer(), nullable=False, comment='차원'),
    sa.Column('samples', sa.LargeBinary(), nullable=False, comment='npy 직렬화 표본'),
    sa.Column('ledger_total', sa.Integer(), nullable=False, comment='생성에 쓴 질의 수'),
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('created_at', sa.DateTime(timezone=True), nullable=False),
    sa.Column('updated_at', sa.DateTime(timezone=True), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_ground_truth_batches_id'), 'ground_truth_batches', ['id'], unique=False)
    op.create_index(op.f('ix_ground_truth_batches_key'), 'ground_truth_batches', ['key'], unique=True)
    # ### end Alembic commands ###


def downgrade() -> None:
    """Downgrade schema."""
    # ### commands auto generated by Alembic - please adjust! ###
    op.drop_index(op.f('ix_ground_truth_batches_key'), table_name='ground_truth_batches')
    op.drop_index(op.f('ix_ground_truth_batches_id'), table_name='ground_truth_batches')
    op.drop_table('ground_truth_batches')
    op.drop_index(op.f('ix_run_records_id'), table_name='run_records')
    op.drop_index(op.f('ix_run_records_experiment'), table_name='run_records')
    op.drop_table('run_records')
    # ### end Alembic commands ###
