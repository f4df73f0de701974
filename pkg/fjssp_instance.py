#!/usr/bin/env python3

"""
FJSSPインスタンスのデータモデル
最早開始時刻の計算、実験セットアップ1〜3のインスタンス生成、JSON入出力
"""

import argparse
import json
import logging
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, StrictInt, ValidationError

logger = logging.getLogger(__name__)


class InstanceFormatError(ValueError):
    """インスタンスファイルの構文・スキーマエラー"""


class InstanceValidationError(ValueError):
    """インスタンスの不変条件違反"""

    def __init__(self, diagnostics: List["InstanceDiagnostic"]):
        self.diagnostics = diagnostics
        lines = "; ".join(d.message for d in diagnostics)
        super().__init__(f"invalid instance ({len(diagnostics)} problems): {lines}")


class SetupParamsError(ValueError):
    """実験セットアップのパラメータ不正"""


# ============================================
# データモデル
# ============================================

class Eligibility(BaseModel):
    """工程を処理できる機械と、その機械での処理時間"""
    model_config = ConfigDict(frozen=True)

    machine: int
    time: int


class Operation(BaseModel):
    """工程（処理可能な機械の一覧を持つ）"""
    model_config = ConfigDict(frozen=True)

    eligible: Tuple[Eligibility, ...]

    @property
    def machines(self) -> Tuple[int, ...]:
        return tuple(e.machine for e in self.eligible)

    @property
    def min_time(self) -> int:
        return min(e.time for e in self.eligible)

    @property
    def max_time(self) -> int:
        return max(e.time for e in self.eligible)

    @property
    def mean_time(self) -> float:
        return sum(e.time for e in self.eligible) / len(self.eligible)

    def time_on(self, machine: int) -> Optional[int]:
        for e in self.eligible:
            if e.machine == machine:
                return e.time
        return None


class Job(BaseModel):
    """ジョブ（工程の順序がそのまま先行関係）"""
    model_config = ConfigDict(frozen=True)

    id: int
    operations: Tuple[Operation, ...]


class FjsspInstance(BaseModel):
    """フレキシブル・ジョブショップ問題のインスタンス

    ジョブ・工程は位置インデックス (i, j) で参照する。時刻は 0..horizon-1 の離散値。
    不変条件は validate_instance で検査する（構築時には強制しない）。
    """
    model_config = ConfigDict(frozen=True)

    jobs: Tuple[Job, ...]
    machine_count: int
    horizon: int

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @property
    def num_operations(self) -> int:
        return sum(len(job.operations) for job in self.jobs)

    def operation(self, job: int, op: int) -> Operation:
        return self.jobs[job].operations[op]

    def iter_operations(self):
        """(i, j, Operation) を辞書順で列挙"""
        for i, job in enumerate(self.jobs):
            for j, operation in enumerate(job.operations):
                yield i, j, operation


class SetupKind(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"


class SetupParams(BaseModel):
    """実験セットアップ（J = O = M = n の正方インスタンス）"""
    model_config = ConfigDict(frozen=True)

    setup: SetupKind
    n: int
    k: int = 1
    p: int = 1
    t_window: int = Field(2, description="T_r: 工程ごとの開始時刻候補数")

    @classmethod
    def for_setup(cls, setup: str, n: int, k: Optional[int] = None, p: Optional[int] = None,
                  t_window: Optional[int] = None) -> "SetupParams":
        """セットアップごとの固定値を補ってパラメータを作る"""
        kind = SetupKind(setup)
        if kind == SetupKind.S1:
            k, p = 1, 1
        elif kind == SetupKind.S2:
            p = 1
        k = n if k is None else k
        p = 1 if p is None else p
        if kind == SetupKind.S3:
            t_window = p + 1
        elif t_window is None:
            t_window = 2
        params = cls(setup=kind, n=n, k=k, p=p, t_window=t_window)
        problems = setup_param_problems(params)
        if problems:
            raise SetupParamsError("; ".join(problems))
        return params


def setup_param_problems(params: SetupParams) -> List[str]:
    problems = []
    if params.n < 1:
        problems.append(f"n must be >= 1 (got {params.n})")
    if params.k < 1 or params.k > max(params.n, 1):
        problems.append(f"k must satisfy 1 <= k <= n (got k={params.k}, n={params.n})")
    if params.p < 1:
        problems.append(f"p must be >= 1 (got {params.p})")
    if params.t_window < 1:
        problems.append(f"t_window must be >= 1 (got {params.t_window})")
    if params.setup == SetupKind.S1 and (params.k != 1 or params.p != 1):
        problems.append("setup S1 requires k=1 and p=1")
    if params.setup == SetupKind.S2 and params.p != 1:
        problems.append("setup S2 requires p=1")
    if params.setup == SetupKind.S3 and params.t_window != params.p + 1:
        problems.append("setup S3 requires t_window = p + 1")
    return problems


class InstanceDiagnostic(BaseModel):
    """validate_instance の指摘1件"""
    location: str
    message: str
    job: Optional[int] = None
    op: Optional[int] = None


# ============================================
# 生成・解析
# ============================================

def generate_instance(params: SetupParams) -> FjsspInstance:
    """正方インスタンスを生成

    ジョブ i の工程 j は機械 (i+j+d) mod n (d = 0..k-1) で処理でき、処理時間はすべて p。
    k=1 のとき機械割り当てはラテン方陣になる。horizon は n*p + 1。
    """
    problems = setup_param_problems(params)
    if problems:
        raise SetupParamsError("; ".join(problems))

    n, k, p = params.n, params.k, params.p
    jobs = []
    for i in range(n):
        operations = []
        for j in range(n):
            eligible = tuple(Eligibility(machine=(i + j + d) % n, time=p) for d in range(k))
            operations.append(Operation(eligible=eligible))
        jobs.append(Job(id=i, operations=tuple(operations)))
    instance = FjsspInstance(jobs=tuple(jobs), machine_count=n, horizon=n * p + 1)
    logger.debug("generated %s n=%d k=%d p=%d (%d operations)", params.setup.value, n, k, p,
                 instance.num_operations)
    return instance


def earliest_start(instance: FjsspInstance, job: int, op: int) -> int:
    """先行工程の最小処理時間の総和"""
    if not 0 <= job < instance.num_jobs:
        raise IndexError(f"job index {job} out of range (0..{instance.num_jobs - 1})")
    operations = instance.jobs[job].operations
    if not 0 <= op < len(operations):
        raise IndexError(f"operation index {op} out of range for job {job} (0..{len(operations) - 1})")
    return sum(operations[q].min_time for q in range(op))


def earliest_starts(instance: FjsspInstance) -> Dict[Tuple[int, int], int]:
    """全工程の最早開始時刻"""
    result = {}
    for i, job in enumerate(instance.jobs):
        acc = 0
        for j, operation in enumerate(job.operations):
            result[(i, j)] = acc
            acc += operation.min_time if operation.eligible else 0
    return result


def validate_instance(instance: FjsspInstance) -> List[InstanceDiagnostic]:
    """不変条件を検査して違反を列挙（空なら妥当）"""
    diagnostics = []
    if instance.machine_count < 1:
        diagnostics.append(InstanceDiagnostic(location="machine_count",
                                              message=f"machine_count must be >= 1 (got {instance.machine_count})"))
    if instance.horizon < 1:
        diagnostics.append(InstanceDiagnostic(location="horizon",
                                              message=f"horizon must be >= 1 (got {instance.horizon})"))
    if not instance.jobs:
        diagnostics.append(InstanceDiagnostic(location="jobs", message="instance has no jobs"))

    seen_ids = set()
    for i, job in enumerate(instance.jobs):
        if job.id in seen_ids:
            diagnostics.append(InstanceDiagnostic(location=f"jobs[{i}].id", job=i,
                                                  message=f"duplicate job id {job.id}"))
        seen_ids.add(job.id)
        if not job.operations:
            diagnostics.append(InstanceDiagnostic(location=f"jobs[{i}]", job=i,
                                                  message=f"job {i} has no operations"))
        for j, operation in enumerate(job.operations):
            where = f"jobs[{i}][{j}]"
            if not operation.eligible:
                diagnostics.append(InstanceDiagnostic(location=where, job=i, op=j,
                                                      message=f"operation ({i}, {j}) has no eligible machine"))
                continue
            machines = [e.machine for e in operation.eligible]
            if len(set(machines)) != len(machines):
                diagnostics.append(InstanceDiagnostic(location=where, job=i, op=j,
                                                      message=f"operation ({i}, {j}) lists a machine twice"))
            for e in operation.eligible:
                if e.time < 1:
                    diagnostics.append(InstanceDiagnostic(
                        location=f"{where}.time", job=i, op=j,
                        message=f"operation ({i}, {j}) has processing time {e.time} on machine {e.machine}"))
                if not 0 <= e.machine < instance.machine_count:
                    diagnostics.append(InstanceDiagnostic(
                        location=f"{where}.machine", job=i, op=j,
                        message=f"operation ({i}, {j}) uses machine {e.machine} outside [0, {instance.machine_count})"))
    return diagnostics


# ============================================
# JSON入出力
# ============================================

class _InstanceFile(BaseModel):
    """インスタンスファイルのスキーマ（整数のみ）"""
    machine_count: StrictInt
    horizon: StrictInt
    jobs: List[List[List[Dict[str, StrictInt]]]]


def instance_to_dict(instance: FjsspInstance) -> Dict[str, Any]:
    return {
        "machine_count": instance.machine_count,
        "horizon": instance.horizon,
        "jobs": [
            [[{"machine": e.machine, "time": e.time} for e in operation.eligible]
             for operation in job.operations]
            for job in instance.jobs
        ],
    }


def instance_from_dict(data: Any) -> FjsspInstance:
    """辞書からインスタンスを構築（スキーマ違反は InstanceFormatError）"""
    try:
        parsed = _InstanceFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        if first["type"] == "missing":
            raise InstanceFormatError(f"missing key '{field}'") from e
        raise InstanceFormatError(f"field '{field}': {first['msg']}") from e

    jobs = []
    for i, raw_job in enumerate(parsed.jobs):
        operations = []
        for j, raw_op in enumerate(raw_job):
            eligible = []
            for e, pair in enumerate(raw_op):
                for key in ("machine", "time"):
                    if key not in pair:
                        raise InstanceFormatError(f"missing key 'jobs.{i}.{j}.{e}.{key}'")
                eligible.append(Eligibility(machine=pair["machine"], time=pair["time"]))
            operations.append(Operation(eligible=tuple(eligible)))
        jobs.append(Job(id=i, operations=tuple(operations)))
    return FjsspInstance(jobs=tuple(jobs), machine_count=parsed.machine_count, horizon=parsed.horizon)


def save_instance(path: Path, instance: FjsspInstance):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(instance_to_dict(instance), f, ensure_ascii=False, indent=2)


def load_instance(path: Path, validate: bool = True) -> FjsspInstance:
    """インスタンスファイルを読み込む

    JSON構文エラーは行番号付き、スキーマ違反はキー名付きの InstanceFormatError。
    validate=True のとき不変条件違反は InstanceValidationError。
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"{path.name}: line {e.lineno} column {e.colno}: {e.msg}") from e
    instance = instance_from_dict(data)
    if validate:
        diagnostics = validate_instance(instance)
        if diagnostics:
            raise InstanceValidationError(diagnostics)
    return instance


def main():
    ap = argparse.ArgumentParser(description="FJSSPインスタンスの検査")
    ap.add_argument("input", help="インスタンスJSONファイル")
    args = ap.parse_args()

    try:
        instance = load_instance(Path(args.input), validate=False)
    except (OSError, InstanceFormatError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(1)

    print(f"📄 {args.input}")
    print(f"  ジョブ: {instance.num_jobs}件")
    print(f"  工程: {instance.num_operations}件")
    print(f"  機械: {instance.machine_count}台  horizon: {instance.horizon}")
    diagnostics = validate_instance(instance)
    if diagnostics:
        for d in diagnostics:
            print(f"  ⚠️  {d.location}: {d.message}")
        sys.exit(1)
    print("  ✓ 不変条件を満たしています")


if __name__ == "__main__":
    main()
