#!/usr/bin/env python3

"""
FJSSP Solver API
インスタンスJSONを受け取り、BQM の規模計算と CQPU/HQPU/IHQPU による求解を行うREST API
"""

import secrets
from datetime import datetime
from typing import Any, Dict, Optional

from fastapi import APIRouter, FastAPI, HTTPException, Security
from fastapi.middleware.cors import CORSMiddleware
from fastapi.security import APIKeyHeader
from pydantic import BaseModel, Field, ValidationError

import settings
from fjssp_instance import InstanceFormatError, InstanceValidationError, instance_from_dict, validate_instance
from qubo_builder import EmptyWindowError, PenaltyWeights, build_bqm, build_variable_table, count_interactions
from solvers import SolveReport, SolverConfig, SolverKind, solve
from topology import TopologyFormatError, parse_topology_spec

VERSION = "1.0.0"

# FastAPIアプリ
app = FastAPI(
    title="FJSSP Solver API",
    description="FJSSP → QUBO 変換と量子アニーリング模擬ソルバー（CQPU / HQPU / IHQPU）",
    version=VERSION,
    docs_url="/docs",
    redoc_url="/redoc"
)

# CORS設定
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # 本番環境では制限すること
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# 400 にするドメインエラー
DOMAIN_ERRORS = (InstanceFormatError, InstanceValidationError, EmptyWindowError, TopologyFormatError,
                 ValidationError)


# ============================================
# データモデル
# ============================================

class MetricsRequest(BaseModel):
    """規模計算リクエスト"""
    instance: Dict[str, Any]
    t_window: int = Field(default=2, ge=1)


class MetricsResponse(BaseModel):
    n_v: int
    n_q: int
    num_operations: int


class SolveRequest(BaseModel):
    """求解リクエスト"""
    instance: Dict[str, Any]
    solver: SolverKind
    topology: str = settings.TOPOLOGY
    time_limit: float = Field(default=settings.TIME_LIMIT, gt=0)
    seed: int = Field(default=settings.SEED, ge=0)
    deterministic_budget: Optional[int] = Field(default=None, ge=1)
    partition_threshold: Optional[float] = Field(default=None, gt=0)
    subset_size_cap: Optional[int] = Field(default=None, ge=1)
    t_window: int = Field(default=2, ge=1)


class HealthResponse(BaseModel):
    """ヘルスチェック"""
    status: str
    version: str
    timestamp: str
    features: Dict[str, bool]


# ============================================
# 認証
# ============================================

api_key_header = APIKeyHeader(name="X-API-Key", auto_error=False,
                              description="環境変数 FJSSP_API_KEY に設定したキー")


def require_solver_key(x_api_key: Optional[str] = Security(api_key_header)) -> str:
    """X-API-Key を FJSSP_API_KEY と照合（ヘッダーなし 401、不一致 403）"""
    if not x_api_key:
        raise HTTPException(status_code=401, detail="X-API-Key header is required for FJSSP solver endpoints",
                            headers={"WWW-Authenticate": "APIKey"})
    if not secrets.compare_digest(x_api_key.encode("utf-8"), settings.API_KEY.encode("utf-8")):
        raise HTTPException(status_code=403, detail="X-API-Key does not match FJSSP_API_KEY")
    return x_api_key


# POST /api/v1/* はすべてキー必須
solver_router = APIRouter(prefix="/api/v1", dependencies=[Security(require_solver_key)])


# ============================================
# ヘルパー関数
# ============================================

def parse_instance(data: Dict[str, Any]):
    """辞書 → インスタンス（不変条件違反は InstanceValidationError）"""
    instance = instance_from_dict(data)
    diagnostics = validate_instance(instance)
    if diagnostics:
        raise InstanceValidationError(diagnostics)
    return instance


# ============================================
# エンドポイント
# ============================================

@app.get("/", tags=["General"])
async def root():
    """ルートエンドポイント"""
    return {
        "message": "FJSSP Solver API",
        "version": VERSION,
        "documentation": "/docs",
        "endpoints": {
            "solve": "POST /api/v1/solve",
            "metrics": "POST /api/v1/metrics",
            "solvers": "GET /api/v1/solvers",
            "health": "GET /api/v1/health"
        }
    }


@app.get("/api/v1/health", response_model=HealthResponse, tags=["General"])
async def health():
    """ヘルスチェック"""
    return HealthResponse(
        status="healthy",
        version=VERSION,
        timestamp=datetime.now().isoformat(),
        features={
            "cqpu": True,
            "hqpu": True,
            "ihqpu": True,
            "hardware_qpu": False,
        }
    )


@app.get("/api/v1/solvers", tags=["General"])
async def supported_solvers():
    """対応ソルバーとトポロジー指定"""
    return {
        "solvers": [
            {"kind": SolverKind.CQPU.value, "description": "full BQM embedded and sampled by simulated quantum annealing"},
            {"kind": SolverKind.HQPU.value, "description": "parallel portfolio: simulated annealing, tabu search, QA subproblems"},
            {"kind": SolverKind.IHQPU.value, "description": "bottleneck-ordered job subsets solved iteratively with HQPU"},
        ],
        "topology_specs": ["chimera:R,C,S", "file:path"],
        "default_topology": settings.TOPOLOGY,
    }


@solver_router.post("/metrics", response_model=MetricsResponse, tags=["Analysis"])
def metrics(request: MetricsRequest):
    """BQM の変数数 n_v と二次項数 n_q"""
    try:
        instance = parse_instance(request.instance)
        table = build_variable_table(instance, request.t_window)
        bqm = build_bqm(instance, table, PenaltyWeights.default(instance.num_operations, request.t_window))
        n_v, n_q = count_interactions(bqm)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Metrics failed: {str(e)}")
    return MetricsResponse(n_v=n_v, n_q=n_q, num_operations=instance.num_operations)


@solver_router.post("/solve", response_model=SolveReport, tags=["Solve"])
def solve_instance(request: SolveRequest):
    """
    インスタンスを解く

    - CQPU: 全体を埋め込み（失敗時は status=EmbeddingInfeasible）
    - HQPU: SA・タブー・QA部分問題の並列ポートフォリオ
    - IHQPU: partition_threshold を超える場合にジョブ部分集合へ分割
    """
    try:
        instance = parse_instance(request.instance)
        config = SolverConfig(
            kind=request.solver,
            topology=parse_topology_spec(request.topology),
            time_limit=request.time_limit,
            seed=request.seed,
            deterministic_budget=request.deterministic_budget,
            partition_threshold=request.partition_threshold or float("inf"),
            subset_size_cap=request.subset_size_cap,
            t_window=request.t_window,
        )
        report = solve(instance, config)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Solve failed: {str(e)}")
    return report


app.include_router(solver_router)


if __name__ == "__main__":
    import uvicorn
    settings.configure_logging()
    print("🚀 FJSSP Solver API starting...")
    print(f"   Version: {VERSION}")
    print(f"   Default topology: {settings.TOPOLOGY}")
    print(f"\n📍 API Documentation: http://localhost:{settings.API_PORT}/docs")
    print(f"🔐 API Key required: X-API-Key header\n")

    uvicorn.run(app, host="0.0.0.0", port=settings.API_PORT)
