#!/usr/bin/env python3

"""
環境変数からの設定読み込み
CLIフラグ・APIリクエストの値が優先され、ここは既定値のみを提供する
"""

import logging
import os

# 乱数シード（サンプラー・埋め込み・ベンチマーク共通）
SEED = int(os.getenv("FJSSP_SEED", "0"))

# ソルバーの制限時間（秒）。既定は15分
TIME_LIMIT = float(os.getenv("FJSSP_TIME_LIMIT", "900"))

# ハードウェアグラフ指定 (chimera:R,C,S または file:path)
TOPOLOGY = os.getenv("FJSSP_TOPOLOGY", "chimera:16,16,4")

# ログレベル
LOG_LEVEL = os.getenv("FJSSP_LOG_LEVEL", "WARNING").upper()

# REST API
API_KEY = os.getenv("FJSSP_API_KEY", "dev-key-12345")  # 本番環境では必ず設定
API_PORT = int(os.getenv("FJSSP_API_PORT", "8000"))


def configure_logging(level: str = None):
    """スクリプト起動時に一度だけ呼ぶ"""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
