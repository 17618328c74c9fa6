# config/settings.py
import os
from pathlib import Path
from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()


class Config:
    # 메인 프로그램의 위치를 기준으로 경로 설정
    BASE_DIR = Path(__file__).parent.parent

    # 결과물 기본 출력 디렉토리
    OUTPUT_DIR = Path(os.getenv("TDCROP_OUTPUT_DIR", str(BASE_DIR / "runs")))

    # 병렬 작업자 수 (기본값: 사용 가능한 코어 수)
    THREADS = int(os.getenv("TDCROP_THREADS", str(os.cpu_count() or 1)))

    LOG_LEVEL = os.getenv("TDCROP_LOG_LEVEL", "INFO").upper()

    # 따로 지정하지 않을 때의 포아송 비 (니티놀/스테인리스 백본 기준)
    POISSON_RATIO = float(os.getenv("TDCROP_POISSON", "0.3"))

    # 로봇 구조 상수
    N_TENDONS = 4
    N_NODES = 42
    PRODUCTION_STEPS = 41
    FINE_STEPS = 2048
    DESIGN_DIM = 3 * N_TENDONS + 3

    # 슈팅 솔버 설정
    SHOOTING_TOL = 1e-8
    NEWTON_MAX_ITER = 50
    FD_PERTURBATION = 1e-7
    ARMIJO_C = 1e-4
    ARMIJO_MIN_STEP = 2.0**-20
    HOMOTOPY_STAGES = (0.25, 0.5, 0.75, 1.0)
    CONDITION_LIMIT = 1e12

    # 데이터 생성 시 허용 실패율
    MAX_FAILURE_RATE = 0.05
    MAX_OOD_FAILURE_RATE = 0.10

    # Gram-Schmidt 퇴화 임계값
    GS_EPS = 1e-9

    @classmethod
    def cache_dir(cls) -> Path:
        """스터디 셀 캐시 디렉토리. 테스트에서 환경변수를 바꿀 수 있도록 매번 읽는다."""
        return Path(os.getenv("TDCROP_CACHE", str(cls.BASE_DIR / ".tdcrop_cache")))
