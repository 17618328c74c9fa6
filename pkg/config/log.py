# config/log.py
import logging

from rich.logging import RichHandler

from config.settings import Config


def configure_logging(verbosity: int = 0, quiet: bool = False) -> None:
    """CLI 진입 시 한 번 호출. 라이브러리 코드는 logging.getLogger(__name__)만 사용한다."""
    if quiet:
        level = logging.WARNING
    elif verbosity > 0:
        level = logging.DEBUG
    else:
        level = getattr(logging, Config.LOG_LEVEL, logging.INFO)

    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )


def progress_disabled() -> bool:
    """INFO보다 조용한 레벨이면 tqdm 진행 표시를 끈다."""
    return logging.getLogger().getEffectiveLevel() > logging.INFO
